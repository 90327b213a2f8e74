#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "fsl/augment.hpp"
#include "fsl/errors.hpp"
#include "fsl/linalg.hpp"
#include "fsl/mlp.hpp"
#include "fsl/rng.hpp"

// Training losses with hand-written backpropagation: plain cross entropy, the
// hybrid consistency loss (two differently-augmented views mixed at a random
// hidden layer against the matching label interpolation), and the 4-way
// rotation-prediction auxiliary. Each stochastic loss splits into an explicit
// draw step and a pure planned evaluation so tests can pin the randomness.

namespace fsl {

struct LossResult {
  double loss = 0.0;
  MlpGrads grads;
};

inline Vec one_hot(std::size_t index, std::size_t n) {
  if (index >= n) raise(errc::invalid_label, "one_hot index out of range");
  Vec v(n, 0.0);
  v[index] = 1.0;
  return v;
}

inline Vec mix_hidden(std::span<const double> h1, std::span<const double> h2, double lambda) {
  if (h1.size() != h2.size()) raise(errc::shape_error, "mix_hidden size mismatch");
  if (!(lambda >= 0.0 && lambda <= 1.0)) raise(errc::invalid_input, "lambda must be in [0,1]");
  Vec out(h1.size());
  for (std::size_t i = 0; i < h1.size(); ++i) out[i] = lambda * h1[i] + (1.0 - lambda) * h2[i];
  return out;
}

inline Vec mix_labels(std::span<const double> y1, std::span<const double> y2, double lambda) {
  if (y1.size() != y2.size()) raise(errc::invalid_label, "mix_labels size mismatch");
  if (!(lambda >= 0.0 && lambda <= 1.0)) raise(errc::invalid_input, "lambda must be in [0,1]");
  auto check = [](std::span<const double> y) {
    std::size_t ones = 0;
    for (double v : y) {
      if (v == 1.0)
        ++ones;
      else if (v != 0.0)
        raise(errc::invalid_label, "labels must be exact one-hot vectors");
    }
    if (ones != 1) raise(errc::invalid_label, "labels must have exactly one hot entry");
  };
  check(y1);
  check(y2);
  Vec out(y1.size());
  for (std::size_t i = 0; i < y1.size(); ++i) out[i] = lambda * y1[i] + (1.0 - lambda) * y2[i];
  return out;
}

namespace detail {

// Forward pass through blocks [from, to) keeping what backward needs.
struct BlockTrace {
  std::vector<Vec> inputs;  // input to each block in the range
  std::vector<Vec> pres;    // pre-activation of each block
  Vec output;               // activation after the last block in the range
};

inline BlockTrace forward_blocks(const MlpModel& m, std::span<const double> x, std::size_t from,
                                 std::size_t to) {
  BlockTrace t;
  Vec h(x.begin(), x.end());
  for (std::size_t i = from; i < to; ++i) {
    t.inputs.push_back(h);
    Vec pre = m.blocks[i].apply(h);
    h = pre;
    for (double& v : h) v = v > 0.0 ? v : 0.0;
    t.pres.push_back(std::move(pre));
  }
  t.output = std::move(h);
  return t;
}

// Propagates dL/d(output) back to dL/d(input of block `from`), accumulating
// parameter gradients along the way.
inline Vec backward_blocks(const MlpModel& m, const BlockTrace& t, std::size_t from,
                           std::size_t to, Vec g, MlpGrads& grads) {
  for (std::size_t i = to; i-- > from;) {
    const Vec& pre = t.pres[i - from];
    const Vec& in = t.inputs[i - from];
    for (std::size_t j = 0; j < g.size(); ++j)
      if (pre[j] <= 0.0) g[j] = 0.0;
    Affine& ga = grads.blocks[i];
    for (std::size_t j = 0; j < g.size(); ++j) {
      ga.b[j] += g[j];
      auto grow = ga.w.row(j);
      for (std::size_t k = 0; k < in.size(); ++k) grow[k] += g[j] * in[k];
    }
    Vec next(in.size(), 0.0);
    for (std::size_t j = 0; j < g.size(); ++j) {
      auto wrow = m.blocks[i].w.row(j);
      for (std::size_t k = 0; k < in.size(); ++k) next[k] += wrow[k] * g[j];
    }
    g = std::move(next);
  }
  return g;
}

// Head backward: accumulates head gradients and returns dL/d(head input).
inline Vec backward_affine(const Affine& a, Affine& ga, const Vec& input, const Vec& dout) {
  for (std::size_t j = 0; j < dout.size(); ++j) {
    ga.b[j] += dout[j];
    auto grow = ga.w.row(j);
    for (std::size_t k = 0; k < input.size(); ++k) grow[k] += dout[j] * input[k];
  }
  Vec din(input.size(), 0.0);
  for (std::size_t j = 0; j < dout.size(); ++j) {
    auto wrow = a.w.row(j);
    for (std::size_t k = 0; k < input.size(); ++k) din[k] += wrow[k] * dout[j];
  }
  return din;
}

// Cross entropy of softmax(logits) against a distribution target.
// Returns the loss; writes dL/dlogits = p - target into dlogits.
inline double ce_from_logits(const Vec& logits, std::span<const double> target, Vec& dlogits) {
  Vec p = softmax(logits);
  double loss = 0.0;
  dlogits.resize(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (target[j] > 0.0) loss -= target[j] * std::log(p[j]);
    dlogits[j] = p[j] - target[j];
  }
  return loss;
}

}  // namespace detail

// Mean cross entropy over a labeled batch, with gradients for every model
// parameter (heads included; the rotation head just gets zeros).
inline LossResult ce_loss(const MlpModel& m, const Matrix& x, const std::vector<int>& labels) {
  if (x.rows() == 0) raise(errc::empty_set, "ce_loss needs a non-empty batch");
  if (x.rows() != labels.size()) raise(errc::shape_error, "batch rows / labels mismatch");
  LossResult res;
  res.grads = MlpGrads::zeros_like(m);
  std::size_t n_classes = m.config.n_classes;
  double inv = 1.0 / static_cast<double>(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= n_classes)
      raise(errc::invalid_label, "label " + std::to_string(y) + " out of range");
    detail::BlockTrace t = detail::forward_blocks(m, x.row(i), 0, m.n_layers());
    Vec logits = m.classifier.apply(t.output);
    Vec target = one_hot(static_cast<std::size_t>(y), n_classes);
    Vec dlogits;
    res.loss += inv * detail::ce_from_logits(logits, target, dlogits);
    for (double& v : dlogits) v *= inv;
    Vec de = detail::backward_affine(m.classifier, res.grads.classifier, t.output, dlogits);
    detail::backward_blocks(m, t, 0, m.n_layers(), std::move(de), res.grads);
  }
  return res;
}

struct PairBatch {
  Matrix x1;
  Matrix x2;
  std::vector<int> y1;
  std::vector<int> y2;

  std::size_t size() const { return x1.rows(); }
  void validate() const {
    if (x1.rows() != x2.rows() || x1.rows() != y1.size() || x1.rows() != y2.size())
      raise(errc::shape_error, "pair batch parts disagree on size");
  }
};

struct HctConfig {
  double alpha = 2.0;
  double eta = 1.0;
  std::vector<std::size_t> eligible_layers;  // empty means every layer 0..L
  double schedule_fraction = 1.0 / 3.0;
  AugmentPolicy weak_aug;
  AugmentPolicy strong_aug;
  bool mm_mode = false;  // both branches weakly augmented

  void validate() const {
    if (!(alpha > 0.0)) raise(errc::invalid_config, "alpha must be positive");
    if (eta < 0.0) raise(errc::invalid_config, "eta must be non-negative");
    if (!(schedule_fraction >= 0.0 && schedule_fraction <= 1.0))
      raise(errc::invalid_config, "schedule_fraction must be in [0,1]");
  }

  std::vector<std::size_t> layers_for(std::size_t n_layers) const {
    if (eligible_layers.empty()) {
      std::vector<std::size_t> all(n_layers + 1);
      for (std::size_t i = 0; i <= n_layers; ++i) all[i] = i;
      return all;
    }
    for (std::size_t l : eligible_layers)
      if (l > n_layers)
        raise(errc::invalid_layer, "eligible layer " + std::to_string(l) + " out of range");
    return eligible_layers;
  }
};

// The randomness of one pair, frozen: mixing weight, mixing layer, and the
// two augmented views.
struct HctDraw {
  double lambda = 1.0;
  std::size_t layer = 0;
  Vec x1_aug;
  Vec x2_aug;
};

// Per pair, in order: lambda, layer, branch-one augmentation draws,
// branch-two augmentation draws.
inline std::vector<HctDraw> draw_hct_plan(const MlpModel& m, const PairBatch& batch,
                                          RngStream& rng, const HctConfig& cfg) {
  cfg.validate();
  batch.validate();
  std::vector<std::size_t> layers = cfg.layers_for(m.n_layers());
  const AugmentPolicy& second_policy = cfg.mm_mode ? cfg.weak_aug : cfg.strong_aug;
  std::vector<HctDraw> plan(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    HctDraw& d = plan[i];
    d.lambda = sample_beta(rng, cfg.alpha);
    d.layer = layers[rng.next_below(layers.size())];
    d.x1_aug = augment(batch.x1.row(i), rng, cfg.weak_aug);
    d.x2_aug = augment(batch.x2.row(i), rng, second_policy);
  }
  return plan;
}

// Consistency loss under a fixed plan. Each pair runs both views up to the
// drawn layer, mixes the hidden states, finishes the forward pass, and takes
// cross entropy against the identically mixed labels; gradients flow through
// both branches.
inline LossResult hct_loss_planned(const MlpModel& m, const PairBatch& batch,
                                   const std::vector<HctDraw>& plan) {
  batch.validate();
  if (batch.size() == 0) raise(errc::empty_set, "hct_loss needs a non-empty batch");
  if (plan.size() != batch.size()) raise(errc::shape_error, "plan size / batch size mismatch");

  LossResult res;
  res.grads = MlpGrads::zeros_like(m);
  std::size_t n_classes = m.config.n_classes;
  std::size_t L = m.n_layers();
  double inv = 1.0 / static_cast<double>(batch.size());

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const HctDraw& d = plan[i];
    if (d.layer > L) raise(errc::invalid_layer, "mix layer out of range");
    auto ya = static_cast<std::size_t>(batch.y1[i]);
    auto yb = static_cast<std::size_t>(batch.y2[i]);

    detail::BlockTrace t1 = detail::forward_blocks(m, d.x1_aug, 0, d.layer);
    detail::BlockTrace t2 = detail::forward_blocks(m, d.x2_aug, 0, d.layer);
    Vec mixed = mix_hidden(t1.output, t2.output, d.lambda);
    detail::BlockTrace ts = detail::forward_blocks(m, mixed, d.layer, L);
    Vec logits = m.classifier.apply(ts.output);
    Vec target = mix_labels(one_hot(ya, n_classes), one_hot(yb, n_classes), d.lambda);

    Vec dlogits;
    res.loss += inv * detail::ce_from_logits(logits, target, dlogits);
    for (double& v : dlogits) v *= inv;
    Vec de = detail::backward_affine(m.classifier, res.grads.classifier, ts.output, dlogits);
    Vec g_mixed = detail::backward_blocks(m, ts, d.layer, L, std::move(de), res.grads);

    Vec g1(g_mixed.size()), g2(g_mixed.size());
    for (std::size_t j = 0; j < g_mixed.size(); ++j) {
      g1[j] = d.lambda * g_mixed[j];
      g2[j] = (1.0 - d.lambda) * g_mixed[j];
    }
    detail::backward_blocks(m, t1, 0, d.layer, std::move(g1), res.grads);
    detail::backward_blocks(m, t2, 0, d.layer, std::move(g2), res.grads);
  }
  return res;
}

inline LossResult hct_loss(const MlpModel& m, const PairBatch& batch, RngStream& rng,
                           const HctConfig& cfg) {
  return hct_loss_planned(m, batch, draw_hct_plan(m, batch, rng, cfg));
}

// Rotation auxiliary: each image is rotated by a drawn quarter turn and the
// rotation head must recover which one.
inline LossResult rot_loss_planned(const MlpModel& m, const Matrix& images,
                                   const std::vector<std::size_t>& turns,
                                   const ImageShape& shape) {
  if (!m.config.rotation_head) raise(errc::missing_head, "model has no rotation head");
  if (images.rows() == 0) raise(errc::empty_set, "rot_loss needs a non-empty batch");
  if (turns.size() != images.rows()) raise(errc::shape_error, "turn count / batch mismatch");
  if (shape.pixels() != m.config.input_dim)
    raise(errc::invalid_input, "image shape does not match the model input");

  LossResult res;
  res.grads = MlpGrads::zeros_like(m);
  double inv = 1.0 / static_cast<double>(images.rows());
  for (std::size_t i = 0; i < images.rows(); ++i) {
    std::size_t k = turns[i] % 4;
    Vec rotated = rotate90(images.row(i), shape, k);
    detail::BlockTrace t = detail::forward_blocks(m, rotated, 0, m.n_layers());
    Vec logits = m.rotation.apply(t.output);
    Vec target = one_hot(k, 4);
    Vec dlogits;
    res.loss += inv * detail::ce_from_logits(logits, target, dlogits);
    for (double& v : dlogits) v *= inv;
    Vec de = detail::backward_affine(m.rotation, res.grads.rotation, t.output, dlogits);
    detail::backward_blocks(m, t, 0, m.n_layers(), std::move(de), res.grads);
  }
  return res;
}

inline LossResult rot_loss(const MlpModel& m, const Matrix& images, RngStream& rng,
                           const ImageShape& shape) {
  std::vector<std::size_t> turns(images.rows());
  for (auto& k : turns) k = rng.next_below(4);
  return rot_loss_planned(m, images, turns, shape);
}

// Fraction of rows whose top logit matches the label.
inline double classifier_accuracy(const MlpModel& m, const Matrix& x,
                                  const std::vector<int>& labels) {
  if (x.rows() == 0) raise(errc::empty_set, "accuracy needs a non-empty batch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < x.rows(); ++i)
    hits += argmax_lowest(m.logits(x.row(i))) == static_cast<std::size_t>(labels[i]) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(x.rows());
}

}  // namespace fsl
