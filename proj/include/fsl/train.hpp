#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "fsl/dataset.hpp"
#include "fsl/errors.hpp"
#include "fsl/losses.hpp"
#include "fsl/mlp.hpp"
#include "fsl/rng.hpp"

// Minibatch training with constant-rate Adam. The objective is cross entropy,
// plus the consistency loss (weight eta) once the configured fraction of
// epochs has passed, plus the rotation auxiliary when enabled.
//
// Stream layout keeps the paths independent: tag 0 of the run stream seeds
// initialization; tag 1+e seeds epoch e, which splits into shuffle (0),
// consistency draws (1) and rotation draws (2). Disabling one loss therefore
// never perturbs the draws of another.

namespace fsl {

struct TrainConfig {
  std::size_t epochs = 60;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  HctConfig hct;
  bool rotation = false;
  ImageShape image;  // used by rotation and image augmentations

  void validate() const {
    if (epochs == 0) raise(errc::invalid_config, "epochs must be positive");
    if (batch_size == 0) raise(errc::invalid_config, "batch_size must be positive");
    if (!(lr > 0.0)) raise(errc::invalid_config, "lr must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      raise(errc::invalid_config, "adam betas must be in [0,1)");
    if (!(adam_eps > 0.0)) raise(errc::invalid_config, "adam_eps must be positive");
    hct.validate();
    if (rotation) image.validate();
  }

  // first epoch index on which the consistency loss is active
  std::size_t hct_start_epoch() const {
    return static_cast<std::size_t>(
        std::ceil(hct.schedule_fraction * static_cast<double>(epochs)));
  }
};

struct EpochStats {
  double loss_ce = 0.0;
  double loss_hct = 0.0;
  double loss_rot = 0.0;
};

struct TrainResult {
  MlpModel model;
  std::vector<EpochStats> curves;
};

struct AdamState {
  Vec m;
  Vec v;
  std::size_t t = 0;

  static AdamState zeros(std::size_t n) { return AdamState{Vec(n, 0.0), Vec(n, 0.0), 0}; }
};

inline void adam_step(Vec& params, const Vec& grads, AdamState& state, const TrainConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    raise(errc::shape_error, "adam state size mismatch");
  ++state.t;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    double mhat = state.m[i] / bc1;
    double vhat = state.v[i] / bc2;
    params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
  }
}

inline TrainResult train(const MlpConfig& mcfg, const FeatureSet& data, const TrainConfig& cfg,
                         RngStream rng) {
  cfg.validate();
  mcfg.validate();
  data.validate();
  if (mcfg.input_dim != data.dim())
    raise(errc::shape_error, "model input_dim does not match the dataset");
  if (mcfg.n_classes != static_cast<std::size_t>(data.num_classes()))
    raise(errc::shape_error, "model n_classes does not match the dataset");
  if (cfg.rotation && !mcfg.rotation_head)
    raise(errc::missing_head, "rotation loss requires a rotation head");
  if (cfg.rotation && cfg.image.pixels() != mcfg.input_dim)
    raise(errc::shape_error, "image shape does not match the model input");
  if (cfg.rotation && cfg.image.height != cfg.image.width)
    raise(errc::invalid_config, "rotation requires square images");
  if (cfg.hct.eta > 0.0) {
    for (const AugmentPolicy* p : {&cfg.hct.weak_aug, &cfg.hct.strong_aug}) {
      bool image_kind =
          p->kind == AugmentKind::weak_image || p->kind == AugmentKind::strong_image;
      if (image_kind && p->shape.pixels() != mcfg.input_dim)
        raise(errc::shape_error, "augmentation shape does not match the model input");
    }
  }

  TrainResult res;
  res.model = MlpModel::init(mcfg, derive_stream(rng, 0));
  Vec params = res.model.params_flat();
  AdamState adam = AdamState::zeros(params.size());

  std::size_t n = data.size();
  std::size_t start_hct = cfg.hct_start_epoch();
  bool use_hct = cfg.hct.eta > 0.0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    RngStream epoch_rng = derive_stream(rng, 1 + epoch);
    RngStream shuffle_rng = derive_stream(epoch_rng, 0);
    RngStream hct_rng = derive_stream(epoch_rng, 1);
    RngStream rot_rng = derive_stream(epoch_rng, 2);

    std::vector<std::size_t> order = sample_indices(shuffle_rng, n, n);
    EpochStats stats;
    bool hct_active = use_hct && epoch >= start_hct;

    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      std::size_t end = std::min(begin + cfg.batch_size, n);
      std::size_t bsize = end - begin;
      Matrix xb(bsize, data.dim());
      std::vector<int> yb(bsize);
      for (std::size_t j = 0; j < bsize; ++j) {
        xb.set_row(j, data.features.row(order[begin + j]));
        yb[j] = data.labels[order[begin + j]];
      }

      // Inputs and config are validated up front, so an invalid_input raised
      // from inside a loss evaluation can only mean the parameters blew up
      // and produced non-finite activations. Report that as divergence.
      try {
        LossResult ce = ce_loss(res.model, xb, yb);
        MlpGrads total = std::move(ce.grads);
        stats.loss_ce += ce.loss * static_cast<double>(bsize);

        if (hct_active) {
          PairBatch pairs;
          pairs.x1 = Matrix(bsize, data.dim());
          pairs.x2 = Matrix(bsize, data.dim());
          pairs.y1.resize(bsize);
          pairs.y2.resize(bsize);
          for (std::size_t j = 0; j < bsize; ++j) {
            std::size_t a = order[begin + hct_rng.next_below(bsize)];
            std::size_t b = order[begin + hct_rng.next_below(bsize)];
            pairs.x1.set_row(j, data.features.row(a));
            pairs.y1[j] = data.labels[a];
            pairs.x2.set_row(j, data.features.row(b));
            pairs.y2[j] = data.labels[b];
          }
          LossResult hct = hct_loss(res.model, pairs, hct_rng, cfg.hct);
          total.add_scaled(hct.grads, cfg.hct.eta);
          stats.loss_hct += hct.loss * static_cast<double>(bsize);
        }

        if (cfg.rotation) {
          LossResult rot = rot_loss(res.model, xb, rot_rng, cfg.image);
          total.add_scaled(rot.grads, 1.0);
          stats.loss_rot += rot.loss * static_cast<double>(bsize);
        }

        adam_step(params, total.flat(), adam, cfg);
        res.model.set_params_flat(params);
        if (!all_finite(params))
          raise(errc::training_diverged,
                "non-finite parameters at epoch " + std::to_string(epoch));
      } catch (const Error& e) {
        if (e.code() == errc::invalid_input)
          raise(errc::training_diverged, "non-finite values at epoch " + std::to_string(epoch));
        throw;
      }
    }

    stats.loss_ce /= static_cast<double>(n);
    stats.loss_hct /= static_cast<double>(n);
    stats.loss_rot /= static_cast<double>(n);
    if (!std::isfinite(stats.loss_ce) || !std::isfinite(stats.loss_hct) ||
        !std::isfinite(stats.loss_rot))
      raise(errc::training_diverged, "non-finite loss at epoch " + std::to_string(epoch));
    res.curves.push_back(stats);
  }
  return res;
}

inline void save_curves(const std::vector<EpochStats>& curves, const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(errc::format_error, "cannot open " + path + " for writing");
  out << "epoch,loss_ce,loss_hct,loss_rot\n";
  char buf[128];
  for (std::size_t e = 0; e < curves.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", e, curves[e].loss_ce,
                  curves[e].loss_hct, curves[e].loss_rot);
    out << buf;
  }
  if (!out) raise(errc::format_error, "write failed for " + path);
}

}  // namespace fsl
