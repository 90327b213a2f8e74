#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fsl/calibration.hpp"
#include "fsl/errors.hpp"
#include "fsl/linalg.hpp"

// Prototype-based inference. Three strategies share one engine:
//
//   protonet:  class centroids from the support set, one soft prediction.
//   semipn:    soft k-means refinement on raw features, full replacement
//              (momentum 1), one or few steps.
//   cipa:      calibrated features, iterated soft k-means with momentum
//              blending, pseudo-labels recomputed from scratch each pass.
//
// The adaptation pool is the query set in transductive mode and the auxiliary
// unlabeled set in semi-supervised mode; queries never influence updates in
// the latter.

namespace fsl {

enum class Distance { cosine, neg_euclidean };
enum class InferMode { transductive, semi_supervised };
enum class Strategy { protonet, semipn, cipa };

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::protonet: return "protonet";
    case Strategy::semipn: return "semipn";
    case Strategy::cipa: return "cipa";
  }
  raise(errc::invalid_config, "unknown strategy");
}

struct InferenceConfig {
  double tau = 15.0;  // softmax scale on cosine scores
  double sigma = 0.2;
  std::size_t n_iter = 20;
  Distance distance = Distance::cosine;
  InferMode mode = InferMode::transductive;
  Strategy strategy = Strategy::cipa;
  bool keep_history = true;

  void validate() const {
    if (!(tau > 0.0) || !std::isfinite(tau)) raise(errc::invalid_config, "tau must be positive");
    if (!(sigma >= 0.0 && sigma <= 1.0)) raise(errc::invalid_config, "sigma must be in [0,1]");
  }
};

// Rows are per-example class distributions (simplex points).
using SoftAssignment = Matrix;

// Class centers plus what produced them. `weights` holds, per class, the
// convex combination over [support rows | pool rows] that reconstructs the
// center; the soft-k-means and blend updates preserve convexity, so the
// invariant is testable at every iteration.
struct Prototypes {
  Matrix centers;               // N x d
  Matrix weights;               // N x (n_support + n_pool)
  std::vector<Matrix> history;  // centers snapshot per iteration when retained
};

inline std::size_t count_classes(const std::vector<int>& labels) {
  int top = -1;
  for (int y : labels) {
    if (y < 0) raise(errc::invalid_label, "negative class id");
    top = std::max(top, y);
  }
  return static_cast<std::size_t>(top + 1);
}

// Per-class arithmetic means of the support rows. `pool_rows` pads the weight
// matrix so later soft-k-means results stay shape-compatible.
inline Prototypes init_prototypes(const Matrix& support, const std::vector<int>& labels,
                                  std::size_t n_classes, std::size_t pool_rows = 0) {
  if (support.rows() != labels.size())
    raise(errc::shape_error, "support rows / labels mismatch");
  std::vector<std::size_t> counts(n_classes, 0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= n_classes)
      raise(errc::invalid_label, "support label " + std::to_string(y) + " out of range");
    ++counts[static_cast<std::size_t>(y)];
  }
  for (std::size_t c = 0; c < n_classes; ++c)
    if (counts[c] == 0)
      raise(errc::missing_class, "class " + std::to_string(c) + " has no support examples");

  Prototypes p;
  p.centers = Matrix(n_classes, support.cols());
  p.weights = Matrix(n_classes, support.rows() + pool_rows);
  for (std::size_t i = 0; i < support.rows(); ++i) {
    auto c = static_cast<std::size_t>(labels[i]);
    auto center = p.centers.row(c);
    auto src = support.row(i);
    for (std::size_t j = 0; j < support.cols(); ++j) center[j] += src[j];
    p.weights.at(c, i) = 1.0 / static_cast<double>(counts[c]);
  }
  for (std::size_t c = 0; c < n_classes; ++c) {
    auto center = p.centers.row(c);
    for (double& v : center) v /= static_cast<double>(counts[c]);
  }
  p.history.push_back(p.centers);
  return p;
}

// Scaled-softmax class distribution per feature row. Cosine requires nonzero
// norms on both sides.
inline SoftAssignment predict_soft(const Matrix& features, const Prototypes& protos, double tau,
                                   Distance distance) {
  if (!(tau > 0.0) || !std::isfinite(tau)) raise(errc::invalid_config, "tau must be positive");
  const Matrix& centers = protos.centers;
  if (!features.empty() && features.cols() != centers.cols())
    raise(errc::shape_error, "feature/prototype dimension mismatch");
  if (distance == Distance::cosine)
    for (std::size_t c = 0; c < centers.rows(); ++c)
      if (squared_norm(centers.row(c)) == 0.0)
        raise(errc::degenerate_vector, "zero-norm prototype " + std::to_string(c));

  SoftAssignment out(features.rows(), centers.rows());
  Vec logits(centers.rows());
  for (std::size_t i = 0; i < features.rows(); ++i) {
    auto x = features.row(i);
    for (std::size_t c = 0; c < centers.rows(); ++c) {
      double sim = distance == Distance::cosine ? cosine_similarity(x, centers.row(c))
                                                : -squared_distance(x, centers.row(c));
      logits[c] = tau * sim;
    }
    out.set_row(i, softmax(logits));
  }
  return out;
}

// Soft k-means step: support members count fully, pool members by their
// current class probability. Returns the convexity weights alongside the new
// centers; history is left to the caller.
inline Prototypes soft_kmeans_update(const Matrix& support, const std::vector<int>& labels,
                                     const Matrix& pool, const SoftAssignment& assignment) {
  std::size_t n_classes = count_classes(labels);
  if (support.rows() != labels.size())
    raise(errc::shape_error, "support rows / labels mismatch");
  if (assignment.rows() != pool.rows())
    raise(errc::shape_error, "assignment rows must align with pool rows");
  if (pool.rows() > 0 && assignment.cols() != n_classes)
    raise(errc::shape_error, "assignment columns / class count mismatch");

  Prototypes p;
  p.centers = Matrix(n_classes, support.cols());
  p.weights = Matrix(n_classes, support.rows() + pool.rows());
  Vec denom(n_classes, 0.0);

  for (std::size_t i = 0; i < support.rows(); ++i) {
    auto c = static_cast<std::size_t>(labels[i]);
    auto center = p.centers.row(c);
    auto src = support.row(i);
    for (std::size_t j = 0; j < support.cols(); ++j) center[j] += src[j];
    denom[c] += 1.0;
  }
  for (std::size_t k = 0; k < pool.rows(); ++k) {
    auto probs = assignment.row(k);
    auto src = pool.row(k);
    for (std::size_t c = 0; c < n_classes; ++c) {
      double w = probs[c];
      auto center = p.centers.row(c);
      for (std::size_t j = 0; j < support.cols(); ++j) center[j] += w * src[j];
      denom[c] += w;
    }
  }
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (denom[c] == 0.0)
      raise(errc::missing_class, "class " + std::to_string(c) + " has zero total weight");
    auto center = p.centers.row(c);
    for (double& v : center) v /= denom[c];
  }
  for (std::size_t i = 0; i < support.rows(); ++i) {
    auto c = static_cast<std::size_t>(labels[i]);
    p.weights.at(c, i) = 1.0 / denom[c];
  }
  for (std::size_t k = 0; k < pool.rows(); ++k)
    for (std::size_t c = 0; c < n_classes; ++c)
      p.weights.at(c, support.rows() + k) = assignment.at(k, c) / denom[c];
  return p;
}

// Elementwise convex blend sigma * fresh + (1 - sigma) * old, applied to the
// convexity weights as well so reconstruction keeps holding.
inline Prototypes momentum_blend(const Prototypes& fresh, const Prototypes& old, double sigma) {
  if (!(sigma >= 0.0 && sigma <= 1.0)) raise(errc::invalid_config, "sigma must be in [0,1]");
  if (fresh.centers.rows() != old.centers.rows() || fresh.centers.cols() != old.centers.cols())
    raise(errc::shape_error, "momentum_blend: center shape mismatch");
  if (fresh.weights.rows() != old.weights.rows() || fresh.weights.cols() != old.weights.cols())
    raise(errc::shape_error, "momentum_blend: weight shape mismatch");
  Prototypes out;
  out.centers = fresh.centers;
  out.weights = fresh.weights;
  for (std::size_t i = 0; i < out.centers.data().size(); ++i)
    out.centers.data()[i] = sigma * fresh.centers.data()[i] + (1.0 - sigma) * old.centers.data()[i];
  for (std::size_t i = 0; i < out.weights.data().size(); ++i)
    out.weights.data()[i] = sigma * fresh.weights.data()[i] + (1.0 - sigma) * old.weights.data()[i];
  return out;
}

struct InferenceResult {
  SoftAssignment assignment;  // queries x classes
  Prototypes prototypes;
};

// Iterative prototype adaptation on an already-calibrated episode:
//
//   init from support centroids
//   repeat n_iter times:
//     soft predictions on the pool against the previous centers
//     soft k-means update from those pseudo-labels
//     momentum blend with the previous centers
//   predict the queries against the final centers
//
// n_iter = 0 degenerates to centroid prediction on the calibrated features.
inline InferenceResult cipa_infer(const CalibratedEpisode& ep, const InferenceConfig& cfg) {
  cfg.validate();
  const Matrix& pool =
      cfg.mode == InferMode::semi_supervised ? ep.unlabeled_features : ep.query_features;
  std::size_t n_classes = count_classes(ep.support_labels);

  Prototypes protos =
      init_prototypes(ep.support_features, ep.support_labels, n_classes, pool.rows());
  for (std::size_t t = 0; t < cfg.n_iter; ++t) {
    SoftAssignment pool_probs = predict_soft(pool, protos, cfg.tau, cfg.distance);
    Prototypes fresh =
        soft_kmeans_update(ep.support_features, ep.support_labels, pool, pool_probs);
    Prototypes blended = momentum_blend(fresh, protos, cfg.sigma);
    blended.history = std::move(protos.history);
    blended.history.push_back(blended.centers);
    protos = std::move(blended);
  }
  if (!cfg.keep_history) protos.history.clear();

  InferenceResult out;
  out.assignment = predict_soft(ep.query_features, protos, cfg.tau, cfg.distance);
  out.prototypes = std::move(protos);
  return out;
}

// Soft k-means baseline: full replacement each step (sigma forced to 1).
// Expects raw features, i.e. an episode calibrated with the identity config.
inline SoftAssignment semipn_infer(const CalibratedEpisode& ep, const InferenceConfig& cfg) {
  InferenceConfig forced = cfg;
  forced.sigma = 1.0;
  return cipa_infer(ep, forced).assignment;
}

// Centroid prediction with no adaptation at all.
inline SoftAssignment protonet_infer(const CalibratedEpisode& ep, const InferenceConfig& cfg) {
  InferenceConfig forced = cfg;
  forced.n_iter = 0;
  return cipa_infer(ep, forced).assignment;
}

}  // namespace fsl
