#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fsl/episodes.hpp"
#include "fsl/errors.hpp"
#include "fsl/linalg.hpp"

// Feature calibration: power transform, set-wise centering, l2 normalization,
// applied in that order. Each step can be toggled off to reproduce the
// component-ablation rows, and query centering can be disabled for the
// semi-supervised setting where query statistics must stay unused.

namespace fsl {

enum class NegativePolicy { reject, signed_power };

struct CalibrationConfig {
  double beta = 0.5;
  bool apply_power = true;
  bool apply_center = true;
  bool apply_l2 = true;
  bool center_query_set = true;      // false in semi-supervised mode
  bool center_unlabeled_set = true;
  NegativePolicy negative_policy = NegativePolicy::reject;

  static CalibrationConfig identity() {
    CalibrationConfig c;
    c.apply_power = c.apply_center = c.apply_l2 = false;
    return c;
  }

  void validate() const {
    if (!(beta > 0.0) || !std::isfinite(beta))
      raise(errc::invalid_config, "calibration beta must be positive");
  }
};

struct CalibratedEpisode {
  Matrix support_features;
  Matrix query_features;
  Matrix unlabeled_features;
  std::vector<int> support_labels;
  CalibrationConfig provenance;
};

// x^beta elementwise, then scaled to unit norm. SignedPower maps each entry
// through |x|^beta * sign(x) first, which keeps negative toy features usable.
inline Vec power_transform(std::span<const double> x, double beta,
                           NegativePolicy policy = NegativePolicy::reject) {
  if (!(beta > 0.0) || !std::isfinite(beta))
    raise(errc::invalid_config, "power_transform: beta must be positive");
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double v = x[i];
    if (v < 0.0) {
      if (policy == NegativePolicy::reject)
        raise(errc::negative_feature,
              "negative entry " + std::to_string(v) + " at coordinate " + std::to_string(i));
      out[i] = -std::pow(-v, beta);
    } else {
      out[i] = std::pow(v, beta);
    }
  }
  double n = norm(out);
  if (n == 0.0) raise(errc::degenerate_vector, "power_transform: all-zero vector");
  for (double& v : out) v /= n;
  return out;
}

inline Vec power_transform(const Vec& x, double beta,
                           NegativePolicy policy = NegativePolicy::reject) {
  return power_transform(std::span<const double>(x), beta, policy);
}

// Subtract the set's own per-coordinate mean from every row.
inline Matrix center_set(const Matrix& rows) {
  if (rows.empty()) raise(errc::empty_set, "center_set of empty set");
  Vec mean = mean_row(rows);
  Matrix out = rows;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < out.cols(); ++j) r[j] -= mean[j];
  }
  return out;
}

inline Vec l2_normalize(std::span<const double> x) {
  double n = norm(x);
  if (n == 0.0) raise(errc::degenerate_vector, "l2_normalize: zero vector");
  Vec out(x.begin(), x.end());
  for (double& v : out) v /= n;
  return out;
}

inline Vec l2_normalize(const Vec& x) { return l2_normalize(std::span<const double>(x)); }

namespace detail {

inline Matrix calibrate_set(const Matrix& rows, const CalibrationConfig& cfg, bool center_this_set) {
  if (rows.empty()) return rows;
  Matrix out = rows;
  if (cfg.apply_power)
    for (std::size_t i = 0; i < out.rows(); ++i)
      out.set_row(i, power_transform(out.row(i), cfg.beta, cfg.negative_policy));
  if (cfg.apply_center && center_this_set) out = center_set(out);
  if (cfg.apply_l2)
    for (std::size_t i = 0; i < out.rows(); ++i) out.set_row(i, l2_normalize(out.row(i)));
  return out;
}

}  // namespace detail

// Applies the enabled steps in the fixed order power -> center -> l2. Each set
// is centered by its own mean; queries only when center_query_set. With every
// toggle off this is the identity, bit for bit.
inline CalibratedEpisode calibrate_episode(const Episode& ep, const CalibrationConfig& cfg) {
  cfg.validate();
  if (!ep.query.features.empty() && ep.query.features.cols() != ep.support.features.cols())
    raise(errc::shape_error, "support/query dimension mismatch");
  if (!ep.unlabeled.empty() && ep.unlabeled.cols() != ep.support.features.cols())
    raise(errc::shape_error, "support/unlabeled dimension mismatch");

  CalibratedEpisode out;
  out.support_labels = ep.support.labels;
  out.provenance = cfg;
  out.support_features = detail::calibrate_set(ep.support.features, cfg, true);
  out.query_features = detail::calibrate_set(ep.query.features, cfg, cfg.center_query_set);
  out.unlabeled_features = detail::calibrate_set(ep.unlabeled, cfg, cfg.center_unlabeled_set);
  return out;
}

}  // namespace fsl
