#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "fsl/dataset.hpp"
#include "fsl/errors.hpp"
#include "fsl/linalg.hpp"
#include "fsl/rng.hpp"

namespace fsl {

// One N-way K-shot task specification.
struct EpisodeSpec {
  std::size_t n_way = 5;
  std::size_t k_shot = 1;
  std::size_t q_query = 15;      // per-class query count
  std::size_t m_unlabeled = 0;   // per-class auxiliary count; 0 = transductive
  std::vector<std::size_t> imbalance;  // optional explicit per-class query counts

  std::size_t query_count(std::size_t class_slot) const {
    return imbalance.empty() ? q_query : imbalance[class_slot];
  }

  void validate() const {
    if (n_way < 2) raise(errc::invalid_config, "n_way must be at least 2");
    if (k_shot < 1) raise(errc::invalid_config, "k_shot must be at least 1");
    if (!imbalance.empty() && imbalance.size() != n_way)
      raise(errc::invalid_config, "imbalance must list one query count per class");
  }
};

struct LabeledSet {
  Matrix features;
  std::vector<int> labels;  // episode-local ids 0..N-1
};

// A sampled task. Unlabeled ground truth is withheld from inference but kept
// for scoring pseudo-label quality in semi-supervised experiments.
struct Episode {
  LabeledSet support;
  LabeledSet query;
  Matrix unlabeled;
  std::vector<int> unlabeled_truth;
};

// Draws N classes uniformly without replacement, then per class K support,
// Q query and M unlabeled examples without replacement. Deterministic given
// the stream value; the harness derives one stream per episode index.
inline Episode sample_episode(const FeatureSet& set, const EpisodeSpec& spec, RngStream& rng) {
  spec.validate();
  int total_classes = set.num_classes();
  if (static_cast<std::size_t>(total_classes) < spec.n_way)
    raise(errc::infeasible_episode,
          "need " + std::to_string(spec.n_way) + " classes, dataset has " +
              std::to_string(total_classes));

  // example indices per class
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(total_classes));
  for (std::size_t i = 0; i < set.size(); ++i)
    by_class[static_cast<std::size_t>(set.labels[i])].push_back(i);

  std::vector<std::size_t> classes =
      sample_indices(rng, static_cast<std::size_t>(total_classes), spec.n_way);

  Episode ep;
  for (std::size_t slot = 0; slot < spec.n_way; ++slot) {
    std::size_t cls = classes[slot];
    std::size_t need = spec.k_shot + spec.query_count(slot) + spec.m_unlabeled;
    const auto& pool = by_class[cls];
    if (pool.size() < need)
      raise(errc::infeasible_episode,
            "class " + std::to_string(cls) + " has " + std::to_string(pool.size()) +
                " examples, episode needs " + std::to_string(need));
    std::vector<std::size_t> picks = sample_indices(rng, pool.size(), need);
    std::size_t at = 0;
    for (std::size_t k = 0; k < spec.k_shot; ++k) {
      ep.support.features.append_row(set.features.row(pool[picks[at++]]));
      ep.support.labels.push_back(static_cast<int>(slot));
    }
    for (std::size_t q = 0; q < spec.query_count(slot); ++q) {
      ep.query.features.append_row(set.features.row(pool[picks[at++]]));
      ep.query.labels.push_back(static_cast<int>(slot));
    }
    for (std::size_t m = 0; m < spec.m_unlabeled; ++m) {
      ep.unlabeled.append_row(set.features.row(pool[picks[at++]]));
      ep.unlabeled_truth.push_back(static_cast<int>(slot));
    }
  }
  return ep;
}

// Gaussian clusters: class means drawn uniformly on the sphere of radius
// `spread`, examples = mean + noise * N(0, I). relu_clamp keeps features
// non-negative so the power transform's Reject policy applies.
inline FeatureSet synth_gaussian_dataset(RngStream& rng, std::size_t n_classes,
                                         std::size_t per_class, std::size_t dim, double spread,
                                         double noise, bool relu_clamp = false) {
  if (n_classes < 2) raise(errc::invalid_config, "need at least 2 classes");
  if (per_class < 1) raise(errc::invalid_config, "need at least 1 example per class");
  if (dim < 1) raise(errc::invalid_config, "dimension must be positive");
  if (!(spread >= 0.0) || !std::isfinite(spread))
    raise(errc::invalid_config, "spread must be non-negative");
  if (!(noise >= 0.0) || !std::isfinite(noise))
    raise(errc::invalid_config, "noise must be non-negative");

  FeatureSet set;
  set.source = "synth(C=" + std::to_string(n_classes) + ",per=" + std::to_string(per_class) +
               ",d=" + std::to_string(dim) + ",spread=" + std::to_string(spread) +
               ",noise=" + std::to_string(noise) + ",relu=" + std::to_string(relu_clamp) + ")";
  set.features = Matrix(n_classes * per_class, dim);

  std::size_t row = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    Vec mean(dim);
    double n2 = 0.0;
    do {
      for (double& x : mean) x = rng.next_normal();
      n2 = squared_norm(mean);
    } while (n2 == 0.0);
    double scale = spread / std::sqrt(n2);
    for (double& x : mean) x *= scale;

    for (std::size_t i = 0; i < per_class; ++i, ++row) {
      auto out = set.features.row(row);
      for (std::size_t j = 0; j < dim; ++j) {
        double v = mean[j] + noise * rng.next_normal();
        out[j] = relu_clamp ? std::max(0.0, v) : v;
      }
      set.labels.push_back(static_cast<int>(c));
    }
  }
  return set;
}

}  // namespace fsl
