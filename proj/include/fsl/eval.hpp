#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fsl/calibration.hpp"
#include "fsl/episodes.hpp"
#include "fsl/errors.hpp"
#include "fsl/prototypes.hpp"

// Episodic evaluation. Each episode index owns a derived random stream, so the
// result never depends on how episodes are distributed across workers.

namespace fsl {

struct EvalRequest {
  EpisodeSpec episode;
  CalibrationConfig calibration;
  InferenceConfig inference;
  std::size_t n_episodes = 1000;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool record_per_episode = true;
  double shift_sigma = 0.0;  // per-set mean shift; 0 disables
  std::string fingerprint;   // carried through to the report
};

struct EvalReport {
  std::string strategy;
  std::string config_fingerprint;
  std::size_t n_episodes = 0;
  double mean_accuracy = 0.0;
  double ci95_halfwidth = 0.0;
  std::vector<double> per_episode;
  double wall_time_sec = 0.0;
  std::uint64_t master_seed = 0;
};

// Adds an independent Gaussian offset to every row of each non-empty set,
// simulating a distribution shift between support, query and unlabeled pools.
// Set-wise centering removes exactly this kind of corruption.
inline void apply_set_shift(Episode& ep, RngStream& rng, double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma))
    raise(errc::invalid_config, "shift_sigma must be finite and non-negative");
  if (sigma == 0.0) return;
  auto shift_one = [&](Matrix& rows) {
    if (rows.empty()) return;
    Vec offset(rows.cols());
    for (double& v : offset) v = sigma * rng.next_normal();
    for (std::size_t i = 0; i < rows.rows(); ++i)
      for (std::size_t j = 0; j < rows.cols(); ++j) rows.at(i, j) += offset[j];
  };
  shift_one(ep.support.features);
  shift_one(ep.query.features);
  shift_one(ep.unlabeled);
}

// Centering a one-element set maps its only row to zero, which destroys the
// feature direction. Surfaced as warnings rather than errors.
inline std::vector<std::string> centering_warnings(const EpisodeSpec& spec,
                                                   const CalibrationConfig& cal) {
  std::vector<std::string> out;
  if (!cal.apply_center) return out;
  std::size_t query_total = 0;
  for (std::size_t slot = 0; slot < spec.n_way; ++slot) query_total += spec.query_count(slot);
  if (spec.n_way * spec.k_shot == 1)
    out.push_back("centering a single-example support set collapses it to zero");
  if (cal.center_query_set && query_total == 1)
    out.push_back("centering a single-example query set collapses it to zero");
  if (cal.center_unlabeled_set && spec.n_way * spec.m_unlabeled == 1)
    out.push_back("centering a single-example unlabeled set collapses it to zero");
  return out;
}

// Fraction of rows whose argmax (ties to the lowest class id) matches truth.
inline double score_assignment(const SoftAssignment& assignment, std::span<const int> labels) {
  if (assignment.rows() != labels.size())
    raise(errc::shape_error, "assignment and label counts differ");
  if (labels.empty()) raise(errc::empty_set, "nothing to score");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (argmax_lowest(assignment.row(i)) == static_cast<std::size_t>(labels[i])) ++hits;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

// The episode at a given index, exactly as evaluate() would construct it.
// Also used by the trajectory exporter so a plotted episode matches the
// corresponding evaluation episode bit for bit.
inline Episode sample_indexed_episode(const FeatureSet& set, const EvalRequest& req,
                                      std::size_t index) {
  RngStream ep_rng = derive_stream(RngStream::from_seed(req.seed), index);
  RngStream sample_rng = derive_stream(ep_rng, 0);
  Episode ep = sample_episode(set, req.episode, sample_rng);
  if (req.shift_sigma > 0.0) {
    RngStream shift_rng = derive_stream(ep_rng, 1);
    apply_set_shift(ep, shift_rng, req.shift_sigma);
  }
  return ep;
}

namespace detail {

inline double run_one_episode(const FeatureSet& set, const EvalRequest& req,
                              std::size_t index) {
  Episode ep = sample_indexed_episode(set, req, index);

  // SemiPN is defined on raw features; other strategies use the configured
  // calibration.
  CalibrationConfig cal = req.calibration;
  if (req.inference.strategy == Strategy::semipn) cal = CalibrationConfig::identity();
  CalibratedEpisode cep = calibrate_episode(ep, cal);

  InferenceConfig icfg = req.inference;
  icfg.keep_history = false;  // trajectories are exported by a dedicated path

  SoftAssignment assignment;
  switch (icfg.strategy) {
    case Strategy::protonet: assignment = protonet_infer(cep, icfg); break;
    case Strategy::semipn: assignment = semipn_infer(cep, icfg); break;
    case Strategy::cipa: assignment = cipa_infer(cep, icfg).assignment; break;
  }
  return score_assignment(assignment, ep.query.labels);
}

}  // namespace detail

inline EvalReport evaluate(const FeatureSet& set, const EvalRequest& req) {
  set.validate();
  req.episode.validate();
  req.calibration.validate();
  req.inference.validate();
  if (req.n_episodes == 0) raise(errc::invalid_config, "n_episodes must be positive");

  for (const std::string& w : centering_warnings(req.episode, req.calibration))
    std::fprintf(stderr, "warning: %s\n", w.c_str());

  auto t0 = std::chrono::steady_clock::now();
  std::vector<double> acc(req.n_episodes, 0.0);
  std::vector<std::exception_ptr> errors(req.n_episodes);
  std::atomic<std::size_t> next{0};
  auto body = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= req.n_episodes) return;
      try {
        acc[i] = detail::run_one_episode(set, req, i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  std::size_t workers = std::max<std::size_t>(1, req.workers);
  if (workers == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
    for (std::thread& t : pool) t.join();
  }

  // Report the lowest failing index so the error does not depend on worker
  // scheduling.
  for (std::size_t i = 0; i < req.n_episodes; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      raise(e.code(), "episode " + std::to_string(i) + ": " + e.what());
    } catch (const std::exception& e) {
      throw std::runtime_error("episode " + std::to_string(i) + ": " + e.what());
    }
  }

  EvalReport rep;
  rep.strategy = strategy_name(req.inference.strategy);
  rep.config_fingerprint = req.fingerprint;
  rep.n_episodes = req.n_episodes;
  rep.master_seed = req.seed;

  bool constant = true;
  for (double a : acc)
    if (a != acc.front()) { constant = false; break; }
  if (constant) {
    rep.mean_accuracy = acc.front();  // a constant sample has exactly zero spread
    rep.ci95_halfwidth = 0.0;
  } else {
    double sum = 0.0;
    for (double a : acc) sum += a;
    rep.mean_accuracy = sum / static_cast<double>(acc.size());
    double ss = 0.0;
    for (double a : acc) {
      double d = a - rep.mean_accuracy;
      ss += d * d;
    }
    double sd = std::sqrt(ss / static_cast<double>(acc.size() - 1));
    rep.ci95_halfwidth = 1.96 * sd / std::sqrt(static_cast<double>(acc.size()));
  }
  if (req.record_per_episode) rep.per_episode = std::move(acc);
  rep.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

// Canonical serialization: timing is run metadata, not part of the result, so
// it is excluded unless asked for. This keeps reports byte-identical across
// reruns and worker counts.
inline nlohmann::json report_json(const EvalReport& rep, bool include_timing = false) {
  nlohmann::json j;
  j["strategy"] = rep.strategy;
  j["config_fingerprint"] = rep.config_fingerprint;
  j["n_episodes"] = rep.n_episodes;
  j["mean_accuracy"] = rep.mean_accuracy;
  j["ci95_halfwidth"] = rep.ci95_halfwidth;
  j["master_seed"] = rep.master_seed;
  if (!rep.per_episode.empty()) j["per_episode"] = rep.per_episode;
  if (include_timing) j["wall_time_sec"] = rep.wall_time_sec;
  return j;
}

inline void save_report(const EvalReport& rep, const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(errc::format_error, "cannot open " + path + " for writing");
  out << report_json(rep).dump(2) << "\n";
  if (!out) raise(errc::format_error, "write failed for " + path);
}

}  // namespace fsl
