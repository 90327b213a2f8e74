#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fsl/config.hpp"
#include "fsl/eval.hpp"
#include "fsl/export.hpp"
#include "fsl/mlp.hpp"
#include "fsl/train.hpp"

// Pipeline glue: dataset resolution, optional embedding training on the base
// split, episodic evaluation on the novel split, ablation grids, and the
// trajectory exporter.

namespace fsl {

// Training derives its streams from a dedicated high tag so they can never
// collide with the per-episode streams evaluate() derives from the same seed.
inline constexpr std::uint64_t kTrainingStreamTag = 1ull << 32;

inline FeatureSet resolve_dataset(const DatasetConfig& d) {
  if (d.is_file()) return load_feature_set(d.path);
  const SyntheticConfig& s = d.synthetic;
  RngStream rng = RngStream::from_seed(s.seed);
  return synth_gaussian_dataset(rng, s.classes, s.per_class, s.dim, s.spread, s.noise,
                                s.relu_clamp);
}

inline bool has_split(const SplitSpec& s) {
  return !(s.base_classes.empty() && s.val_classes.empty() && s.novel_classes.empty());
}

inline FeatureSet base_subset(const RunConfig& cfg, const FeatureSet& data) {
  if (has_split(cfg.split) && !cfg.split.base_classes.empty())
    return data.restricted_to(cfg.split.base_classes);
  return data;
}

inline FeatureSet novel_subset(const RunConfig& cfg, const FeatureSet& data) {
  if (has_split(cfg.split) && !cfg.split.novel_classes.empty())
    return data.restricted_to(cfg.split.novel_classes);
  return data;
}

inline TrainResult train_embedding(const RunConfig& cfg, const FeatureSet& data,
                                   std::uint64_t seed) {
  FeatureSet base = base_subset(cfg, data);
  MlpConfig mcfg = build_mlp_config(cfg.training, base.dim(),
                                    static_cast<std::size_t>(base.num_classes()));
  TrainConfig tcfg = build_train_config(cfg.training);
  RngStream rng = derive_stream(RngStream::from_seed(seed), kTrainingStreamTag);
  return train(mcfg, base, tcfg, rng);
}

inline EvalRequest build_eval_request(const RunConfig& cfg, std::uint64_t seed) {
  EvalRequest req;
  req.episode = cfg.episode;
  req.calibration = cfg.calibration;
  req.inference = cfg.inference;
  req.n_episodes = cfg.eval.n_episodes;
  req.seed = seed;
  req.workers = cfg.eval.workers;
  req.record_per_episode = cfg.eval.record_per_episode;
  req.shift_sigma = cfg.eval.shift_sigma;
  req.fingerprint = config_fingerprint(cfg);
  return req;
}

// One configuration end to end: resolve data, train and embed when training
// is enabled, evaluate episodes on the novel split.
inline EvalReport run_eval(const RunConfig& cfg, std::uint64_t seed) {
  FeatureSet data = resolve_dataset(cfg.dataset);
  if (has_split(cfg.split)) cfg.split.validate(data.num_classes());
  FeatureSet eval_set;
  if (cfg.training.enabled) {
    TrainResult tr = train_embedding(cfg, data, seed);
    eval_set = embed_dataset(tr.model, novel_subset(cfg, data));
  } else {
    eval_set = novel_subset(cfg, data);
  }
  return evaluate(eval_set, build_eval_request(cfg, seed));
}

// -------- ablation grids --------

struct AblationCell {
  std::string name;
  RunConfig config;
};

struct AblationRow {
  std::string name;
  std::string strategy;
  bool ok = false;
  std::string error;
  EvalReport report;
};

inline void apply_train_variant(RunConfig& cfg, const std::string& v) {
  if (v == "none") {
    cfg.training.enabled = false;
    return;
  }
  cfg.training.enabled = true;
  double eta = cfg.training.eta > 0.0 ? cfg.training.eta : 1.0;
  if (v == "ce") {
    cfg.training.eta = 0.0;
    cfg.training.mm_mode = false;
    cfg.training.rotation = false;
  } else if (v == "mm") {
    cfg.training.eta = eta;
    cfg.training.mm_mode = true;
    cfg.training.rotation = false;
  } else if (v == "hct") {
    cfg.training.eta = eta;
    cfg.training.mm_mode = false;
    cfg.training.rotation = false;
  } else if (v == "hct+rot") {
    cfg.training.eta = eta;
    cfg.training.mm_mode = false;
    cfg.training.rotation = true;
  } else {
    raise(errc::invalid_config, "unknown train variant '" + v + "'");
  }
}

inline CalibrationConfig apply_calibration_cell(CalibrationConfig c, const Json& cell) {
  c.beta = detail::num_at(cell, "beta", c.beta);
  c.apply_power = detail::bool_at(cell, "power", c.apply_power);
  c.apply_center = detail::bool_at(cell, "center", c.apply_center);
  c.apply_l2 = detail::bool_at(cell, "l2", c.apply_l2);
  c.center_query_set = detail::bool_at(cell, "center_query", c.center_query_set);
  c.center_unlabeled_set = detail::bool_at(cell, "center_unlabeled", c.center_unlabeled_set);
  c.negative_policy = negative_policy_from(
      detail::str_at(cell, "negative_policy", negative_policy_name(c.negative_policy)));
  return c;
}

// Cross product of the non-empty axes. Each cell carries a standalone config
// (axes cleared) so it is reproducible on its own.
inline std::vector<AblationCell> expand_ablation(const RunConfig& base) {
  const AblationAxes& ax = base.ablation;
  auto axis = [](const auto& values) {
    using T = typename std::decay_t<decltype(values)>::value_type;
    std::vector<std::optional<T>> out;
    if (values.empty()) out.push_back(std::nullopt);
    else
      for (const T& v : values) out.push_back(v);
    return out;
  };

  std::vector<AblationCell> cells;
  char buf[48];
  for (const auto& tv : axis(ax.train_variants))
    for (const auto& st : axis(ax.strategies))
      for (const auto& cal : axis(ax.calibrations))
        for (const auto& al : axis(ax.alphas))
          for (const auto& m : axis(ax.m_values)) {
            RunConfig c = base;
            c.ablation = AblationAxes{};
            std::vector<std::string> parts;
            if (tv) {
              apply_train_variant(c, *tv);
              parts.push_back(*tv);
            }
            if (st) {
              c.inference.strategy = strategy_from(*st);
              parts.push_back(*st);
            }
            if (cal) {
              c.calibration = apply_calibration_cell(c.calibration, *cal);
              parts.push_back(cal->at("name").get<std::string>());
            }
            if (al) {
              c.training.alpha = *al;
              std::snprintf(buf, sizeof buf, "alpha%g", *al);
              parts.push_back(buf);
            }
            if (m) {
              c.episode.m_unlabeled = *m;
              parts.push_back("m" + std::to_string(*m));
            }
            AblationCell cell;
            cell.name = "base";
            if (!parts.empty()) {
              cell.name = parts[0];
              for (std::size_t i = 1; i < parts.size(); ++i) cell.name += "/" + parts[i];
            }
            cell.config = std::move(c);
            cells.push_back(std::move(cell));
          }
  return cells;
}

// Runs every cell; a failing cell records its error and the rest proceed.
// Cells sharing a training variant reuse one trained embedding.
inline std::vector<AblationRow> run_ablation(const RunConfig& base, std::uint64_t seed) {
  std::vector<AblationCell> cells = expand_ablation(base);
  FeatureSet data = resolve_dataset(base.dataset);
  if (has_split(base.split)) base.split.validate(data.num_classes());

  std::map<std::string, FeatureSet> embed_cache;
  std::vector<AblationRow> rows;
  for (const AblationCell& cell : cells) {
    AblationRow row;
    row.name = cell.name;
    row.strategy = strategy_name(cell.config.inference.strategy);
    try {
      FeatureSet eval_set;
      if (cell.config.training.enabled) {
        std::string key = run_config_json(cell.config)["training"].dump();
        auto it = embed_cache.find(key);
        if (it == embed_cache.end()) {
          TrainResult tr = train_embedding(cell.config, data, seed);
          it = embed_cache
                   .emplace(key, embed_dataset(tr.model, novel_subset(cell.config, data)))
                   .first;
        }
        eval_set = it->second;
      } else {
        eval_set = novel_subset(cell.config, data);
      }
      row.report = evaluate(eval_set, build_eval_request(cell.config, seed));
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void save_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(errc::format_error, "cannot open " + path + " for writing");
  out << "name,strategy,ok,n_episodes,mean_accuracy,ci95_halfwidth,error\n";
  char buf[64];
  for (const AblationRow& r : rows) {
    out << r.name << ',' << r.strategy << ',' << (r.ok ? 1 : 0) << ',';
    if (r.ok) {
      out << r.report.n_episodes;
      std::snprintf(buf, sizeof buf, ",%.17g,%.17g", r.report.mean_accuracy,
                    r.report.ci95_halfwidth);
      out << buf << ",\n";
    } else {
      std::string quoted = r.error;
      std::size_t pos = 0;
      while ((pos = quoted.find('"', pos)) != std::string::npos) {
        quoted.insert(pos, 1, '"');
        pos += 2;
      }
      out << "0,,,\"" << quoted << "\"\n";
    }
  }
  if (!out) raise(errc::format_error, "write failed for " + path);
}

// Re-runs one evaluation episode with history retained and writes the
// prototype trajectory next to the calibrated support and query points.
inline void export_episode_trajectory(const RunConfig& cfg, std::uint64_t seed,
                                      std::size_t index, const std::string& path) {
  if (cfg.inference.strategy != Strategy::cipa)
    raise(errc::history_unavailable,
          "only the iterative strategy records prototype history");
  FeatureSet data = resolve_dataset(cfg.dataset);
  if (has_split(cfg.split)) cfg.split.validate(data.num_classes());
  FeatureSet eval_set;
  if (cfg.training.enabled) {
    TrainResult tr = train_embedding(cfg, data, seed);
    eval_set = embed_dataset(tr.model, novel_subset(cfg, data));
  } else {
    eval_set = novel_subset(cfg, data);
  }

  EvalRequest req = build_eval_request(cfg, seed);
  Episode ep = sample_indexed_episode(eval_set, req, index);
  CalibratedEpisode cep = calibrate_episode(ep, req.calibration);
  InferenceConfig icfg = req.inference;
  icfg.keep_history = true;
  InferenceResult res = cipa_infer(cep, icfg);
  export_trajectories(cep, ep.query.labels, res.prototypes, path);
}

}  // namespace fsl
