#pragma once

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include <json.hpp>

#include "fsl/augment.hpp"
#include "fsl/calibration.hpp"
#include "fsl/dataset.hpp"
#include "fsl/episodes.hpp"
#include "fsl/errors.hpp"
#include "fsl/losses.hpp"
#include "fsl/prototypes.hpp"
#include "fsl/train.hpp"

// JSON run configuration. Parsing is strict: unknown keys are configuration
// errors, counts must be non-negative integers, and enums are spelled-out
// strings. The canonical serialization materializes every field (defaults
// included); its FNV-1a hash is the config fingerprint carried in reports.

namespace fsl {

using Json = nlohmann::json;

// -------- enum spellings --------

inline const char* distance_name(Distance d) {
  return d == Distance::cosine ? "cosine" : "neg_euclidean";
}

inline Distance distance_from(const std::string& s) {
  if (s == "cosine") return Distance::cosine;
  if (s == "neg_euclidean") return Distance::neg_euclidean;
  raise(errc::invalid_config, "unknown distance '" + s + "'");
}

inline const char* infer_mode_name(InferMode m) {
  return m == InferMode::transductive ? "transductive" : "semi_supervised";
}

inline InferMode infer_mode_from(const std::string& s) {
  if (s == "transductive") return InferMode::transductive;
  if (s == "semi_supervised") return InferMode::semi_supervised;
  raise(errc::invalid_config, "unknown mode '" + s + "'");
}

inline Strategy strategy_from(const std::string& s) {
  if (s == "protonet") return Strategy::protonet;
  if (s == "semipn") return Strategy::semipn;
  if (s == "cipa") return Strategy::cipa;
  raise(errc::invalid_config, "unknown strategy '" + s + "'");
}

inline const char* negative_policy_name(NegativePolicy p) {
  return p == NegativePolicy::reject ? "reject" : "signed_power";
}

inline NegativePolicy negative_policy_from(const std::string& s) {
  if (s == "reject") return NegativePolicy::reject;
  if (s == "signed_power") return NegativePolicy::signed_power;
  raise(errc::invalid_config, "unknown negative_policy '" + s + "'");
}

inline const char* augment_kind_name(AugmentKind k) {
  switch (k) {
    case AugmentKind::identity: return "identity";
    case AugmentKind::weak_vector: return "weak_vector";
    case AugmentKind::strong_vector: return "strong_vector";
    case AugmentKind::weak_image: return "weak_image";
    case AugmentKind::strong_image: return "strong_image";
  }
  raise(errc::invalid_config, "unknown augmentation kind");
}

inline AugmentKind augment_kind_from(const std::string& s) {
  for (AugmentKind k : {AugmentKind::identity, AugmentKind::weak_vector,
                        AugmentKind::strong_vector, AugmentKind::weak_image,
                        AugmentKind::strong_image})
    if (s == augment_kind_name(k)) return k;
  raise(errc::invalid_config, "unknown augmentation kind '" + s + "'");
}

// -------- config blocks --------

struct SyntheticConfig {
  std::size_t classes = 10;
  std::size_t per_class = 60;
  std::size_t dim = 16;
  double spread = 3.0;
  double noise = 0.8;
  bool relu_clamp = true;
  std::uint64_t seed = 0;
};

struct DatasetConfig {
  std::string path;           // file-backed when non-empty
  SyntheticConfig synthetic;  // generated when path is empty

  bool is_file() const { return !path.empty(); }
};

struct EvalConfig {
  std::size_t n_episodes = 1000;
  std::size_t workers = 1;
  bool record_per_episode = true;
  double shift_sigma = 0.0;
};

struct TrainingBlock {
  bool enabled = false;
  std::size_t epochs = 60;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::vector<std::size_t> hidden = {128, 128, 128};
  std::size_t embed_dim = 64;
  double eta = 1.0;
  double alpha = 2.0;
  double schedule_fraction = 1.0 / 3.0;
  std::vector<std::size_t> eligible_layers;  // empty means every layer
  bool mm_mode = false;
  bool rotation = false;
  ImageShape image{0, 0};
  std::string weak = "weak_vector";
  std::string strong = "strong_vector";
  double noise_sigma = 0.05;
  double strong_noise_sigma = 0.25;
  double dropout_prob = 0.1;
  double scale_jitter = 0.2;
  std::size_t crop_padding = 2;
  std::size_t cutout_size = 4;
};

struct AblationAxes {
  std::vector<std::string> strategies;
  std::vector<Json> calibrations;  // objects: required "name" plus calibration overrides
  std::vector<double> alphas;
  std::vector<std::size_t> m_values;
  std::vector<std::string> train_variants;  // none | ce | mm | hct | hct+rot

  bool empty() const {
    return strategies.empty() && calibrations.empty() && alphas.empty() && m_values.empty() &&
           train_variants.empty();
  }
};

struct RunConfig {
  DatasetConfig dataset;
  SplitSpec split;  // all groups empty = evaluate the whole set
  EpisodeSpec episode;
  CalibrationConfig calibration;
  InferenceConfig inference;
  EvalConfig eval;
  TrainingBlock training;
  AblationAxes ablation;
};

// -------- strict field access --------

namespace detail {

inline void check_keys(const Json& obj, const char* block,
                       std::initializer_list<const char*> allowed) {
  if (!obj.is_object())
    raise(errc::invalid_config, std::string(block) + " must be a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) { known = true; break; }
    if (!known)
      raise(errc::invalid_config, "unknown key '" + it.key() + "' in " + block);
  }
}

inline double num_at(const Json& obj, const char* key, double def) {
  if (!obj.contains(key)) return def;
  const Json& v = obj.at(key);
  if (!v.is_number()) raise(errc::invalid_config, std::string(key) + " must be a number");
  return v.get<double>();
}

inline std::size_t count_at(const Json& obj, const char* key, std::size_t def) {
  if (!obj.contains(key)) return def;
  const Json& v = obj.at(key);
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<long long>() < 0))
    raise(errc::invalid_config, std::string(key) + " must be a non-negative integer");
  return v.get<std::size_t>();
}

inline std::uint64_t u64_at(const Json& obj, const char* key, std::uint64_t def) {
  if (!obj.contains(key)) return def;
  const Json& v = obj.at(key);
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<long long>() < 0))
    raise(errc::invalid_config, std::string(key) + " must be a non-negative integer");
  return v.get<std::uint64_t>();
}

inline bool bool_at(const Json& obj, const char* key, bool def) {
  if (!obj.contains(key)) return def;
  const Json& v = obj.at(key);
  if (!v.is_boolean()) raise(errc::invalid_config, std::string(key) + " must be a boolean");
  return v.get<bool>();
}

inline std::string str_at(const Json& obj, const char* key, const std::string& def) {
  if (!obj.contains(key)) return def;
  const Json& v = obj.at(key);
  if (!v.is_string()) raise(errc::invalid_config, std::string(key) + " must be a string");
  return v.get<std::string>();
}

inline std::vector<int> int_list_at(const Json& obj, const char* key) {
  std::vector<int> out;
  if (!obj.contains(key)) return out;
  const Json& v = obj.at(key);
  if (!v.is_array()) raise(errc::invalid_config, std::string(key) + " must be an array");
  for (const Json& e : v) {
    if (!e.is_number_integer())
      raise(errc::invalid_config, std::string(key) + " entries must be integers");
    out.push_back(e.get<int>());
  }
  return out;
}

inline std::vector<std::size_t> count_list_at(const Json& obj, const char* key) {
  std::vector<std::size_t> out;
  if (!obj.contains(key)) return out;
  const Json& v = obj.at(key);
  if (!v.is_array()) raise(errc::invalid_config, std::string(key) + " must be an array");
  for (const Json& e : v) {
    if (!e.is_number_integer() || (!e.is_number_unsigned() && e.get<long long>() < 0))
      raise(errc::invalid_config, std::string(key) + " entries must be non-negative integers");
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

inline std::vector<double> num_list_at(const Json& obj, const char* key) {
  std::vector<double> out;
  if (!obj.contains(key)) return out;
  const Json& v = obj.at(key);
  if (!v.is_array()) raise(errc::invalid_config, std::string(key) + " must be an array");
  for (const Json& e : v) {
    if (!e.is_number())
      raise(errc::invalid_config, std::string(key) + " entries must be numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

inline std::vector<std::string> str_list_at(const Json& obj, const char* key) {
  std::vector<std::string> out;
  if (!obj.contains(key)) return out;
  const Json& v = obj.at(key);
  if (!v.is_array()) raise(errc::invalid_config, std::string(key) + " must be an array");
  for (const Json& e : v) {
    if (!e.is_string())
      raise(errc::invalid_config, std::string(key) + " entries must be strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace detail

// -------- block parsers --------

inline SyntheticConfig parse_synthetic(const Json& j) {
  detail::check_keys(j, "dataset.synthetic",
                     {"classes", "per_class", "dim", "spread", "noise", "relu_clamp", "seed"});
  SyntheticConfig s;
  s.classes = detail::count_at(j, "classes", s.classes);
  s.per_class = detail::count_at(j, "per_class", s.per_class);
  s.dim = detail::count_at(j, "dim", s.dim);
  s.spread = detail::num_at(j, "spread", s.spread);
  s.noise = detail::num_at(j, "noise", s.noise);
  s.relu_clamp = detail::bool_at(j, "relu_clamp", s.relu_clamp);
  s.seed = detail::u64_at(j, "seed", s.seed);
  return s;
}

inline DatasetConfig parse_dataset(const Json& j) {
  detail::check_keys(j, "dataset", {"path", "synthetic"});
  if (j.contains("path") == j.contains("synthetic"))
    raise(errc::invalid_config, "dataset needs exactly one of 'path' or 'synthetic'");
  DatasetConfig d;
  if (j.contains("path")) d.path = detail::str_at(j, "path", "");
  else d.synthetic = parse_synthetic(j.at("synthetic"));
  return d;
}

inline SplitSpec parse_split(const Json& j) {
  detail::check_keys(j, "split", {"base_classes", "val_classes", "novel_classes"});
  SplitSpec s;
  s.base_classes = detail::int_list_at(j, "base_classes");
  s.val_classes = detail::int_list_at(j, "val_classes");
  s.novel_classes = detail::int_list_at(j, "novel_classes");
  return s;
}

inline EpisodeSpec parse_episode(const Json& j) {
  detail::check_keys(j, "episode", {"n_way", "k_shot", "q_query", "m_unlabeled", "imbalance"});
  EpisodeSpec e;
  e.n_way = detail::count_at(j, "n_way", e.n_way);
  e.k_shot = detail::count_at(j, "k_shot", e.k_shot);
  e.q_query = detail::count_at(j, "q_query", e.q_query);
  e.m_unlabeled = detail::count_at(j, "m_unlabeled", e.m_unlabeled);
  e.imbalance = detail::count_list_at(j, "imbalance");
  return e;
}

inline CalibrationConfig parse_calibration(const Json& j) {
  detail::check_keys(j, "calibration", {"beta", "power", "center", "l2", "center_query",
                                        "center_unlabeled", "negative_policy"});
  CalibrationConfig c;
  c.beta = detail::num_at(j, "beta", c.beta);
  c.apply_power = detail::bool_at(j, "power", c.apply_power);
  c.apply_center = detail::bool_at(j, "center", c.apply_center);
  c.apply_l2 = detail::bool_at(j, "l2", c.apply_l2);
  c.center_query_set = detail::bool_at(j, "center_query", c.center_query_set);
  c.center_unlabeled_set = detail::bool_at(j, "center_unlabeled", c.center_unlabeled_set);
  c.negative_policy =
      negative_policy_from(detail::str_at(j, "negative_policy", negative_policy_name(c.negative_policy)));
  return c;
}

inline InferenceConfig parse_inference(const Json& j) {
  detail::check_keys(j, "inference",
                     {"tau", "sigma", "n_iter", "distance", "mode", "strategy", "keep_history"});
  InferenceConfig c;
  c.tau = detail::num_at(j, "tau", c.tau);
  c.sigma = detail::num_at(j, "sigma", c.sigma);
  c.n_iter = detail::count_at(j, "n_iter", c.n_iter);
  c.distance = distance_from(detail::str_at(j, "distance", distance_name(c.distance)));
  c.mode = infer_mode_from(detail::str_at(j, "mode", infer_mode_name(c.mode)));
  c.strategy = strategy_from(detail::str_at(j, "strategy", strategy_name(c.strategy)));
  c.keep_history = detail::bool_at(j, "keep_history", c.keep_history);
  return c;
}

inline EvalConfig parse_eval(const Json& j) {
  detail::check_keys(j, "eval", {"n_episodes", "workers", "record_per_episode", "shift_sigma"});
  EvalConfig e;
  e.n_episodes = detail::count_at(j, "n_episodes", e.n_episodes);
  e.workers = detail::count_at(j, "workers", e.workers);
  e.record_per_episode = detail::bool_at(j, "record_per_episode", e.record_per_episode);
  e.shift_sigma = detail::num_at(j, "shift_sigma", e.shift_sigma);
  return e;
}

inline TrainingBlock parse_training(const Json& j) {
  detail::check_keys(j, "training",
                     {"enabled", "epochs", "batch_size", "lr", "hidden", "embed_dim", "eta",
                      "alpha", "schedule_fraction", "eligible_layers", "mm_mode", "rotation",
                      "image", "weak", "strong", "noise_sigma", "strong_noise_sigma",
                      "dropout_prob", "scale_jitter", "crop_padding", "cutout_size"});
  TrainingBlock t;
  t.enabled = detail::bool_at(j, "enabled", t.enabled);
  t.epochs = detail::count_at(j, "epochs", t.epochs);
  t.batch_size = detail::count_at(j, "batch_size", t.batch_size);
  t.lr = detail::num_at(j, "lr", t.lr);
  if (j.contains("hidden")) t.hidden = detail::count_list_at(j, "hidden");
  t.embed_dim = detail::count_at(j, "embed_dim", t.embed_dim);
  t.eta = detail::num_at(j, "eta", t.eta);
  t.alpha = detail::num_at(j, "alpha", t.alpha);
  t.schedule_fraction = detail::num_at(j, "schedule_fraction", t.schedule_fraction);
  t.eligible_layers = detail::count_list_at(j, "eligible_layers");
  t.mm_mode = detail::bool_at(j, "mm_mode", t.mm_mode);
  t.rotation = detail::bool_at(j, "rotation", t.rotation);
  if (j.contains("image")) {
    const Json& im = j.at("image");
    detail::check_keys(im, "training.image", {"height", "width"});
    t.image.height = detail::count_at(im, "height", 0);
    t.image.width = detail::count_at(im, "width", 0);
  }
  t.weak = detail::str_at(j, "weak", t.weak);
  t.strong = detail::str_at(j, "strong", t.strong);
  augment_kind_from(t.weak);    // spelling check at parse time
  augment_kind_from(t.strong);
  t.noise_sigma = detail::num_at(j, "noise_sigma", t.noise_sigma);
  t.strong_noise_sigma = detail::num_at(j, "strong_noise_sigma", t.strong_noise_sigma);
  t.dropout_prob = detail::num_at(j, "dropout_prob", t.dropout_prob);
  t.scale_jitter = detail::num_at(j, "scale_jitter", t.scale_jitter);
  t.crop_padding = detail::count_at(j, "crop_padding", t.crop_padding);
  t.cutout_size = detail::count_at(j, "cutout_size", t.cutout_size);
  return t;
}

inline AblationAxes parse_ablation(const Json& j) {
  detail::check_keys(j, "ablation",
                     {"strategies", "calibrations", "alphas", "m_values", "train_variants"});
  AblationAxes a;
  a.strategies = detail::str_list_at(j, "strategies");
  for (const std::string& s : a.strategies) strategy_from(s);
  if (j.contains("calibrations")) {
    const Json& v = j.at("calibrations");
    if (!v.is_array()) raise(errc::invalid_config, "calibrations must be an array");
    for (const Json& cell : v) {
      detail::check_keys(cell, "ablation.calibrations[]",
                         {"name", "beta", "power", "center", "l2", "center_query",
                          "center_unlabeled", "negative_policy"});
      if (!cell.contains("name"))
        raise(errc::invalid_config, "each calibration cell needs a name");
      a.calibrations.push_back(cell);
    }
  }
  a.alphas = detail::num_list_at(j, "alphas");
  a.m_values = detail::count_list_at(j, "m_values");
  a.train_variants = detail::str_list_at(j, "train_variants");
  for (const std::string& v : a.train_variants)
    if (v != "none" && v != "ce" && v != "mm" && v != "hct" && v != "hct+rot")
      raise(errc::invalid_config, "unknown train variant '" + v + "'");
  return a;
}

inline RunConfig parse_run_config(const Json& j) {
  try {
    detail::check_keys(j, "run config", {"dataset", "split", "episode", "calibration",
                                         "inference", "eval", "training", "ablation"});
    RunConfig cfg;
    if (j.contains("dataset")) cfg.dataset = parse_dataset(j.at("dataset"));
    if (j.contains("split")) cfg.split = parse_split(j.at("split"));
    if (j.contains("episode")) cfg.episode = parse_episode(j.at("episode"));
    if (j.contains("calibration")) cfg.calibration = parse_calibration(j.at("calibration"));
    if (j.contains("inference")) cfg.inference = parse_inference(j.at("inference"));
    if (j.contains("eval")) cfg.eval = parse_eval(j.at("eval"));
    if (j.contains("training")) cfg.training = parse_training(j.at("training"));
    if (j.contains("ablation")) cfg.ablation = parse_ablation(j.at("ablation"));
    return cfg;
  } catch (const Json::exception& e) {
    raise(errc::invalid_config, std::string("malformed run config: ") + e.what());
  }
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(errc::invalid_config, "cannot open config file " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    raise(errc::invalid_config, path + ": " + e.what());
  }
  return parse_run_config(j);
}

// -------- canonical serialization and fingerprint --------

inline Json synthetic_json(const SyntheticConfig& s) {
  return Json{{"classes", s.classes},   {"per_class", s.per_class}, {"dim", s.dim},
              {"spread", s.spread},     {"noise", s.noise},         {"relu_clamp", s.relu_clamp},
              {"seed", s.seed}};
}

inline Json run_config_json(const RunConfig& cfg) {
  Json j;
  if (cfg.dataset.is_file()) j["dataset"] = Json{{"path", cfg.dataset.path}};
  else j["dataset"] = Json{{"synthetic", synthetic_json(cfg.dataset.synthetic)}};

  j["split"] = Json{{"base_classes", cfg.split.base_classes},
                    {"val_classes", cfg.split.val_classes},
                    {"novel_classes", cfg.split.novel_classes}};
  j["episode"] = Json{{"n_way", cfg.episode.n_way},
                      {"k_shot", cfg.episode.k_shot},
                      {"q_query", cfg.episode.q_query},
                      {"m_unlabeled", cfg.episode.m_unlabeled},
                      {"imbalance", cfg.episode.imbalance}};
  j["calibration"] = Json{{"beta", cfg.calibration.beta},
                          {"power", cfg.calibration.apply_power},
                          {"center", cfg.calibration.apply_center},
                          {"l2", cfg.calibration.apply_l2},
                          {"center_query", cfg.calibration.center_query_set},
                          {"center_unlabeled", cfg.calibration.center_unlabeled_set},
                          {"negative_policy", negative_policy_name(cfg.calibration.negative_policy)}};
  j["inference"] = Json{{"tau", cfg.inference.tau},
                        {"sigma", cfg.inference.sigma},
                        {"n_iter", cfg.inference.n_iter},
                        {"distance", distance_name(cfg.inference.distance)},
                        {"mode", infer_mode_name(cfg.inference.mode)},
                        {"strategy", strategy_name(cfg.inference.strategy)},
                        {"keep_history", cfg.inference.keep_history}};
  j["eval"] = Json{{"n_episodes", cfg.eval.n_episodes},
                   {"workers", cfg.eval.workers},
                   {"record_per_episode", cfg.eval.record_per_episode},
                   {"shift_sigma", cfg.eval.shift_sigma}};
  j["training"] = Json{{"enabled", cfg.training.enabled},
                       {"epochs", cfg.training.epochs},
                       {"batch_size", cfg.training.batch_size},
                       {"lr", cfg.training.lr},
                       {"hidden", cfg.training.hidden},
                       {"embed_dim", cfg.training.embed_dim},
                       {"eta", cfg.training.eta},
                       {"alpha", cfg.training.alpha},
                       {"schedule_fraction", cfg.training.schedule_fraction},
                       {"eligible_layers", cfg.training.eligible_layers},
                       {"mm_mode", cfg.training.mm_mode},
                       {"rotation", cfg.training.rotation},
                       {"image", Json{{"height", cfg.training.image.height},
                                      {"width", cfg.training.image.width}}},
                       {"weak", cfg.training.weak},
                       {"strong", cfg.training.strong},
                       {"noise_sigma", cfg.training.noise_sigma},
                       {"strong_noise_sigma", cfg.training.strong_noise_sigma},
                       {"dropout_prob", cfg.training.dropout_prob},
                       {"scale_jitter", cfg.training.scale_jitter},
                       {"crop_padding", cfg.training.crop_padding},
                       {"cutout_size", cfg.training.cutout_size}};
  j["ablation"] = Json{{"strategies", cfg.ablation.strategies},
                       {"calibrations", cfg.ablation.calibrations},
                       {"alphas", cfg.ablation.alphas},
                       {"m_values", cfg.ablation.m_values},
                       {"train_variants", cfg.ablation.train_variants}};
  return j;
}

inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string config_fingerprint(const RunConfig& cfg) {
  return fnv1a_hex(run_config_json(cfg).dump());
}

// -------- mapping onto library configs --------

inline AugmentPolicy build_augment_policy(const TrainingBlock& t, const std::string& kind) {
  AugmentPolicy p;
  p.kind = augment_kind_from(kind);
  p.noise_sigma = t.noise_sigma;
  p.strong_noise_sigma = t.strong_noise_sigma;
  p.dropout_prob = t.dropout_prob;
  p.scale_jitter = t.scale_jitter;
  p.shape = t.image;
  p.crop_padding = t.crop_padding;
  p.cutout_size = t.cutout_size;
  return p;
}

inline MlpConfig build_mlp_config(const TrainingBlock& t, std::size_t input_dim,
                                  std::size_t n_classes) {
  MlpConfig m;
  m.input_dim = input_dim;
  m.hidden = t.hidden;
  m.embed_dim = t.embed_dim;
  m.n_classes = n_classes;
  m.rotation_head = t.rotation;
  return m;
}

inline TrainConfig build_train_config(const TrainingBlock& t) {
  TrainConfig c;
  c.epochs = t.epochs;
  c.batch_size = t.batch_size;
  c.lr = t.lr;
  c.hct.eta = t.eta;
  c.hct.alpha = t.alpha;
  c.hct.schedule_fraction = t.schedule_fraction;
  c.hct.eligible_layers = t.eligible_layers;
  c.hct.mm_mode = t.mm_mode;
  c.hct.weak_aug = build_augment_policy(t, t.weak);
  c.hct.strong_aug = build_augment_policy(t, t.strong);
  c.rotation = t.rotation;
  c.image = t.image;
  return c;
}

}  // namespace fsl
