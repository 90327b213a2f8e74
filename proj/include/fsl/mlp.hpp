#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fsl/dataset.hpp"
#include "fsl/errors.hpp"
#include "fsl/linalg.hpp"
#include "fsl/rng.hpp"

// A small fully-connected embedding network. The body is a chain of
// affine+ReLU blocks ending in the embedding; on top sit a classifier head
// and an optional 4-way rotation head. Layer boundaries are exposed so hidden
// activations can be mixed mid-network.

namespace fsl {

struct MlpConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden = {128, 128, 128};
  std::size_t embed_dim = 64;
  std::size_t n_classes = 0;
  bool rotation_head = false;

  void validate() const {
    if (input_dim == 0) raise(errc::invalid_config, "input_dim must be positive");
    if (embed_dim == 0) raise(errc::invalid_config, "embed_dim must be positive");
    if (n_classes == 0) raise(errc::invalid_config, "n_classes must be positive");
    for (std::size_t h : hidden)
      if (h == 0) raise(errc::invalid_config, "hidden widths must be positive");
  }

  // widths of h^0 .. h^L
  std::vector<std::size_t> layer_dims() const {
    std::vector<std::size_t> dims{input_dim};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(embed_dim);
    return dims;
  }
};

struct Affine {
  Matrix w;  // out x in
  Vec b;

  Vec apply(std::span<const double> x) const {
    if (x.size() != w.cols()) raise(errc::shape_error, "affine input size mismatch");
    Vec out(w.rows());
    for (std::size_t i = 0; i < w.rows(); ++i) out[i] = dot(w.row(i), x) + b[i];
    return out;
  }
};

namespace detail {

inline Affine init_affine(std::size_t out, std::size_t in, double scale, RngStream& rng) {
  Affine a;
  a.w = Matrix(out, in);
  a.b = Vec(out, 0.0);
  for (double& v : a.w.data()) v = scale * rng.next_normal();
  return a;
}

}  // namespace detail

struct MlpModel {
  MlpConfig config;
  std::vector<Affine> blocks;  // block i maps h^i to h^{i+1}
  Affine classifier;           // embed -> n_classes
  Affine rotation;             // embed -> 4, present iff config.rotation_head

  // He-style initialization with a fixed draw order: blocks first, then the
  // classifier, then the rotation head.
  static MlpModel init(const MlpConfig& cfg, RngStream rng) {
    cfg.validate();
    MlpModel m;
    m.config = cfg;
    auto dims = cfg.layer_dims();
    for (std::size_t i = 0; i + 1 < dims.size(); ++i)
      m.blocks.push_back(detail::init_affine(
          dims[i + 1], dims[i], std::sqrt(2.0 / static_cast<double>(dims[i])), rng));
    double head_scale = std::sqrt(1.0 / static_cast<double>(cfg.embed_dim));
    m.classifier = detail::init_affine(cfg.n_classes, cfg.embed_dim, head_scale, rng);
    if (cfg.rotation_head) m.rotation = detail::init_affine(4, cfg.embed_dim, head_scale, rng);
    return m;
  }

  std::size_t n_layers() const { return blocks.size(); }  // L

  // h^l: the input itself at l = 0, the embedding at l = L.
  Vec forward_to_layer(std::span<const double> x, std::size_t l) const {
    if (l > n_layers()) raise(errc::invalid_layer, "layer " + std::to_string(l) + " out of range");
    Vec h(x.begin(), x.end());
    for (std::size_t i = 0; i < l; ++i) {
      h = blocks[i].apply(h);
      for (double& v : h) v = v > 0.0 ? v : 0.0;
    }
    return h;
  }

  Vec forward_from_layer(std::span<const double> h_in, std::size_t l) const {
    if (l > n_layers()) raise(errc::invalid_layer, "layer " + std::to_string(l) + " out of range");
    Vec h(h_in.begin(), h_in.end());
    for (std::size_t i = l; i < n_layers(); ++i) {
      h = blocks[i].apply(h);
      for (double& v : h) v = v > 0.0 ? v : 0.0;
    }
    return h;
  }

  Vec embed(std::span<const double> x) const { return forward_to_layer(x, n_layers()); }

  Vec logits(std::span<const double> x) const { return classifier.apply(embed(x)); }

  Vec rot_logits_from_embed(std::span<const double> e) const {
    if (!config.rotation_head) raise(errc::missing_head, "model has no rotation head");
    return rotation.apply(e);
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const Affine& a : blocks) n += a.w.data().size() + a.b.size();
    n += classifier.w.data().size() + classifier.b.size();
    if (config.rotation_head) n += rotation.w.data().size() + rotation.b.size();
    return n;
  }

  Vec params_flat() const {
    Vec out;
    out.reserve(param_count());
    auto push = [&out](const Affine& a) {
      out.insert(out.end(), a.w.data().begin(), a.w.data().end());
      out.insert(out.end(), a.b.begin(), a.b.end());
    };
    for (const Affine& a : blocks) push(a);
    push(classifier);
    if (config.rotation_head) push(rotation);
    return out;
  }

  void set_params_flat(std::span<const double> flat) {
    if (flat.size() != param_count()) raise(errc::shape_error, "parameter count mismatch");
    std::size_t at = 0;
    auto pull = [&flat, &at](Affine& a) {
      for (double& v : a.w.data()) v = flat[at++];
      for (double& v : a.b) v = flat[at++];
    };
    for (Affine& a : blocks) pull(a);
    pull(classifier);
    if (config.rotation_head) pull(rotation);
  }
};

// Gradient holder mirroring a model's parameter shapes, in the same flat
// order as MlpModel::params_flat.
struct MlpGrads {
  std::vector<Affine> blocks;
  Affine classifier;
  Affine rotation;
  bool has_rotation = false;

  static MlpGrads zeros_like(const MlpModel& m) {
    MlpGrads g;
    for (const Affine& a : m.blocks)
      g.blocks.push_back({Matrix(a.w.rows(), a.w.cols()), Vec(a.b.size(), 0.0)});
    g.classifier = {Matrix(m.classifier.w.rows(), m.classifier.w.cols()),
                    Vec(m.classifier.b.size(), 0.0)};
    if (m.config.rotation_head) {
      g.rotation = {Matrix(m.rotation.w.rows(), m.rotation.w.cols()),
                    Vec(m.rotation.b.size(), 0.0)};
      g.has_rotation = true;
    }
    return g;
  }

  void add_scaled(const MlpGrads& other, double scale) {
    auto add = [scale](Affine& a, const Affine& b) {
      for (std::size_t i = 0; i < a.w.data().size(); ++i) a.w.data()[i] += scale * b.w.data()[i];
      for (std::size_t i = 0; i < a.b.size(); ++i) a.b[i] += scale * b.b[i];
    };
    for (std::size_t i = 0; i < blocks.size(); ++i) add(blocks[i], other.blocks[i]);
    add(classifier, other.classifier);
    if (has_rotation && other.has_rotation) add(rotation, other.rotation);
  }

  void scale(double s) {
    for (Affine& a : blocks) {
      for (double& v : a.w.data()) v *= s;
      for (double& v : a.b) v *= s;
    }
    for (double& v : classifier.w.data()) v *= s;
    for (double& v : classifier.b) v *= s;
    if (has_rotation) {
      for (double& v : rotation.w.data()) v *= s;
      for (double& v : rotation.b) v *= s;
    }
  }

  Vec flat() const {
    Vec out;
    auto push = [&out](const Affine& a) {
      out.insert(out.end(), a.w.data().begin(), a.w.data().end());
      out.insert(out.end(), a.b.begin(), a.b.end());
    };
    for (const Affine& a : blocks) push(a);
    push(classifier);
    if (has_rotation) push(rotation);
    return out;
  }
};

// Checkpoint format: one JSON header line (shapes plus an optional config
// fingerprint), a newline, then all parameters as little-endian 64-bit floats
// in params_flat order.
inline void save_model(const MlpModel& m, const std::string& path,
                       const std::string& fingerprint = "") {
  nlohmann::json header;
  header["format"] = "fsl-mlp";
  header["version"] = 1;
  header["input_dim"] = m.config.input_dim;
  header["hidden"] = m.config.hidden;
  header["embed_dim"] = m.config.embed_dim;
  header["n_classes"] = m.config.n_classes;
  header["rotation_head"] = m.config.rotation_head;
  header["param_count"] = m.param_count();
  header["fingerprint"] = fingerprint;

  std::ofstream out(path, std::ios::binary);
  if (!out) raise(errc::format_error, "cannot open " + path + " for writing");
  out << header.dump() << '\n';
  detail::ByteWriter w(out);
  for (double v : m.params_flat()) w.f64le(v);
  if (!out) raise(errc::format_error, "write failed for " + path);
}

inline MlpModel load_model(const std::string& path, std::string* fingerprint = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(errc::format_error, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) raise(errc::format_error, "missing checkpoint header");

  nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("format", "") != "fsl-mlp" ||
      header.value("version", 0) != 1)
    raise(errc::format_error, "unrecognized checkpoint header");

  MlpConfig cfg;
  try {
    cfg.input_dim = header.at("input_dim").get<std::size_t>();
    cfg.hidden = header.at("hidden").get<std::vector<std::size_t>>();
    cfg.embed_dim = header.at("embed_dim").get<std::size_t>();
    cfg.n_classes = header.at("n_classes").get<std::size_t>();
    cfg.rotation_head = header.at("rotation_head").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    raise(errc::format_error, std::string("bad checkpoint header: ") + e.what());
  }
  cfg.validate();
  if (fingerprint) *fingerprint = header.value("fingerprint", "");

  MlpModel m;
  RngStream dummy = RngStream::from_seed(0);
  m = MlpModel::init(cfg, dummy);
  std::size_t count = header.value("param_count", std::size_t{0});
  if (count != m.param_count())
    raise(errc::format_error, "checkpoint parameter count mismatch");

  Vec flat(count);
  detail::ByteReader r(in);
  for (double& v : flat) v = r.f64le();
  if (!r.at_eof()) raise(errc::format_error, "trailing bytes at offset " +
                                                 std::to_string(line.size() + 1 + r.offset()));
  m.set_params_flat(flat);
  if (!all_finite(flat)) raise(errc::format_error, "non-finite parameters in checkpoint");
  return m;
}

// Runs every row through the model and returns embeddings with the labels
// carried over.
inline FeatureSet embed_dataset(const MlpModel& m, const FeatureSet& set) {
  FeatureSet out;
  out.features = Matrix(set.size(), m.config.embed_dim);
  for (std::size_t i = 0; i < set.size(); ++i) out.features.set_row(i, m.embed(set.features.row(i)));
  out.labels = set.labels;
  out.class_names = set.class_names;
  out.source = set.source + "|embedded";
  return out;
}

}  // namespace fsl
