#pragma once

// Straight-line reference implementation of calibrated iterative prototype
// adaptation. Written with plain nested loops over vector-of-vector rows and
// no code shared with the library, so tests can compare the two independently.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

using Row = std::vector<double>;
using Rows = std::vector<Row>;

struct Config {
  double beta = 0.5;
  bool power = true;
  bool center = true;
  bool l2 = true;
  bool center_queries = true;
  bool center_unlabeled = true;
  bool signed_power = false;
  double tau = 15.0;
  double sigma = 0.2;
  std::size_t n_iter = 20;
  bool cosine = true;
  bool pool_is_unlabeled = false;  // false: transductive (pool = queries)
};

struct EpisodeRows {
  Rows support;
  std::vector<int> labels;
  Rows query;
  Rows unlabeled;
};

inline void power_rows(Rows& rows, double beta, bool signed_pow) {
  for (auto& r : rows) {
    double ss = 0.0;
    for (auto& v : r) {
      if (signed_pow && v < 0.0)
        v = -std::pow(-v, beta);
      else
        v = std::pow(v, beta);
      ss += v * v;
    }
    double n = std::sqrt(ss);
    for (auto& v : r) v /= n;
  }
}

inline void center_rows(Rows& rows) {
  if (rows.empty()) return;
  std::size_t d = rows[0].size();
  Row mean(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
  for (auto& v : mean) v /= static_cast<double>(rows.size());
  for (auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) r[j] -= mean[j];
}

inline void l2_rows(Rows& rows) {
  for (auto& r : rows) {
    double ss = 0.0;
    for (double v : r) ss += v * v;
    double n = std::sqrt(ss);
    for (auto& v : r) v /= n;
  }
}

inline double similarity(const Row& a, const Row& b, bool cosine) {
  if (cosine) {
    double d = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
      d += a[j] * b[j];
      na += a[j] * a[j];
      nb += b[j] * b[j];
    }
    return d / (std::sqrt(na) * std::sqrt(nb));
  }
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    double diff = a[j] - b[j];
    s += diff * diff;
  }
  return -s;
}

inline Row softmax_row(const Row& logits) {
  double m = logits[0];
  for (double v : logits) m = v > m ? v : m;
  Row out(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    s += out[i];
  }
  for (auto& v : out) v /= s;
  return out;
}

inline Rows predict(const Rows& feats, const Rows& protos, double tau, bool cosine) {
  Rows out;
  for (const auto& x : feats) {
    Row logits(protos.size());
    for (std::size_t c = 0; c < protos.size(); ++c)
      logits[c] = tau * similarity(x, protos[c], cosine);
    out.push_back(softmax_row(logits));
  }
  return out;
}

// Full pipeline on a raw episode: calibration, iterated soft k-means with
// momentum, then query predictions against the final prototypes.
inline Rows run(EpisodeRows ep, const Config& cfg) {
  if (cfg.power) {
    power_rows(ep.support, cfg.beta, cfg.signed_power);
    power_rows(ep.query, cfg.beta, cfg.signed_power);
    power_rows(ep.unlabeled, cfg.beta, cfg.signed_power);
  }
  if (cfg.center) {
    center_rows(ep.support);
    if (cfg.center_queries) center_rows(ep.query);
    if (cfg.center_unlabeled) center_rows(ep.unlabeled);
  }
  if (cfg.l2) {
    l2_rows(ep.support);
    l2_rows(ep.query);
    l2_rows(ep.unlabeled);
  }

  int n_classes = 0;
  for (int y : ep.labels) n_classes = y + 1 > n_classes ? y + 1 : n_classes;
  std::size_t nc = static_cast<std::size_t>(n_classes);
  std::size_t d = ep.support[0].size();

  Rows protos(nc, Row(d, 0.0));
  std::vector<double> counts(nc, 0.0);
  for (std::size_t i = 0; i < ep.support.size(); ++i) {
    auto c = static_cast<std::size_t>(ep.labels[i]);
    for (std::size_t j = 0; j < d; ++j) protos[c][j] += ep.support[i][j];
    counts[c] += 1.0;
  }
  for (std::size_t c = 0; c < nc; ++c)
    for (auto& v : protos[c]) v /= counts[c];

  const Rows& pool = cfg.pool_is_unlabeled ? ep.unlabeled : ep.query;
  for (std::size_t t = 0; t < cfg.n_iter; ++t) {
    Rows probs = predict(pool, protos, cfg.tau, cfg.cosine);
    Rows fresh(nc, Row(d, 0.0));
    std::vector<double> denom(nc, 0.0);
    for (std::size_t i = 0; i < ep.support.size(); ++i) {
      auto c = static_cast<std::size_t>(ep.labels[i]);
      for (std::size_t j = 0; j < d; ++j) fresh[c][j] += ep.support[i][j];
      denom[c] += 1.0;
    }
    for (std::size_t k = 0; k < pool.size(); ++k)
      for (std::size_t c = 0; c < nc; ++c) {
        for (std::size_t j = 0; j < d; ++j) fresh[c][j] += probs[k][c] * pool[k][j];
        denom[c] += probs[k][c];
      }
    for (std::size_t c = 0; c < nc; ++c)
      for (std::size_t j = 0; j < d; ++j)
        protos[c][j] = cfg.sigma * (fresh[c][j] / denom[c]) + (1.0 - cfg.sigma) * protos[c][j];
  }

  return predict(ep.query, protos, cfg.tau, cfg.cosine);
}

}  // namespace oracle
