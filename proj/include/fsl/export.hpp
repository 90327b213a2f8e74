#pragma once

#include <cstdio>
#include <fstream>
#include <span>
#include <string>

#include "fsl/calibration.hpp"
#include "fsl/errors.hpp"
#include "fsl/prototypes.hpp"

// Plot-ready dump of one inference run: the prototype path across iterations
// together with the calibrated support and query points, one CSV row each.
// Rows: kind,iteration,class_id,c0..c{d-1}. Support and query rows use
// iteration -1 and carry their class label; prototype rows run 0..n_iter.

namespace fsl {

namespace detail {

inline void write_traj_row(std::ofstream& out, const char* kind, long iteration, int class_id,
                           std::span<const double> coords) {
  out << kind << ',' << iteration << ',' << class_id;
  char buf[32];
  for (double c : coords) {
    std::snprintf(buf, sizeof buf, ",%.17g", c);
    out << buf;
  }
  out << '\n';
}

}  // namespace detail

inline void export_trajectories(const CalibratedEpisode& ep, std::span<const int> query_labels,
                                const Prototypes& protos, const std::string& path) {
  if (protos.history.empty())
    raise(errc::history_unavailable, "inference ran without history retention");
  if (ep.query_features.rows() != query_labels.size())
    raise(errc::shape_error, "query labels do not match query rows");
  std::size_t d = protos.centers.cols();
  if (ep.support_features.cols() != d || ep.query_features.cols() != d)
    raise(errc::shape_error, "episode and prototype dimensions differ");

  std::ofstream out(path);
  if (!out) raise(errc::format_error, "cannot open " + path + " for writing");
  out << "kind,iteration,class_id";
  for (std::size_t j = 0; j < d; ++j) out << ",c" << j;
  out << '\n';

  for (std::size_t t = 0; t < protos.history.size(); ++t)
    for (std::size_t c = 0; c < protos.history[t].rows(); ++c)
      detail::write_traj_row(out, "prototype", static_cast<long>(t), static_cast<int>(c),
                             protos.history[t].row(c));
  for (std::size_t i = 0; i < ep.support_features.rows(); ++i)
    detail::write_traj_row(out, "support", -1, ep.support_labels[i], ep.support_features.row(i));
  for (std::size_t i = 0; i < ep.query_features.rows(); ++i)
    detail::write_traj_row(out, "query", -1, query_labels[i], ep.query_features.row(i));
  if (!out) raise(errc::format_error, "write failed for " + path);
}

}  // namespace fsl
