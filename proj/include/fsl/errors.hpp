#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fsl {

// Failure categories surfaced at public boundaries. The message carries the
// specifics (offending class id, byte offset, shape, ...).
enum class errc {
  invalid_input,
  degenerate_vector,
  invalid_config,
  negative_feature,
  empty_set,
  missing_class,
  shape_error,
  invalid_layer,
  invalid_label,
  missing_head,
  training_diverged,
  format_error,
  infeasible_episode,
  history_unavailable,
};

constexpr std::string_view errc_name(errc c) noexcept {
  switch (c) {
    case errc::invalid_input: return "InvalidInput";
    case errc::degenerate_vector: return "DegenerateVector";
    case errc::invalid_config: return "InvalidConfig";
    case errc::negative_feature: return "NegativeFeature";
    case errc::empty_set: return "EmptySet";
    case errc::missing_class: return "MissingClass";
    case errc::shape_error: return "ShapeError";
    case errc::invalid_layer: return "InvalidLayer";
    case errc::invalid_label: return "InvalidLabel";
    case errc::missing_head: return "MissingHead";
    case errc::training_diverged: return "TrainingDiverged";
    case errc::format_error: return "FormatError";
    case errc::infeasible_episode: return "InfeasibleEpisode";
    case errc::history_unavailable: return "HistoryUnavailable";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& detail)
      : std::runtime_error(std::string(errc_name(code)) + ": " + detail), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& detail) {
  throw Error(code, detail);
}

}  // namespace fsl
