#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "fsl/errors.hpp"
#include "fsl/linalg.hpp"
#include "fsl/rng.hpp"

// Label-preserving stochastic augmentations for two modalities: raw feature
// vectors and flattened grayscale grids in [0,1]. Every transform draws its
// parameters from the caller's stream in a documented order, and the image
// policies split into an explicit plan (the drawn parameters) plus a pure
// apply step so tests can pin or replay specific draws.

namespace fsl {

struct ImageShape {
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t pixels() const { return height * width; }
  void validate() const {
    if (height == 0 || width == 0) raise(errc::invalid_config, "image shape must be positive");
  }
};

enum class AugmentKind { identity, weak_vector, strong_vector, weak_image, strong_image };

struct AugmentPolicy {
  AugmentKind kind = AugmentKind::identity;
  // vector parameters
  double noise_sigma = 0.05;         // weak additive noise scale
  double strong_noise_sigma = 0.25;  // strong additive noise scale
  double dropout_prob = 0.1;         // strong per-coordinate zeroing
  double scale_jitter = 0.2;         // strong multiplicative jitter half-range
  // image parameters
  ImageShape shape;
  std::size_t crop_padding = 2;
  std::size_t cutout_size = 4;

  void validate() const {
    if (noise_sigma < 0.0 || strong_noise_sigma < 0.0)
      raise(errc::invalid_config, "noise scales must be non-negative");
    if (dropout_prob < 0.0 || dropout_prob >= 1.0)
      raise(errc::invalid_config, "dropout_prob must be in [0,1)");
    if (scale_jitter < 0.0 || scale_jitter >= 1.0)
      raise(errc::invalid_config, "scale_jitter must be in [0,1)");
    if (kind == AugmentKind::weak_image || kind == AugmentKind::strong_image) {
      shape.validate();
      if (cutout_size > std::min(shape.height, shape.width))
        raise(errc::invalid_config, "cutout_size exceeds the image");
    }
  }
};

// ---- image primitives -----------------------------------------------------

inline void check_image(std::span<const double> img, const ImageShape& shape) {
  shape.validate();
  if (img.size() != shape.pixels()) raise(errc::invalid_input, "pixel count mismatch");
}

inline Vec flip_horizontal(std::span<const double> img, const ImageShape& shape) {
  check_image(img, shape);
  Vec out(img.size());
  for (std::size_t r = 0; r < shape.height; ++r)
    for (std::size_t c = 0; c < shape.width; ++c)
      out[r * shape.width + c] = img[r * shape.width + (shape.width - 1 - c)];
  return out;
}

// Zero-pads by `pad` on every side, then takes the original-size window whose
// top-left corner is (dy, dx) in the padded frame; dy, dx in 0..2*pad.
inline Vec crop_with_padding(std::span<const double> img, const ImageShape& shape, std::size_t pad,
                             std::size_t dy, std::size_t dx) {
  check_image(img, shape);
  if (dy > 2 * pad || dx > 2 * pad) raise(errc::invalid_input, "crop offset exceeds padding");
  Vec out(img.size(), 0.0);
  for (std::size_t r = 0; r < shape.height; ++r)
    for (std::size_t c = 0; c < shape.width; ++c) {
      // source position in the unpadded image
      std::ptrdiff_t sr = static_cast<std::ptrdiff_t>(r + dy) - static_cast<std::ptrdiff_t>(pad);
      std::ptrdiff_t sc = static_cast<std::ptrdiff_t>(c + dx) - static_cast<std::ptrdiff_t>(pad);
      if (sr >= 0 && sc >= 0 && sr < static_cast<std::ptrdiff_t>(shape.height) &&
          sc < static_cast<std::ptrdiff_t>(shape.width))
        out[r * shape.width + c] = img[static_cast<std::size_t>(sr) * shape.width +
                                       static_cast<std::size_t>(sc)];
    }
  return out;
}

inline Vec cutout(std::span<const double> img, const ImageShape& shape, std::size_t size,
                  std::size_t top, std::size_t left) {
  check_image(img, shape);
  if (top + size > shape.height || left + size > shape.width)
    raise(errc::invalid_input, "cutout square leaves the image");
  Vec out(img.begin(), img.end());
  for (std::size_t r = top; r < top + size; ++r)
    for (std::size_t c = left; c < left + size; ++c) out[r * shape.width + c] = 0.0;
  return out;
}

// Exact k*90-degree counterclockwise rotation; square images only.
inline Vec rotate90(std::span<const double> img, const ImageShape& shape, std::size_t k) {
  check_image(img, shape);
  if (shape.height != shape.width)
    raise(errc::invalid_input, "quarter rotations need square images");
  std::size_t n = shape.height;
  Vec cur(img.begin(), img.end());
  for (std::size_t turn = 0; turn < k % 4; ++turn) {
    Vec next(cur.size());
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) next[r * n + c] = cur[c * n + (n - 1 - r)];
    cur = std::move(next);
  }
  return cur;
}

namespace detail {

// Nearest-neighbor inverse warp for the small geometric ops. The callable
// maps an output pixel center to its source position; out-of-range sources
// read as zero.
template <typename F>
Vec warp_image(std::span<const double> img, const ImageShape& shape, F&& source_of) {
  Vec out(img.size(), 0.0);
  for (std::size_t r = 0; r < shape.height; ++r)
    for (std::size_t c = 0; c < shape.width; ++c) {
      auto [sr, sc] = source_of(static_cast<double>(r), static_cast<double>(c));
      auto ir = static_cast<std::ptrdiff_t>(std::lround(sr));
      auto ic = static_cast<std::ptrdiff_t>(std::lround(sc));
      if (ir >= 0 && ic >= 0 && ir < static_cast<std::ptrdiff_t>(shape.height) &&
          ic < static_cast<std::ptrdiff_t>(shape.width))
        out[r * shape.width + c] = img[static_cast<std::size_t>(ir) * shape.width +
                                       static_cast<std::size_t>(ic)];
    }
  return out;
}

}  // namespace detail

// ---- strong-image op suite ------------------------------------------------

// The eight ops, indexed for plan storage. Each op draws its own parameters
// from the plan's parameter stream in apply order.
inline constexpr std::size_t kStrongImageOps = 8;
inline constexpr const char* kStrongImageOpNames[kStrongImageOps] = {
    "invert", "quantize", "contrast", "brightness",
    "translate", "rotate_small", "shear", "add_noise"};

inline Vec apply_strong_image_op(std::span<const double> img, const ImageShape& shape,
                                 std::size_t op, RngStream& params) {
  check_image(img, shape);
  Vec x(img.begin(), img.end());
  switch (op) {
    case 0:  // invert
      for (double& v : x) v = 1.0 - v;
      return x;
    case 1: {  // quantize to 2..5 levels
      std::size_t levels = 2 + params.next_below(4);
      double q = static_cast<double>(levels - 1);
      for (double& v : x) v = std::round(v * q) / q;
      return x;
    }
    case 2: {  // contrast about the image mean, factor in [0.5, 1.5]
      double factor = 0.5 + params.next_double();
      double mean = 0.0;
      for (double v : x) mean += v;
      mean /= static_cast<double>(x.size());
      for (double& v : x) v = mean + factor * (v - mean);
      return x;
    }
    case 3: {  // brightness shift in [-0.2, 0.2]
      double shift = 0.4 * params.next_double() - 0.2;
      for (double& v : x) v += shift;
      return x;
    }
    case 4: {  // translate by up to 1/4 of each dimension
      std::size_t max_dy = std::max<std::size_t>(1, shape.height / 4);
      std::size_t max_dx = std::max<std::size_t>(1, shape.width / 4);
      auto dy = static_cast<std::ptrdiff_t>(params.next_below(2 * max_dy + 1)) -
                static_cast<std::ptrdiff_t>(max_dy);
      auto dx = static_cast<std::ptrdiff_t>(params.next_below(2 * max_dx + 1)) -
                static_cast<std::ptrdiff_t>(max_dx);
      return detail::warp_image(x, shape, [dy, dx](double r, double c) {
        return std::pair<double, double>(r - static_cast<double>(dy),
                                         c - static_cast<double>(dx));
      });
    }
    case 5: {  // rotate by an angle in [-15, 15] degrees about the center
      double angle = (30.0 * params.next_double() - 15.0) * 3.14159265358979323846 / 180.0;
      double cy = (static_cast<double>(shape.height) - 1.0) / 2.0;
      double cx = (static_cast<double>(shape.width) - 1.0) / 2.0;
      double cs = std::cos(angle), sn = std::sin(angle);
      return detail::warp_image(x, shape, [=](double r, double c) {
        double dr = r - cy, dc = c - cx;
        return std::pair<double, double>(cy + cs * dr - sn * dc, cx + sn * dr + cs * dc);
      });
    }
    case 6: {  // shear horizontally by a factor in [-0.3, 0.3]
      double s = 0.6 * params.next_double() - 0.3;
      double cy = (static_cast<double>(shape.height) - 1.0) / 2.0;
      return detail::warp_image(x, shape, [=](double r, double c) {
        return std::pair<double, double>(r, c - s * (r - cy));
      });
    }
    case 7:  // additive Gaussian noise
      for (double& v : x) v += 0.1 * params.next_normal();
      return x;
    default:
      raise(errc::invalid_config, "unknown strong image op " + std::to_string(op));
  }
}

// ---- plans ----------------------------------------------------------------

struct WeakImagePlan {
  std::size_t dy = 0;
  std::size_t dx = 0;
  bool flip = false;
};

// Draw order: dy, dx, flip.
inline WeakImagePlan draw_weak_image_plan(RngStream& rng, const AugmentPolicy& policy) {
  WeakImagePlan plan;
  plan.dy = rng.next_below(2 * policy.crop_padding + 1);
  plan.dx = rng.next_below(2 * policy.crop_padding + 1);
  plan.flip = rng.next_double() < 0.5;
  return plan;
}

inline Vec apply_weak_image_plan(std::span<const double> img, const AugmentPolicy& policy,
                                 const WeakImagePlan& plan) {
  Vec out = crop_with_padding(img, policy.shape, policy.crop_padding, plan.dy, plan.dx);
  if (plan.flip) out = flip_horizontal(out, policy.shape);
  return out;
}

struct StrongImagePlan {
  std::size_t op_a = 0;
  std::size_t op_b = 1;      // always different from op_a
  RngStream op_params;       // private stream consumed by the two ops
  std::size_t cutout_top = 0;
  std::size_t cutout_left = 0;
};

// Draw order: first op, second op (from the remaining seven), a seed for the
// op-parameter stream, then the cutout corner.
inline StrongImagePlan draw_strong_image_plan(RngStream& rng, const AugmentPolicy& policy) {
  StrongImagePlan plan;
  plan.op_a = rng.next_below(kStrongImageOps);
  std::size_t second = rng.next_below(kStrongImageOps - 1);
  plan.op_b = second >= plan.op_a ? second + 1 : second;
  plan.op_params = RngStream::from_seed(rng.next_u64());
  plan.cutout_top = rng.next_below(policy.shape.height - policy.cutout_size + 1);
  plan.cutout_left = rng.next_below(policy.shape.width - policy.cutout_size + 1);
  return plan;
}

inline Vec apply_strong_image_plan(std::span<const double> img, const AugmentPolicy& policy,
                                   const StrongImagePlan& plan) {
  RngStream params = plan.op_params;
  Vec x = apply_strong_image_op(img, policy.shape, plan.op_a, params);
  x = apply_strong_image_op(x, policy.shape, plan.op_b, params);
  for (double& v : x) v = std::clamp(v, 0.0, 1.0);
  return cutout(x, policy.shape, policy.cutout_size, plan.cutout_top, plan.cutout_left);
}

// ---- vector policies ------------------------------------------------------

// Draw order: one normal per coordinate.
inline Vec weak_vector_augment(std::span<const double> x, RngStream& rng,
                               const AugmentPolicy& policy) {
  Vec out(x.begin(), x.end());
  for (double& v : out) v += policy.noise_sigma * rng.next_normal();
  return out;
}

// Draw order: scale factor, one normal per coordinate, one uniform per
// coordinate for dropout.
inline Vec strong_vector_augment(std::span<const double> x, RngStream& rng,
                                 const AugmentPolicy& policy) {
  double s = 1.0 + policy.scale_jitter * (2.0 * rng.next_double() - 1.0);
  Vec out(x.begin(), x.end());
  for (double& v : out) v = s * v + policy.strong_noise_sigma * rng.next_normal();
  for (double& v : out)
    if (rng.next_double() < policy.dropout_prob) v = 0.0;
  return out;
}

// ---- dispatch -------------------------------------------------------------

inline Vec augment(std::span<const double> x, RngStream& rng, const AugmentPolicy& policy) {
  policy.validate();
  switch (policy.kind) {
    case AugmentKind::identity:
      return Vec(x.begin(), x.end());
    case AugmentKind::weak_vector:
      return weak_vector_augment(x, rng, policy);
    case AugmentKind::strong_vector:
      return strong_vector_augment(x, rng, policy);
    case AugmentKind::weak_image:
      return apply_weak_image_plan(x, policy, draw_weak_image_plan(rng, policy));
    case AugmentKind::strong_image:
      return apply_strong_image_plan(x, policy, draw_strong_image_plan(rng, policy));
  }
  raise(errc::invalid_config, "unknown augmentation kind");
}

}  // namespace fsl
