#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "screekit/image.hpp"

namespace screekit {

inline constexpr int kExgiMin = -510;
inline constexpr int kExgiMax = 510;
inline constexpr int kDefaultExgiThreshold = 20;

/// Per-pixel excess green index 2G - (R + B), row-major.
struct ExgiMap {
  int width = 0;
  int height = 0;
  std::vector<std::int16_t> values;
};

ExgiMap exgi(const RgbImage& image);

inline int exgi_of(std::uint8_t r, std::uint8_t g, std::uint8_t b) { return 2 * g - (r + b); }

struct CoverReport {
  double cover_fraction = 0.0;
  int threshold = kDefaultExgiThreshold;
  std::size_t vegetation_pixels = 0;
  std::size_t total_pixels = 0;
};

/// Vegetation iff ExGI > t (strict). `t` may be one below the index range.
CoverReport cover_fraction(const RgbImage& image, int t = kDefaultExgiThreshold);

/// Binary vegetation mask (1 where ExGI > t).
GrayImage vegetation_mask(const RgbImage& image, int t = kDefaultExgiThreshold);

enum class PixelClass : std::uint8_t { TN = 0, TP = 1, FP = 2, FN = 3 };

struct ConfusionMap {
  int width = 0;
  int height = 0;
  std::vector<PixelClass> classes;
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double estimated_cover = 0.0;
  double manual_cover = 0.0;
  double abs_error_points = 0.0;  // |estimated - manual| in percentage points

  [[nodiscard]] std::size_t total() const { return tp + tn + fp + fn; }
};

/// Estimate (ExGI > t) against a 0/1 mask. Throws on size mismatch or on mask
/// values other than 0 and 1.
ConfusionMap compare_with_mask(const RgbImage& image, int t, const GrayImage& mask);

struct OverlayColors {
  std::array<std::uint8_t, 3> tp{70, 160, 53};    // green
  std::array<std::uint8_t, 3> tn{140, 98, 57};    // brown
  std::array<std::uint8_t, 3> fp{255, 140, 0};    // orange
  std::array<std::uint8_t, 3> fn{0, 200, 220};    // cyan
};

RgbImage render_overlay(const ConfusionMap& map, const OverlayColors& colors = {});

/// Exhaustive search over t in [-510, 510] for the smallest mean absolute
/// cover error; ties go to the smallest |t|, then to the smaller t.
int calibrate_threshold(std::span<const std::pair<RgbImage, GrayImage>> pairs);

/// Mean absolute cover error in percentage points over all pairs for one t.
double mean_cover_error(std::span<const std::pair<RgbImage, GrayImage>> pairs, int t);

}  // namespace screekit
