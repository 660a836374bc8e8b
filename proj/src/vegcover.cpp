#include "screekit/vegcover.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#include "screekit/error.hpp"

namespace screekit {

namespace {

constexpr int kBins = kExgiMax - kExgiMin + 1;

void check_threshold(int t) {
  if (t < kExgiMin - 1 || t > kExgiMax) {
    fail(ErrorKind::usage, "ExGI threshold must lie in [" + std::to_string(kExgiMin - 1) + ", " +
                               std::to_string(kExgiMax) + "]");
  }
}

void check_mask(const RgbImage& image, const GrayImage& mask) {
  if (mask.width != image.width || mask.height != image.height) {
    fail(ErrorKind::usage, "mask is " + std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                               " but image is " + std::to_string(image.width) + "x" + std::to_string(image.height));
  }
  for (std::uint8_t v : mask.data) {
    if (v > 1) fail(ErrorKind::usage, "mask is not binary (values must be 0 or 1)");
  }
}

// Histogram of ExGI values, index = value - kExgiMin.
std::vector<std::size_t> histogram(const RgbImage& image, const GrayImage* mask_filter) {
  std::vector<std::size_t> h(kBins, 0);
  const std::size_t n = image.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    if (mask_filter && mask_filter->data[i] == 0) continue;
    const int e = exgi_of(image.data[3 * i], image.data[3 * i + 1], image.data[3 * i + 2]);
    ++h[static_cast<std::size_t>(e - kExgiMin)];
  }
  return h;
}

// above[k] = number of pixels with ExGI > (k + kExgiMin - 1), k in [0, kBins].
std::vector<std::size_t> counts_above(const std::vector<std::size_t>& hist) {
  std::vector<std::size_t> above(kBins + 1, 0);
  for (int k = kBins - 1; k >= 0; --k) above[static_cast<std::size_t>(k)] = above[static_cast<std::size_t>(k) + 1] + hist[static_cast<std::size_t>(k)];
  return above;
}

}  // namespace

ExgiMap exgi(const RgbImage& image) {
  image.validate();
  ExgiMap map{image.width, image.height, {}};
  const std::size_t n = image.pixel_count();
  map.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    map.values[i] = static_cast<std::int16_t>(exgi_of(image.data[3 * i], image.data[3 * i + 1], image.data[3 * i + 2]));
  }
  return map;
}

CoverReport cover_fraction(const RgbImage& image, int t) {
  image.validate();
  check_threshold(t);
  CoverReport r;
  r.threshold = t;
  r.total_pixels = image.pixel_count();
  for (std::size_t i = 0; i < r.total_pixels; ++i) {
    if (exgi_of(image.data[3 * i], image.data[3 * i + 1], image.data[3 * i + 2]) > t) ++r.vegetation_pixels;
  }
  r.cover_fraction = static_cast<double>(r.vegetation_pixels) / static_cast<double>(r.total_pixels);
  return r;
}

GrayImage vegetation_mask(const RgbImage& image, int t) {
  image.validate();
  check_threshold(t);
  GrayImage mask(image.width, image.height);
  for (std::size_t i = 0; i < mask.pixel_count(); ++i) {
    mask.data[i] = exgi_of(image.data[3 * i], image.data[3 * i + 1], image.data[3 * i + 2]) > t ? 1 : 0;
  }
  return mask;
}

ConfusionMap compare_with_mask(const RgbImage& image, int t, const GrayImage& mask) {
  image.validate();
  check_threshold(t);
  check_mask(image, mask);
  ConfusionMap map;
  map.width = image.width;
  map.height = image.height;
  const std::size_t n = image.pixel_count();
  map.classes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool est = exgi_of(image.data[3 * i], image.data[3 * i + 1], image.data[3 * i + 2]) > t;
    const bool truth = mask.data[i] != 0;
    PixelClass c;
    if (est && truth) {
      c = PixelClass::TP;
      ++map.tp;
    } else if (!est && !truth) {
      c = PixelClass::TN;
      ++map.tn;
    } else if (est) {
      c = PixelClass::FP;
      ++map.fp;
    } else {
      c = PixelClass::FN;
      ++map.fn;
    }
    map.classes[i] = c;
  }
  const double total = static_cast<double>(n);
  map.estimated_cover = static_cast<double>(map.tp + map.fp) / total;
  map.manual_cover = static_cast<double>(map.tp + map.fn) / total;
  map.abs_error_points = 100.0 * std::abs(map.estimated_cover - map.manual_cover);
  return map;
}

RgbImage render_overlay(const ConfusionMap& map, const OverlayColors& colors) {
  RgbImage out(map.width, map.height);
  for (std::size_t i = 0; i < map.classes.size(); ++i) {
    const std::array<std::uint8_t, 3>* c = nullptr;
    switch (map.classes[i]) {
      case PixelClass::TP: c = &colors.tp; break;
      case PixelClass::TN: c = &colors.tn; break;
      case PixelClass::FP: c = &colors.fp; break;
      case PixelClass::FN: c = &colors.fn; break;
    }
    out.data[3 * i] = (*c)[0];
    out.data[3 * i + 1] = (*c)[1];
    out.data[3 * i + 2] = (*c)[2];
  }
  return out;
}

double mean_cover_error(std::span<const std::pair<RgbImage, GrayImage>> pairs, int t) {
  if (pairs.empty()) fail(ErrorKind::usage, "no image/mask pairs given");
  double sum = 0.0;
  for (const auto& [image, mask] : pairs) sum += compare_with_mask(image, t, mask).abs_error_points;
  return sum / static_cast<double>(pairs.size());
}

int calibrate_threshold(std::span<const std::pair<RgbImage, GrayImage>> pairs) {
  if (pairs.empty()) fail(ErrorKind::usage, "threshold calibration needs at least one image/mask pair");

  // Per pair: counts of pixels above each candidate threshold, and the manual count.
  std::vector<std::vector<std::size_t>> above;
  std::vector<std::size_t> manual;
  std::vector<double> totals;
  for (const auto& [image, mask] : pairs) {
    image.validate();
    check_mask(image, mask);
    above.push_back(counts_above(histogram(image, nullptr)));
    std::size_t m = 0;
    for (std::uint8_t v : mask.data) m += v;
    manual.push_back(m);
    totals.push_back(static_cast<double>(image.pixel_count()));
  }

  int best_t = 0;
  double best_err = INFINITY;
  for (int t = kExgiMin; t <= kExgiMax; ++t) {
    // pixels with ExGI > t are those in bins (t + 1 - kExgiMin) and up.
    const auto idx = static_cast<std::size_t>(t + 1 - kExgiMin);
    double err = 0.0;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const auto est = static_cast<double>(above[p][idx]);
      err += 100.0 * std::abs(est - static_cast<double>(manual[p])) / totals[p];
    }
    err /= static_cast<double>(pairs.size());
    const bool better = err < best_err ||
                        (err == best_err && (std::abs(t) < std::abs(best_t) || (std::abs(t) == std::abs(best_t) && t < best_t)));
    if (better) {
      best_err = err;
      best_t = t;
    }
  }
  return best_t;
}

}  // namespace screekit
