#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace screekit {

/// 8-bit RGB, row-major, interleaved.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int w, int h);

  [[nodiscard]] std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  [[nodiscard]] std::size_t offset(int x, int y) const { return 3 * (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)); }
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);

  void validate() const;
};

/// Single-channel 8-bit image. Masks use 0 = background, 1 = vegetation.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0);

  [[nodiscard]] std::size_t pixel_count() const { return data.size(); }
  [[nodiscard]] std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
};

struct LoadedRgb {
  RgbImage image;
  std::vector<std::string> warnings;
};

/// PNG (8/16-bit RGB or gray, palette) or binary/ASCII PPM. Alpha is rejected;
/// 16-bit samples are reduced to 8 bits with a warning.
LoadedRgb load_rgb(const std::filesystem::path& path);

/// PNG or PGM mask; any nonzero sample becomes 1.
GrayImage load_mask(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const RgbImage& image);
/// Masks are written as 0/255.
void write_mask_png(const std::filesystem::path& path, const GrayImage& mask);
void write_ppm(const std::filesystem::path& path, const RgbImage& image);
void write_mask_pgm(const std::filesystem::path& path, const GrayImage& mask);

}  // namespace screekit
