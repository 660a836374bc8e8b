#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include <png.h>

#include "screekit/error.hpp"
#include "screekit/image.hpp"

namespace screekit {

RgbImage::RgbImage(int w, int h) : width(w), height(h), data(3 * static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0) {}

void RgbImage::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const std::size_t o = offset(x, y);
  data[o] = r;
  data[o + 1] = g;
  data[o + 2] = b;
}

void RgbImage::validate() const {
  if (width <= 0 || height <= 0) fail(ErrorKind::usage, "image must have positive width and height");
  if (data.size() != 3 * pixel_count()) fail(ErrorKind::usage, "image buffer size does not match dimensions");
}

GrayImage::GrayImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

struct RawPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  bool had_alpha = false;
  bool was_16bit = false;
  std::vector<std::uint8_t> pixels;
};

bool is_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), 8);
  return in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

// Returns false on a libpng error; `error` holds the message.
bool read_png_raw(std::FILE* fp, RawPng& out, std::string& error) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    error = "libpng initialisation failed";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    error = "libpng initialisation failed";
    return false;
  }
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    error = "corrupt PNG data";
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  out.had_alpha = (color & PNG_COLOR_MASK_ALPHA) != 0 || png_get_valid(png, info, PNG_INFO_tRNS) != 0;
  out.was_16bit = depth == 16;

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if ((color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) && depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (depth == 16) png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out.pixels.resize(stride * static_cast<std::size_t>(out.height));
  rows.resize(static_cast<std::size_t>(out.height));
  for (int y = 0; y < out.height; ++y) rows[static_cast<std::size_t>(y)] = out.pixels.data() + stride * static_cast<std::size_t>(y);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

RawPng read_png(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw ParseError(path.string(), 0, "", "cannot open image");
  RawPng raw;
  std::string error;
  if (!read_png_raw(fp.get(), raw, error)) throw ParseError(path.string(), 0, "", error);
  return raw;
}

// Netpbm reader for P2/P3/P5/P6 with maxval <= 255.
struct Netpbm {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
};

Netpbm read_netpbm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "", "cannot open image");
  auto next_token = [&]() {
    std::string tok;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(c);
    }
    return tok;
  };
  const std::string magic = next_token();
  if (magic != "P2" && magic != "P3" && magic != "P5" && magic != "P6") {
    throw ParseError(path.string(), 0, "", "unsupported image format (expected PNG, PPM or PGM)");
  }
  Netpbm img;
  int maxval = 0;
  try {
    img.width = std::stoi(next_token());
    img.height = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw ParseError(path.string(), 0, "", "malformed netpbm header");
  }
  if (img.width <= 0 || img.height <= 0 || maxval <= 0 || maxval > 255) {
    throw ParseError(path.string(), 0, "", "unsupported netpbm dimensions or maxval");
  }
  img.channels = (magic == "P3" || magic == "P6") ? 3 : 1;
  const std::size_t count = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height) *
                            static_cast<std::size_t>(img.channels);
  img.pixels.resize(count);
  if (magic == "P5" || magic == "P6") {
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in.gcount()) != count) throw ParseError(path.string(), 0, "", "truncated image data");
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const std::string tok = next_token();
      if (tok.empty()) throw ParseError(path.string(), 0, "", "truncated image data");
      const int v = std::stoi(tok);
      if (v < 0 || v > maxval) throw ParseError(path.string(), 0, "", "sample out of range");
      img.pixels[i] = static_cast<std::uint8_t>(v);
    }
  }
  if (maxval != 255) {
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>((p * 255 + maxval / 2) / maxval);
  }
  return img;
}

void write_png_bytes(const std::filesystem::path& path, int width, int height, png_uint_32 format,
                     const std::vector<std::uint8_t>& data) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = format;
  if (!png_image_write_to_file(&img, path.c_str(), 0, data.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    fail(ErrorKind::parse, "cannot write PNG " + path.string() + ": " + msg);
  }
}

}  // namespace

LoadedRgb load_rgb(const std::filesystem::path& path) {
  LoadedRgb out;
  if (is_png(path)) {
    RawPng raw = read_png(path);
    if (raw.had_alpha) throw ParseError(path.string(), 0, "", "images with an alpha channel are not accepted");
    if (raw.was_16bit) out.warnings.push_back(path.string() + ": 16-bit samples reduced to 8 bits");
    out.image = RgbImage(raw.width, raw.height);
    if (raw.channels == 3) {
      out.image.data = std::move(raw.pixels);
    } else {
      for (std::size_t i = 0; i < out.image.pixel_count(); ++i) {
        const std::uint8_t v = raw.pixels[i];
        out.image.data[3 * i] = out.image.data[3 * i + 1] = out.image.data[3 * i + 2] = v;
      }
    }
    return out;
  }
  Netpbm pnm = read_netpbm(path);
  if (pnm.channels != 3) throw ParseError(path.string(), 0, "", "expected an RGB (PPM) image");
  out.image.width = pnm.width;
  out.image.height = pnm.height;
  out.image.data = std::move(pnm.pixels);
  return out;
}

GrayImage load_mask(const std::filesystem::path& path) {
  GrayImage mask;
  if (is_png(path)) {
    RawPng raw = read_png(path);
    mask = GrayImage(raw.width, raw.height);
    for (std::size_t i = 0; i < mask.pixel_count(); ++i) {
      bool on = false;
      for (int c = 0; c < raw.channels; ++c) on = on || raw.pixels[i * static_cast<std::size_t>(raw.channels) + static_cast<std::size_t>(c)] != 0;
      mask.data[i] = on ? 1 : 0;
    }
    return mask;
  }
  Netpbm pnm = read_netpbm(path);
  mask = GrayImage(pnm.width, pnm.height);
  for (std::size_t i = 0; i < mask.pixel_count(); ++i) {
    bool on = false;
    for (int c = 0; c < pnm.channels; ++c) on = on || pnm.pixels[i * static_cast<std::size_t>(pnm.channels) + static_cast<std::size_t>(c)] != 0;
    mask.data[i] = on ? 1 : 0;
  }
  return mask;
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  image.validate();
  write_png_bytes(path, image.width, image.height, PNG_FORMAT_RGB, image.data);
}

void write_mask_png(const std::filesystem::path& path, const GrayImage& mask) {
  std::vector<std::uint8_t> scaled(mask.data.size());
  for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = mask.data[i] ? 255 : 0;
  write_png_bytes(path, mask.width, mask.height, PNG_FORMAT_GRAY, scaled);
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
  image.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::parse, "cannot write " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data.data()), static_cast<std::streamsize>(image.data.size()));
}

void write_mask_pgm(const std::filesystem::path& path, const GrayImage& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::parse, "cannot write " + path.string());
  out << "P5\n" << mask.width << ' ' << mask.height << "\n255\n";
  for (std::uint8_t v : mask.data) out.put(static_cast<char>(v ? 255 : 0));
}

}  // namespace screekit
