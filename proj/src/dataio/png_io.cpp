#include "siamgrid/dataio/png_io.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include <png.h>

#include "siamgrid/errors.hpp"

namespace siamgrid::dataio {

namespace {

struct file_closer {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using file_ptr = std::unique_ptr<std::FILE, file_closer>;

// libpng reports errors by longjmp; these helpers keep every object with a
// destructor outside the frames that setjmp protects.
bool read_rows(std::FILE* f, raw_image& out, std::vector<unsigned char>& buffer, char* message) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::snprintf(message, 128, "libpng read error");
    return false;
  }
  png_init_io(png, f);
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::snprintf(message, 128, "only grayscale PNG images are supported");
    return false;
  }
  if (color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_strip_alpha(png);
  if (depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
    depth = 8;
  }
  png_read_update_info(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  buffer.resize(row_bytes * h);
  for (png_uint_32 y = 0; y < h; ++y) png_read_row(png, buffer.data() + y * row_bytes, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  out.height = h;
  out.width = w;
  out.bit_depth = depth;
  out.values.resize(static_cast<std::size_t>(w) * h);
  for (std::size_t y = 0; y < h; ++y) {
    const unsigned char* row = buffer.data() + y * row_bytes;
    for (std::size_t x = 0; x < w; ++x) {
      out.values[y * w + x] = depth == 16 ? (static_cast<std::int32_t>(row[2 * x]) << 8) | row[2 * x + 1] : row[x];
    }
  }
  return true;
}

bool write_rows(std::FILE* f, const raw_image& raw, const std::vector<unsigned char>& buffer, char* message) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::snprintf(message, 128, "libpng write error");
    return false;
  }
  png_init_io(png, f);
  png_set_IHDR(png, info, static_cast<png_uint_32>(raw.width), static_cast<png_uint_32>(raw.height), raw.bit_depth,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t row_bytes = raw.width * (raw.bit_depth == 16 ? 2 : 1);
  for (std::size_t y = 0; y < raw.height; ++y) {
    png_write_row(png, const_cast<unsigned char*>(buffer.data() + y * row_bytes));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

raw_image read_png_raw(const std::filesystem::path& path) {
  file_ptr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw io_error("cannot open PNG " + path.string());
  unsigned char sig[8] = {};
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw io_error(path.string() + " is not a PNG file");
  }
  std::rewind(f.get());
  raw_image out;
  std::vector<unsigned char> buffer;
  char message[128] = "libpng initialisation failed";
  if (!read_rows(f.get(), out, buffer, message)) throw io_error(path.string() + ": " + message);
  return out;
}

augment::image read_png(const std::filesystem::path& path) {
  const auto raw = read_png_raw(path);
  const double max_code = raw.bit_depth == 16 ? 65535.0 : 255.0;
  augment::image img(raw.height, raw.width);
  for (std::size_t i = 0; i < raw.values.size(); ++i) {
    img.pixels[i] = static_cast<float>(static_cast<double>(raw.values[i]) / max_code);
  }
  return img;
}

void write_png_raw(const std::filesystem::path& path, const raw_image& raw) {
  if (raw.bit_depth != 8 && raw.bit_depth != 16) throw contract_error("write_png: bit depth must be 8 or 16");
  if (raw.height == 0 || raw.width == 0 || raw.values.size() != raw.height * raw.width) {
    throw dimension_error("write_png: empty or inconsistent image");
  }
  const std::int32_t max_code = raw.bit_depth == 16 ? 65535 : 255;
  std::vector<unsigned char> buffer;
  buffer.reserve(raw.values.size() * 2);
  for (std::int32_t v : raw.values) {
    if (v < 0 || v > max_code) throw contract_error("write_png: code value out of range");
    if (raw.bit_depth == 16) {
      buffer.push_back(static_cast<unsigned char>(v >> 8));
      buffer.push_back(static_cast<unsigned char>(v & 0xff));
    } else {
      buffer.push_back(static_cast<unsigned char>(v));
    }
  }
  file_ptr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw io_error("cannot write PNG " + path.string());
  char message[128] = "libpng initialisation failed";
  if (!write_rows(f.get(), raw, buffer, message)) throw io_error(path.string() + ": " + message);
  if (std::fflush(f.get()) != 0) throw io_error("failed writing " + path.string());
}

void write_png(const std::filesystem::path& path, const augment::image& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw contract_error("write_png: bit depth must be 8 or 16");
  raw_image raw;
  raw.height = img.height;
  raw.width = img.width;
  raw.bit_depth = bit_depth;
  const double max_code = bit_depth == 16 ? 65535.0 : 255.0;
  raw.values.resize(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const double v = std::clamp(static_cast<double>(img.pixels[i]), 0.0, 1.0);
    raw.values[i] = static_cast<std::int32_t>(std::lround(v * max_code));
  }
  write_png_raw(path, raw);
}

}  // namespace siamgrid::dataio
