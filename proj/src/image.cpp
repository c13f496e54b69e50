#include "svos/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "svos/error.hpp"

namespace svos {

Image make_image(int h, int w) { return Image({3, h, w}); }
LabelMap make_labels(int h, int w) { return LabelMap({h, w}); }

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_png(const std::string& path, const uint8_t* rows, int h, int w, int channels) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw io_error("cannot open for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw io_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw io_error("libpng write failed: " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> ptrs(static_cast<size_t>(h));
  for (int y = 0; y < h; ++y)
    ptrs[static_cast<size_t>(y)] = const_cast<png_bytep>(rows + static_cast<size_t>(y) * w * channels);
  png_write_image(png, ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::vector<uint8_t> read_png(const std::string& path, int want_channels, int* out_h, int* out_w) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw io_error("cannot open for reading: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw io_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw io_error("libpng read failed: " + path);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);

  png_set_strip_16(png);
  png_set_packing(png);
  int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (want_channels == 3) {
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
      png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
  } else {
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
        color == PNG_COLOR_TYPE_PALETTE)
      png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    png_set_strip_alpha(png);
  }
  png_read_update_info(png, info);

  int h = static_cast<int>(png_get_image_height(png, info));
  int w = static_cast<int>(png_get_image_width(png, info));
  int rowbytes = static_cast<int>(png_get_rowbytes(png, info));
  if (rowbytes != w * want_channels) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw io_error("unexpected channel layout in " + path);
  }
  std::vector<uint8_t> buf(static_cast<size_t>(h) * w * want_channels);
  std::vector<png_bytep> ptrs(static_cast<size_t>(h));
  for (int y = 0; y < h; ++y)
    ptrs[static_cast<size_t>(y)] = buf.data() + static_cast<size_t>(y) * w * want_channels;
  png_read_image(png, ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  *out_h = h;
  *out_w = w;
  return buf;
}

}  // namespace

void write_png_rgb(const std::string& path, const Image& img) {
  if (img.rank() != 3 || img.dim(0) != 3) throw validation_error("write_png_rgb: want (3,H,W)");
  const int h = img.dim(1), w = img.dim(2);
  std::vector<uint8_t> rows(static_cast<size_t>(h) * w * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        float v = img.at(c, y, x);
        v = std::min(1.0f, std::max(0.0f, v));
        rows[(static_cast<size_t>(y) * w + x) * 3 + c] =
            static_cast<uint8_t>(std::lround(v * 255.0f));
      }
  write_png(path, rows.data(), h, w, 3);
}

Image read_png_rgb(const std::string& path) {
  int h = 0, w = 0;
  auto buf = read_png(path, 3, &h, &w);
  Image img = make_image(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) = buf[(static_cast<size_t>(y) * w + x) * 3 + c] / 255.0f;
  return img;
}

void write_png_labels(const std::string& path, const LabelMap& labels) {
  if (labels.rank() != 2) throw validation_error("write_png_labels: want (H,W)");
  write_png(path, labels.data(), labels.dim(0), labels.dim(1), 1);
}

LabelMap read_png_labels(const std::string& path) {
  int h = 0, w = 0;
  auto buf = read_png(path, 1, &h, &w);
  LabelMap out = make_labels(h, w);
  std::copy(buf.begin(), buf.end(), out.v.begin());
  return out;
}

}  // namespace svos
