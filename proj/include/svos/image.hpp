#pragma once

#include <cstdint>
#include <string>

#include "svos/tensor.hpp"

namespace svos {

// RGB frame, channels-first (3,H,W), values in [0,1] on a 1/255 grid so PNG
// round trips are exact.
using Image = Tensor<float>;

// Per-pixel object ids, 0 = background.
using LabelMap = Tensor<uint8_t>;

Image make_image(int h, int w);
LabelMap make_labels(int h, int w);

// 8-bit RGB
void write_png_rgb(const std::string& path, const Image& img);
Image read_png_rgb(const std::string& path);

// 8-bit single channel, pixel value = object id
void write_png_labels(const std::string& path, const LabelMap& labels);
LabelMap read_png_labels(const std::string& path);

}  // namespace svos
