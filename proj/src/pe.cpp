#include "svos/pe.hpp"

#include <cmath>
#include <string>

namespace svos {
namespace cluster {

namespace {

void encode_axis(int pos, int dims, std::vector<float>& out) {
  for (int i = 0; i < dims / 2; ++i) {
    double freq = std::pow(10000.0, -2.0 * i / dims);
    out.push_back(static_cast<float>(std::sin(pos * freq)));
    out.push_back(static_cast<float>(std::cos(pos * freq)));
  }
}

}  // namespace

std::vector<float> positional_encoding(int t, int y, int x, int dims_per_axis, int max_len) {
  if (dims_per_axis < 2 || dims_per_axis % 2 != 0)
    throw validation_error("positional_encoding: dims_per_axis must be even and >= 2");
  for (int c : {t, y, x})
    if (c < 0 || c >= max_len)
      throw validation_error("positional_encoding: coordinate " + std::to_string(c) +
                             " outside [0," + std::to_string(max_len) + ")");
  std::vector<float> out;
  out.reserve(static_cast<size_t>(3 * dims_per_axis));
  encode_axis(t, dims_per_axis, out);
  encode_axis(y, dims_per_axis, out);
  encode_axis(x, dims_per_axis, out);
  return out;
}

}  // namespace cluster
}  // namespace svos
