#pragma once

#include <vector>

#include "svos/error.hpp"

namespace svos {
namespace cluster {

// 3D sinusoidal position code: per axis, interleaved sin/cos at geometric
// frequencies (base 10000), concatenated over (t, y, x).
std::vector<float> positional_encoding(int t, int y, int x, int dims_per_axis, int max_len);

}  // namespace cluster
}  // namespace svos
