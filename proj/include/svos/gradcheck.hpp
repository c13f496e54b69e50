#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "svos/error.hpp"
#include "svos/parallel.hpp"
#include "svos/tensor.hpp"

namespace svos {
namespace net {

using DoubleParams = std::map<std::string, Tensor<double>>;

// Scalar loss over a parameter set; fills per-tensor gradients when asked.
using LossFnD = std::function<double(const DoubleParams&, DoubleParams* grads)>;

// Compares the reverse-mode gradient against central finite differences over
// every parameter element. Relative error uses a 1e-8 absolute floor.
inline double gradient_check(const LossFnD& fn, const DoubleParams& at, double eps = 1e-5) {
  DoubleParams grads;
  double base = fn(at, &grads);
  if (!std::isfinite(base)) throw validation_error("gradient_check: non-finite loss");

  std::vector<std::string> names;
  for (const auto& [k, v] : at) names.push_back(k);
  std::vector<double> worst(names.size(), 0.0);

  parallel_for(static_cast<int>(names.size()), [&](int ni) {
    const std::string& name = names[static_cast<size_t>(ni)];
    DoubleParams local = at;
    Tensor<double>& t = local[name];
    const Tensor<double>& g = grads.at(name);
    double w = 0;
    for (int i = 0; i < t.numel(); ++i) {
      double keep = t[i];
      t[i] = keep + eps;
      double up = fn(local, nullptr);
      t[i] = keep - eps;
      double dn = fn(local, nullptr);
      t[i] = keep;
      if (!std::isfinite(up) || !std::isfinite(dn))
        throw validation_error("gradient_check: non-finite loss at " + name);
      double fd = (up - dn) / (2 * eps);
      double diff = std::abs(fd - g[i]);
      if (diff > 1e-8) w = std::max(w, diff / std::max(std::abs(fd), std::abs(g[i])));
    }
    worst[static_cast<size_t>(ni)] = w;
  });

  double max_err = 0;
  for (double w : worst) max_err = std::max(max_err, w);
  return max_err;
}

}  // namespace net
}  // namespace svos
