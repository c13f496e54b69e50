#pragma once

#include <cstdint>
#include <vector>

#include "svos/tensor.hpp"

namespace svos {
namespace cluster {

// Result of the space-time EM clustering. Assignments are stored as indices;
// each entry stands for the one-hot row of the assignment matrix.
struct ClusterState {
  Tensor<float> centroids;  // (M, dim)
  std::vector<int> assign;  // point -> cluster id in [0, M)
  double objective = 0;     // within-cluster sum of squared distances

  int clusters() const { return centroids.dim(0); }
  int points() const { return static_cast<int>(assign.size()); }
};

struct KMeansOptions {
  int max_iters = 100;
  int restarts = 3;
};

// Lloyd iterations from k-means++ seeding; empty clusters are re-seeded to
// the point currently farthest from its own centroid. The objective is
// checked to be non-increasing on every iteration.
ClusterState kmeans(const Tensor<float>& points, int m, uint64_t seed,
                    const KMeansOptions& opts = {});

}  // namespace cluster
}  // namespace svos
