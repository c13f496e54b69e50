#include "svos/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "svos/error.hpp"
#include "svos/rng.hpp"

namespace svos {
namespace cluster {

namespace {

double sq_dist(const float* a, const float* b, int dim) {
  double s = 0;
  for (int i = 0; i < dim; ++i) {
    double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return s;
}

void seed_pp(const Tensor<float>& pts, int m, Rng& rng, Tensor<float>& centroids) {
  const int n = pts.dim(0), dim = pts.dim(1);
  std::vector<double> d2(static_cast<size_t>(n), std::numeric_limits<double>::max());
  int first = rng.uniform_int(0, n - 1);
  std::copy(&pts.at(first, 0), &pts.at(first, 0) + dim, &centroids.at(0, 0));
  for (int c = 1; c < m; ++c) {
    double total = 0;
    for (int i = 0; i < n; ++i) {
      double d = sq_dist(&pts.at(i, 0), &centroids.at(c - 1, 0), dim);
      d2[static_cast<size_t>(i)] = std::min(d2[static_cast<size_t>(i)], d);
      total += d2[static_cast<size_t>(i)];
    }
    int pick = n - 1;
    if (total > 0) {
      double r = rng.uniform() * total, acc = 0;
      for (int i = 0; i < n; ++i) {
        acc += d2[static_cast<size_t>(i)];
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.uniform_int(0, n - 1);
    }
    std::copy(&pts.at(pick, 0), &pts.at(pick, 0) + dim, &centroids.at(c, 0));
  }
}

ClusterState run_once(const Tensor<float>& pts, int m, Rng rng, int max_iters) {
  const int n = pts.dim(0), dim = pts.dim(1);
  ClusterState st;
  st.centroids = Tensor<float>({m, dim});
  st.assign.assign(static_cast<size_t>(n), 0);
  seed_pp(pts, m, rng, st.centroids);

  std::vector<int> counts(static_cast<size_t>(m), 0);
  std::vector<double> sums(static_cast<size_t>(m) * dim, 0.0);
  double prev_objective = std::numeric_limits<double>::max();

  for (int iter = 0; iter < max_iters; ++iter) {
    // assign to nearest centroid, ties to the lowest index
    bool changed = false;
    double objective = 0;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double bd = sq_dist(&pts.at(i, 0), &st.centroids.at(0, 0), dim);
      for (int c = 1; c < m; ++c) {
        double d = sq_dist(&pts.at(i, 0), &st.centroids.at(c, 0), dim);
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (st.assign[static_cast<size_t>(i)] != best) changed = true;
      st.assign[static_cast<size_t>(i)] = best;
      objective += bd;
    }
    if (objective > prev_objective + 1e-6 * (1.0 + prev_objective))
      throw std::logic_error("kmeans: objective increased across an EM iteration");
    prev_objective = objective;
    st.objective = objective;
    if (!changed && iter > 0) break;

    // recompute means
    std::fill(counts.begin(), counts.end(), 0);
    std::fill(sums.begin(), sums.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      int c = st.assign[static_cast<size_t>(i)];
      counts[static_cast<size_t>(c)]++;
      for (int d = 0; d < dim; ++d) sums[static_cast<size_t>(c) * dim + d] += pts.at(i, d);
    }
    for (int c = 0; c < m; ++c) {
      if (counts[static_cast<size_t>(c)] == 0) continue;
      for (int d = 0; d < dim; ++d)
        st.centroids.at(c, d) =
            static_cast<float>(sums[static_cast<size_t>(c) * dim + d] / counts[static_cast<size_t>(c)]);
    }

    // re-seed empties with the point farthest from its own centroid
    for (int c = 0; c < m; ++c) {
      if (counts[static_cast<size_t>(c)] > 0) continue;
      int worst = -1;
      double wd = -1;
      for (int i = 0; i < n; ++i) {
        int oc = st.assign[static_cast<size_t>(i)];
        if (counts[static_cast<size_t>(oc)] < 2) continue;
        double d = sq_dist(&pts.at(i, 0), &st.centroids.at(oc, 0), dim);
        if (d > wd) {
          wd = d;
          worst = i;
        }
      }
      if (worst < 0) continue;
      int donor = st.assign[static_cast<size_t>(worst)];
      std::copy(&pts.at(worst, 0), &pts.at(worst, 0) + dim, &st.centroids.at(c, 0));
      st.assign[static_cast<size_t>(worst)] = c;
      counts[static_cast<size_t>(donor)]--;
      counts[static_cast<size_t>(c)] = 1;
      for (int d = 0; d < dim; ++d) {
        sums[static_cast<size_t>(donor) * dim + d] -= pts.at(worst, d);
        st.centroids.at(donor, d) = static_cast<float>(sums[static_cast<size_t>(donor) * dim + d] /
                                                       counts[static_cast<size_t>(donor)]);
      }
      // the moved point now sits exactly on its own centroid and the donor
      // mean re-optimizes the remaining points, so the objective still drops
    }
  }

  // final objective against the final centroids
  double objective = 0;
  for (int i = 0; i < n; ++i)
    objective += sq_dist(&pts.at(i, 0), &st.centroids.at(st.assign[static_cast<size_t>(i)], 0), dim);
  st.objective = objective;
  return st;
}

}  // namespace

ClusterState kmeans(const Tensor<float>& points, int m, uint64_t seed, const KMeansOptions& opts) {
  if (points.rank() != 2) throw validation_error("kmeans: points must be (N, dim)");
  const int n = points.dim(0);
  if (m < 1) throw validation_error("kmeans: need at least one cluster");
  if (n < m)
    throw validation_error("kmeans: " + std::to_string(n) + " points for " + std::to_string(m) +
                           " clusters");
  Rng rng(seed);
  ClusterState best;
  for (int r = 0; r < std::max(1, opts.restarts); ++r) {
    ClusterState st = run_once(points, m, rng.fork(static_cast<uint64_t>(r)), opts.max_iters);
    if (r == 0 || st.objective < best.objective) best = std::move(st);
  }
  return best;
}

}  // namespace cluster
}  // namespace svos
