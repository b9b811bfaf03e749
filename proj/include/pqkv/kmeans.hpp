#pragma once

#include <cstdint>
#include <vector>

#include "pqkv/tensor.hpp"

namespace pqkv {

struct KmeansResult {
    TensorF32 centroids;                    // [n_clusters, dim]
    std::vector<std::size_t> assignments;   // cluster id per point
    std::vector<double> inertia_trace;      // one entry per iteration, non-increasing
    std::size_t iterations_run = 0;
};

/// Lloyd iterations with k-means++ seeding from a seeded generator, squared
/// Euclidean metric, at most max_iter iterations, early stop once assignments
/// are stable. Ties in the nearest-centroid scan go to the lower index. A
/// cluster left empty by an assignment pass is repaired by moving in the point
/// farthest from its own centroid. With N <= n_clusters the seeding instead
/// places one centroid per distinct point (extras duplicate the last one), so
/// distinct inputs quantize with zero error.
KmeansResult kmeans_fit(const TensorF32& points, std::size_t n_clusters,
                        std::size_t max_iter, std::uint64_t seed);

/// Nearest centroid per point under squared Euclidean distance, ties toward
/// the lower centroid index.
std::vector<std::size_t> assign_nearest(const TensorF32& points,
                                        const TensorF32& centroids);

}  // namespace pqkv
