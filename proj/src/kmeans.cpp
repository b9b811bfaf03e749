#include "pqkv/kmeans.hpp"

#include <algorithm>
#include <cstring>
#include <limits>
#include <stdexcept>

#include "pqkv/rng.hpp"

namespace pqkv {

namespace {

double dist2(const float* a, const double* b, std::size_t dim) {
    double acc = 0.0;
    for (std::size_t t = 0; t < dim; ++t) {
        double diff = static_cast<double>(a[t]) - b[t];
        acc += diff * diff;
    }
    return acc;
}

// Centroids live in double during the iterations; rounding to f32 only once at
// the end keeps the inertia trace monotone.
struct Fitter {
    const TensorF32& points;
    std::size_t n, dim, n_clusters;
    std::vector<double> centroids;  // [n_clusters * dim]

    Fitter(const TensorF32& pts, std::size_t k)
        : points(pts), n(pts.dims[0]), dim(pts.dims[1]), n_clusters(k),
          centroids(k * dim, 0.0) {}

    const float* point(std::size_t i) const { return points.data.data() + i * dim; }
    double* centroid(std::size_t c) { return centroids.data() + c * dim; }
    const double* centroid(std::size_t c) const { return centroids.data() + c * dim; }

    void set_centroid(std::size_t c, const float* p) {
        for (std::size_t t = 0; t < dim; ++t) centroid(c)[t] = static_cast<double>(p[t]);
    }

    // One centroid per distinct point, in order of first appearance; extras
    // duplicate the last distinct point. Requires n <= n_clusters.
    void seed_from_distinct() {
        std::vector<std::size_t> distinct;
        for (std::size_t i = 0; i < n; ++i) {
            bool seen = false;
            for (std::size_t j : distinct)
                if (std::memcmp(point(i), point(j), dim * sizeof(float)) == 0) {
                    seen = true;
                    break;
                }
            if (!seen) distinct.push_back(i);
        }
        for (std::size_t c = 0; c < n_clusters; ++c)
            set_centroid(c, point(distinct[std::min(c, distinct.size() - 1)]));
    }

    void seed_plus_plus(Rng& rng) {
        set_centroid(0, point(rng.index(n)));
        std::vector<double> min_d2(n);
        for (std::size_t i = 0; i < n; ++i) min_d2[i] = dist2(point(i), centroid(0), dim);
        for (std::size_t c = 1; c < n_clusters; ++c) {
            double total = 0.0;
            for (double d : min_d2) total += d;
            std::size_t chosen;
            if (total > 0.0) {
                double target = rng.uniform() * total, cum = 0.0;
                chosen = n - 1;
                for (std::size_t i = 0; i < n; ++i) {
                    cum += min_d2[i];
                    if (cum >= target) {
                        chosen = i;
                        break;
                    }
                }
            } else {
                chosen = rng.index(n);  // all points coincide with a centroid
            }
            set_centroid(c, point(chosen));
            for (std::size_t i = 0; i < n; ++i)
                min_d2[i] = std::min(min_d2[i], dist2(point(i), centroid(c), dim));
        }
    }

    std::size_t nearest(std::size_t i) const {
        std::size_t best = 0;
        double best_d = dist2(point(i), centroid(0), dim);
        for (std::size_t c = 1; c < n_clusters; ++c) {
            double d = dist2(point(i), centroid(c), dim);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        return best;
    }

    // Assignment pass plus empty-cluster repair. Repair donates the point
    // farthest from its own centroid (ties toward the lower point index) from
    // a cluster that keeps at least one member, so the repaired cluster
    // collapses onto that point at the next update and inertia stays monotone.
    std::vector<std::size_t> assign_with_repair() const {
        std::vector<std::size_t> assign(n);
        std::vector<std::size_t> count(n_clusters, 0);
        for (std::size_t i = 0; i < n; ++i) {
            assign[i] = nearest(i);
            ++count[assign[i]];
        }
        if (n >= n_clusters) {
            for (std::size_t c = 0; c < n_clusters; ++c) {
                if (count[c] != 0) continue;
                std::size_t donor = n;  // point to move
                double worst = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (count[assign[i]] < 2) continue;
                    double d = dist2(point(i), centroid(assign[i]), dim);
                    if (d > worst) {
                        worst = d;
                        donor = i;
                    }
                }
                if (donor == n) break;  // fewer distinct points than clusters
                --count[assign[donor]];
                assign[donor] = c;
                ++count[c];
            }
        }
        return assign;
    }

    // Empty clusters keep their previous centroid.
    void update_means(const std::vector<std::size_t>& assign) {
        std::vector<double> sums(n_clusters * dim, 0.0);
        std::vector<std::size_t> count(n_clusters, 0);
        for (std::size_t i = 0; i < n; ++i) {
            double* s = sums.data() + assign[i] * dim;
            const float* p = point(i);
            for (std::size_t t = 0; t < dim; ++t) s[t] += static_cast<double>(p[t]);
            ++count[assign[i]];
        }
        for (std::size_t c = 0; c < n_clusters; ++c) {
            if (count[c] == 0) continue;
            for (std::size_t t = 0; t < dim; ++t)
                centroid(c)[t] = sums[c * dim + t] / static_cast<double>(count[c]);
        }
    }

    double inertia(const std::vector<std::size_t>& assign) const {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            total += dist2(point(i), centroid(assign[i]), dim);
        return total;
    }
};

}  // namespace

KmeansResult kmeans_fit(const TensorF32& points, std::size_t n_clusters,
                        std::size_t max_iter, std::uint64_t seed) {
    points.validate();
    if (points.ndim() != 2) throw std::invalid_argument("kmeans: points must be 2-d");
    if (n_clusters < 1) throw std::invalid_argument("kmeans: n_clusters must be >= 1");
    if (max_iter < 1) throw std::invalid_argument("kmeans: max_iter must be >= 1");

    Fitter f(points, n_clusters);
    if (f.n <= n_clusters) {
        f.seed_from_distinct();
    } else {
        Rng rng(seed);
        f.seed_plus_plus(rng);
    }

    KmeansResult res;
    std::vector<std::size_t> assign = f.assign_with_repair();
    for (std::size_t iter = 1; iter <= max_iter; ++iter) {
        f.update_means(assign);
        res.inertia_trace.push_back(f.inertia(assign));
        res.iterations_run = iter;
        std::vector<std::size_t> next = f.assign_with_repair();
        if (next == assign) break;
        assign = std::move(next);
    }

    res.assignments = std::move(assign);
    std::vector<float> grid(n_clusters * f.dim);
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = static_cast<float>(f.centroids[i]);
    res.centroids = TensorF32({n_clusters, f.dim}, std::move(grid));
    return res;
}

std::vector<std::size_t> assign_nearest(const TensorF32& points,
                                        const TensorF32& centroids) {
    if (points.ndim() != 2 || centroids.ndim() != 2)
        throw std::invalid_argument("assign_nearest: points and centroids must be 2-d");
    if (points.dims[1] != centroids.dims[1])
        throw std::invalid_argument("assign_nearest: dimension mismatch");

    std::size_t n = points.dims[0], dim = points.dims[1], k = centroids.dims[0];
    std::vector<std::size_t> assign(n);
    for (std::size_t i = 0; i < n; ++i) {
        const float* p = points.row(i);
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            const float* q = centroids.row(c);
            double acc = 0.0;
            for (std::size_t t = 0; t < dim; ++t) {
                double diff = static_cast<double>(p[t]) - static_cast<double>(q[t]);
                acc += diff * diff;
            }
            if (acc < best_d) {
                best_d = acc;
                best = c;
            }
        }
        assign[i] = best;
    }
    return assign;
}

}  // namespace pqkv
