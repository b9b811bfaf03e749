#include "pqkv/workload.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "pqkv/rng.hpp"

namespace pqkv {

namespace {

// Exact score of the rank-1 token in the powerlaw workload. Large enough that
// the top of the profile dominates softmax mass, small enough that the tail
// still matters, so selection quality shows up in attention output error.
constexpr double kPowerlawTopScore = 8.0;

void fill_normal(Rng& rng, float* out, std::size_t n, double scale = 1.0) {
    for (std::size_t i = 0; i < n; ++i)
        out[i] = static_cast<float>(scale * rng.normal());
}

// random direction on the unit sphere
std::vector<double> unit_vector(Rng& rng, std::size_t d) {
    std::vector<double> v(d);
    double norm2 = 0.0;
    do {
        norm2 = 0.0;
        for (double& x : v) {
            x = rng.normal();
            norm2 += x * x;
        }
    } while (norm2 == 0.0);
    double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
    return v;
}

void gen_gaussian_head(Rng& rng, const WorkloadSpec& spec, float* keys, float* values,
                       float* queries) {
    std::size_t d = spec.d_h;
    std::vector<double> means(spec.n_components * d);
    for (double& x : means) x = rng.normal();
    for (std::size_t i = 0; i < spec.s; ++i) {
        const double* mean = means.data() + rng.index(spec.n_components) * d;
        for (std::size_t j = 0; j < d; ++j)
            keys[i * d + j] = static_cast<float>(mean[j] + spec.spread * rng.normal());
    }
    fill_normal(rng, values, spec.s * d);
    fill_normal(rng, queries, spec.g * d);
}

void gen_powerlaw_head(Rng& rng, const WorkloadSpec& spec, float* keys, float* values,
                       float* queries) {
    std::size_t d = spec.d_h;
    std::vector<double> q = unit_vector(rng, d);

    // rank r is assigned to a random token; its raw dot with q is pinned to
    // A*sqrt(d_h)/r^a so the scaled exact score lands on A/r^a
    std::vector<std::size_t> rank_of(spec.s);
    for (std::size_t i = 0; i < spec.s; ++i) rank_of[i] = i;
    for (std::size_t i = spec.s; i > 1; --i)
        std::swap(rank_of[i - 1], rank_of[rng.index(i)]);

    double top = kPowerlawTopScore * std::sqrt(static_cast<double>(d));
    for (std::size_t i = 0; i < spec.s; ++i) {
        std::vector<double> u = unit_vector(rng, d);
        double target = top / std::pow(static_cast<double>(rank_of[i] + 1),
                                       spec.zipf_exponent);
        double along = 0.0;
        for (std::size_t j = 0; j < d; ++j) along += u[j] * q[j];
        for (std::size_t j = 0; j < d; ++j)
            keys[i * d + j] = static_cast<float>(u[j] + (target - along) * q[j]);
    }
    fill_normal(rng, values, spec.s * d);
    for (std::size_t r = 0; r < spec.g; ++r)
        for (std::size_t j = 0; j < d; ++j)
            queries[r * d + j] = static_cast<float>(q[j]);
}

}  // namespace

void WorkloadSpec::validate() const {
    if (s < 1 || d_h < 1 || h_kv < 1 || g < 1)
        throw std::invalid_argument("workload: s, d_h, h_kv, g must all be >= 1");
    if (kind == WorkloadKind::kGaussianMixture && n_components < 1)
        throw std::invalid_argument("workload: n_components must be >= 1");
    if (spread < 0.0) throw std::invalid_argument("workload: spread must be >= 0");
    if (zipf_exponent <= 0.0)
        throw std::invalid_argument("workload: zipf_exponent must be > 0");
}

Workload gen_workload(const WorkloadSpec& spec) {
    spec.validate();
    Workload w;
    w.keys = TensorF32({spec.h_kv, spec.s, spec.d_h},
                       std::vector<float>(spec.h_kv * spec.s * spec.d_h));
    w.values = TensorF32({spec.h_kv, spec.s, spec.d_h},
                         std::vector<float>(spec.h_kv * spec.s * spec.d_h));
    w.queries = TensorF32({spec.h_kv, spec.g, spec.d_h},
                          std::vector<float>(spec.h_kv * spec.g * spec.d_h));

    Rng rng(spec.seed);
    for (std::size_t h = 0; h < spec.h_kv; ++h) {
        float* k = w.keys.data.data() + h * spec.s * spec.d_h;
        float* v = w.values.data.data() + h * spec.s * spec.d_h;
        float* q = w.queries.data.data() + h * spec.g * spec.d_h;
        if (spec.kind == WorkloadKind::kGaussianMixture)
            gen_gaussian_head(rng, spec, k, v, q);
        else
            gen_powerlaw_head(rng, spec, k, v, q);
    }
    w.keys.validate();
    w.values.validate();
    w.queries.validate();
    return w;
}

TensorF32 head_slice(const TensorF32& grid, std::size_t head) {
    if (grid.ndim() != 3) throw std::invalid_argument("workload: grid must be 3-d");
    if (head >= grid.dims[0]) throw std::out_of_range("workload: head out of range");
    std::size_t rows = grid.dims[1], cols = grid.dims[2];
    const float* base = grid.data.data() + head * rows * cols;
    return TensorF32({rows, cols}, std::vector<float>(base, base + rows * cols));
}

}  // namespace pqkv
