#pragma once

#include <cstdint>

#include "pqkv/tensor.hpp"

namespace pqkv {

enum class WorkloadKind {
    kGaussianMixture,  // keys drawn around n_components shared means
    kPowerlaw          // exact scores follow A / rank^zipf_exponent
};

struct WorkloadSpec {
    std::size_t s = 1024;
    std::size_t d_h = 64;
    std::size_t h_kv = 1;
    std::size_t g = 1;  // query heads per kv head
    WorkloadKind kind = WorkloadKind::kGaussianMixture;
    std::size_t n_components = 8;
    double spread = 0.5;
    double zipf_exponent = 1.0;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Keys/values are [h_kv, s, d_h]; queries are [h_kv, g, d_h]. Every tensor is
/// a pure function of the spec (bit-identical across runs).
struct Workload {
    TensorF32 keys;
    TensorF32 values;
    TensorF32 queries;
};

Workload gen_workload(const WorkloadSpec& spec);

/// Copies one kv head's [s, d_h] (or [g, d_h]) slice out of a 3-d grid.
TensorF32 head_slice(const TensorF32& grid, std::size_t head);

}  // namespace pqkv
