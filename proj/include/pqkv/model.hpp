#pragma once

#include <cstddef>

namespace pqkv {

/// Static geometry of the attention stack. model_dim and group_size are
/// derived; use create() so the invariants (num_heads divisible by
/// num_kv_heads, model_dim == num_heads * head_dim, everything >= 1) hold.
struct ModelShape {
    std::size_t batch = 1;       // sequences per batch
    std::size_t num_layers = 1;  // L
    std::size_t num_heads = 1;   // query heads h
    std::size_t num_kv_heads = 1;
    std::size_t head_dim = 1;    // d_h
    std::size_t model_dim = 1;   // h * d_h
    std::size_t group_size = 1;  // h / h_kv

    static ModelShape create(std::size_t batch, std::size_t num_layers,
                             std::size_t num_heads, std::size_t num_kv_heads,
                             std::size_t head_dim);

    /// Throws std::invalid_argument naming the violated constraint.
    void validate() const;
};

/// Token-segment sizing for the three-segment KV layout: the first n_init
/// tokens stay resident, the most recent n_local form a sliding window, and
/// k middle tokens get selected per decode step.
struct SegmentConfig {
    std::size_t n_init = 16;
    std::size_t n_local = 64;
    std::size_t k = 0;

    void validate() const;
};

/// Validates shape and segments against a concrete prompt length s, including
/// n_init + n_local <= s so a middle segment can exist.
void validate_shape(const ModelShape& shape, const SegmentConfig& seg, std::size_t s);

}  // namespace pqkv
