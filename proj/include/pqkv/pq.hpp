#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "pqkv/tensor.hpp"

namespace pqkv {

/// Product-quantization geometry: keys of head_dim d_h are split into m
/// partitions of d_m dims each, every partition quantized to 2^b centroids.
struct PqConfig {
    std::size_t m = 2;
    std::size_t b = 6;
    std::size_t d_m = 0;
    std::size_t n_clusters = 64;  // 2^b

    static PqConfig create(std::size_t m, std::size_t b, std::size_t d_h);
    void validate() const;
    std::size_t head_dim() const { return m * d_m; }
};

/// Codebooks plus the per-token code grid. Immutable once built except through
/// append_code; readers may score concurrently, appends take a single writer.
struct PqIndex {
    PqConfig cfg;
    TensorF32 centroids;               // [m, 2^b, d_m]
    std::vector<std::uint16_t> codes;  // [s, m] row-major

    std::size_t size() const { return cfg.m ? codes.size() / cfg.m : 0; }
    const float* centroid(std::size_t partition, std::size_t cluster) const;
    const std::uint16_t* code_row(std::size_t token) const;
};

/// Per-partition k-means over the key sub-vectors; one token's code is its m
/// cluster ids. Deterministic for a fixed seed.
PqIndex pq_construct(const TensorF32& keys, const PqConfig& cfg,
                     std::size_t max_iter, std::uint64_t seed);

/// Nearest centroid per partition for one new key.
std::vector<std::uint16_t> pq_encode_one(std::span<const float> key,
                                         const PqIndex& index);

/// Appends one code row. Never changes existing rows or their scores.
void append_code(PqIndex& index, std::span<const std::uint16_t> code);

/// Asymmetric scores for every indexed token: per partition the query
/// sub-vector is dotted with each centroid once ([m x 2^b] table), then each
/// token's score gathers its m table entries in ascending partition order.
std::vector<float> pq_score(std::span<const float> query, const PqIndex& index);

/// Group scoring for GQA: the per-head tables are summed across the g query
/// heads before the gather, which equals scoring the element-wise sum of the
/// queries.
std::vector<float> pq_score_gqa(const TensorF32& queries, const PqIndex& index);

/// Decoded approximation of token i (concatenated centroids of its code).
std::vector<float> reconstruct(const PqIndex& index, std::size_t token);

/// Ids of the k largest scores outside `excluded`, descending, ties toward the
/// lower token id. Scores are used raw; no softmax is applied before selection.
std::vector<std::size_t> approx_topk(std::span<const float> scores, std::size_t k,
                                     const std::unordered_set<std::size_t>& excluded = {});

/// Bytes of PQ codes per token over bytes of an fp16 key vector: m*b/(16*d_h).
double codes_memory_ratio(const PqConfig& cfg, std::size_t d_h);

void write_index(std::ostream& out, const PqIndex& index);
PqIndex read_index(std::istream& in);
void save_index(const std::string& path, const PqIndex& index);
PqIndex load_index(const std::string& path);

}  // namespace pqkv
