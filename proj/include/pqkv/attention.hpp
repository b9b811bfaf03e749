#pragma once

#include <span>
#include <unordered_set>
#include <vector>

#include "pqkv/kv_store.hpp"
#include "pqkv/tensor.hpp"

namespace pqkv {

/// Scaled dot-product scores: dot(query, key_i) / sqrt(d_h).
std::vector<float> exact_scores(std::span<const float> query, const TensorF32& keys);

/// Oracle top-k over exact scores; same ordering and tie rules as approx_topk.
std::vector<std::size_t> exact_topk(std::span<const float> query, const TensorF32& keys,
                                    std::size_t k,
                                    const std::unordered_set<std::size_t>& excluded = {});

/// Numerically safe softmax over exact scores (max-subtracted), then the
/// weighted sum of value rows.
std::vector<float> softmax_attention(std::span<const float> query, const TensorF32& keys,
                                     const TensorF32& values);

/// Attention over the init segment, the selected middle tokens (ascending
/// token id), and the local ring, concatenated in that order.
std::vector<float> selective_attention(std::span<const float> query, const HeadState& state,
                                       std::span<const std::size_t> selected_middle_ids);

/// Row-wise softmax_attention for the g query heads sharing one kv head.
TensorF32 gqa_group_attention(const TensorF32& queries, const TensorF32& keys,
                              const TensorF32& values);

}  // namespace pqkv
