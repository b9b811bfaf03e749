#pragma once

#include <cstddef>
#include <span>
#include <unordered_set>
#include <vector>

namespace pqkv {

/// Ids of the k largest scores outside `excluded`, in descending score order,
/// ties broken toward the lower id. Throws std::invalid_argument when fewer
/// than k candidates remain.
std::vector<std::size_t> top_k_desc(std::span<const float> scores, std::size_t k,
                                    const std::unordered_set<std::size_t>& excluded = {});

}  // namespace pqkv
