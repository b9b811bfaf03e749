#include "pqkv/topk.hpp"

#include <algorithm>
#include <stdexcept>

namespace pqkv {

std::vector<std::size_t> top_k_desc(std::span<const float> scores, std::size_t k,
                                    const std::unordered_set<std::size_t>& excluded) {
    std::vector<std::size_t> ids;
    ids.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (!excluded.contains(i)) ids.push_back(i);
    if (k > ids.size())
        throw std::invalid_argument("top_k: k too large for the candidate set");

    auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    };
    std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k),
                      ids.end(), better);
    ids.resize(k);
    return ids;
}

}  // namespace pqkv
