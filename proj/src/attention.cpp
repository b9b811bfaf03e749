#include "pqkv/attention.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pqkv/topk.hpp"

namespace pqkv {

std::vector<float> exact_scores(std::span<const float> query, const TensorF32& keys) {
    if (keys.ndim() != 2) throw std::invalid_argument("attention: keys must be 2-d");
    if (keys.dims[1] != query.size())
        throw std::invalid_argument("attention: query dim must match key dim");
    std::size_t t = keys.dims[0], d_h = keys.dims[1];
    double scale = 1.0 / std::sqrt(static_cast<double>(d_h));
    std::vector<float> scores(t);
    for (std::size_t i = 0; i < t; ++i) {
        const float* k = keys.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < d_h; ++j)
            acc += static_cast<double>(query[j]) * static_cast<double>(k[j]);
        scores[i] = static_cast<float>(acc * scale);
    }
    return scores;
}

std::vector<std::size_t> exact_topk(std::span<const float> query, const TensorF32& keys,
                                    std::size_t k,
                                    const std::unordered_set<std::size_t>& excluded) {
    std::vector<float> scores = exact_scores(query, keys);
    return top_k_desc(scores, k, excluded);
}

std::vector<float> softmax_attention(std::span<const float> query, const TensorF32& keys,
                                     const TensorF32& values) {
    if (values.ndim() != 2 || values.dims != keys.dims)
        throw std::invalid_argument("attention: values must match key dims");
    if (keys.dims[0] < 1) throw std::invalid_argument("attention: need at least one token");
    std::vector<float> scores = exact_scores(query, keys);

    double max_score = *std::max_element(scores.begin(), scores.end());
    std::size_t t = keys.dims[0], d_h = keys.dims[1];
    std::vector<double> weights(t);
    double total = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
        weights[i] = std::exp(static_cast<double>(scores[i]) - max_score);
        total += weights[i];
    }

    std::vector<double> acc(d_h, 0.0);
    for (std::size_t i = 0; i < t; ++i) {
        double w = weights[i] / total;
        const float* v = values.row(i);
        for (std::size_t j = 0; j < d_h; ++j) acc[j] += w * static_cast<double>(v[j]);
    }
    std::vector<float> out(d_h);
    for (std::size_t j = 0; j < d_h; ++j) out[j] = static_cast<float>(acc[j]);
    return out;
}

std::vector<float> selective_attention(std::span<const float> query, const HeadState& state,
                                       std::span<const std::size_t> selected_middle_ids) {
    std::vector<std::size_t> ids(selected_middle_ids.begin(), selected_middle_ids.end());
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
        throw std::invalid_argument("attention: duplicate middle token id");

    std::size_t d_h = query.size();
    std::size_t t = state.init_entries.size() + ids.size() + state.local.size();
    TensorF32 keys({t, d_h}, std::vector<float>(t * d_h));
    TensorF32 values({t, d_h}, std::vector<float>(t * d_h));
    std::size_t row = 0;
    auto put = [&](const KvEntry& e) {
        if (e.key.size() != d_h)
            throw std::invalid_argument("attention: entry dim mismatch");
        std::copy(e.key.begin(), e.key.end(), keys.row(row));
        std::copy(e.value.begin(), e.value.end(), values.row(row));
        ++row;
    };
    for (const KvEntry& e : state.init_entries) put(e);
    for (std::size_t id : ids) {
        auto it = state.middle.find(id);
        if (it == state.middle.end())
            throw std::out_of_range("attention: token " + std::to_string(id) +
                                    " is not a middle token");
        put(it->second);
    }
    for (const auto& [id, e] : state.local) put(e);
    return softmax_attention(query, keys, values);
}

TensorF32 gqa_group_attention(const TensorF32& queries, const TensorF32& keys,
                              const TensorF32& values) {
    if (queries.ndim() != 2 || queries.dims[0] < 1)
        throw std::invalid_argument("attention: queries must be a non-empty 2-d grid");
    std::size_t g = queries.dims[0], d_h = queries.dims[1];
    TensorF32 out({g, d_h}, std::vector<float>(g * d_h));
    for (std::size_t r = 0; r < g; ++r) {
        std::vector<float> o = softmax_attention({queries.row(r), d_h}, keys, values);
        std::copy(o.begin(), o.end(), out.row(r));
    }
    return out;
}

}  // namespace pqkv
