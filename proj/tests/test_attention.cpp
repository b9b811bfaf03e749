#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <cstring>
#include <vector>

#include "pqkv/attention.hpp"
#include "pqkv/kv_store.hpp"
#include "pqkv/rng.hpp"

using namespace pqkv;

namespace {

TensorF32 random_grid(std::uint64_t seed, std::size_t rows, std::size_t cols,
                      double scale = 1.0) {
    Rng rng(seed);
    std::vector<float> data(rows * cols);
    for (float& x : data) x = static_cast<float>(scale * rng.normal());
    return TensorF32({rows, cols}, std::move(data));
}

// independent long-double reference for softmax attention
std::vector<double> softmax_reference(std::span<const float> query,
                                      const TensorF32& keys, const TensorF32& values) {
    std::size_t t = keys.dims[0], d = keys.dims[1];
    long double scale = 1.0L / std::sqrt(static_cast<long double>(d));
    std::vector<long double> s(t);
    for (std::size_t i = 0; i < t; ++i) {
        long double acc = 0.0L;
        for (std::size_t j = 0; j < d; ++j)
            acc += static_cast<long double>(query[j]) *
                   static_cast<long double>(keys.row(i)[j]);
        // mirror the f32 rounding of the production score path
        s[i] = static_cast<float>(static_cast<double>(acc * scale));
    }
    long double mx = s[0];
    for (long double v : s) mx = std::max(mx, v);
    long double total = 0.0L;
    std::vector<long double> w(t);
    for (std::size_t i = 0; i < t; ++i) {
        w[i] = std::exp(s[i] - mx);
        total += w[i];
    }
    std::vector<double> out(d, 0.0);
    for (std::size_t i = 0; i < t; ++i)
        for (std::size_t j = 0; j < d; ++j)
            out[j] += static_cast<double>(w[i] / total *
                                          static_cast<long double>(values.row(i)[j]));
    return out;
}

}  // namespace

TEST_CASE("scores against identity keys read the query back, scaled") {
    TensorF32 keys({4, 4}, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1});
    std::vector<float> q{1, 2, 3, 4};
    std::vector<float> scores = exact_scores(q, keys);
    CHECK(scores == std::vector<float>{0.5f, 1.0f, 1.5f, 2.0f});
}

TEST_CASE("score and dimension validation") {
    TensorF32 keys({2, 3}, {1, 2, 3, 4, 5, 6});
    std::vector<float> q{1, 2};
    CHECK_THROWS_AS(exact_scores(q, keys), std::invalid_argument);
    TensorF32 bad_values({3, 3}, std::vector<float>(9, 0.0f));
    std::vector<float> q3{1, 2, 3};
    CHECK_THROWS_AS(softmax_attention(q3, keys, bad_values), std::invalid_argument);
}

TEST_CASE("softmax attention matches a long-double reference") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        TensorF32 keys = random_grid(seed, 50, 8);
        TensorF32 values = random_grid(seed + 100, 50, 8);
        Rng rng(seed + 200);
        std::vector<float> q(8);
        for (float& x : q) x = static_cast<float>(rng.normal());

        std::vector<float> got = softmax_attention(q, keys, values);
        std::vector<double> want = softmax_reference(q, keys, values);
        for (std::size_t j = 0; j < 8; ++j)
            CHECK(static_cast<double>(got[j]) == doctest::Approx(want[j]).epsilon(1e-6));
    }
}

TEST_CASE("uniform values pass through unchanged") {
    TensorF32 keys = random_grid(7, 30, 6);
    std::vector<float> row{1.5f, -2.0f, 0.25f, 8.0f, -0.5f, 3.0f};
    std::vector<float> flat;
    for (int i = 0; i < 30; ++i) flat.insert(flat.end(), row.begin(), row.end());
    TensorF32 values({30, 6}, flat);
    std::vector<float> q{1, 1, 1, 1, 1, 1};
    std::vector<float> out = softmax_attention(q, keys, values);
    for (std::size_t j = 0; j < 6; ++j)
        CHECK(out[j] == doctest::Approx(row[j]).epsilon(1e-6));
}

TEST_CASE("a single token gets weight one") {
    TensorF32 keys({1, 3}, {4, 5, 6});
    TensorF32 values({1, 3}, {-1, 2, 7});
    std::vector<float> q{0.5, 0.5, 0.5};
    CHECK(softmax_attention(q, keys, values) == std::vector<float>{-1, 2, 7});
}

TEST_CASE("extreme score spreads stay finite") {
    TensorF32 keys = random_grid(8, 20, 4, 100.0);
    TensorF32 values = random_grid(9, 20, 4);
    Rng rng(10);
    std::vector<float> q(4);
    for (float& x : q) x = static_cast<float>(100.0 * rng.normal());
    for (float v : softmax_attention(q, keys, values)) CHECK(std::isfinite(v));
}

TEST_CASE("exact top-k agrees with scoring plus selection") {
    TensorF32 keys = random_grid(11, 64, 8);
    Rng rng(12);
    std::vector<float> q(8);
    for (float& x : q) x = static_cast<float>(rng.normal());
    std::vector<float> scores = exact_scores(q, keys);

    std::vector<std::size_t> got = exact_topk(q, keys, 10);
    REQUIRE(got.size() == 10);
    float cutoff = scores[got.back()];
    std::size_t better = 0;
    for (float sc : scores) better += sc > cutoff ? 1 : 0;
    CHECK(better < 10);
    for (std::size_t i = 1; i < got.size(); ++i)
        CHECK(scores[got[i - 1]] >= scores[got[i]]);
}

namespace {

struct StoreFixture {
    TensorF32 keys, values;
    KvStore store{1, 1, 8, 4096, CachePolicy::kLru};
    SegmentConfig seg{4, 6, 0};

    StoreFixture()
        : keys(random_grid(21, 40, 8)), values(random_grid(22, 40, 8)) {
        store.offload_prefill(0, 0, keys, values, seg);
    }
};

}  // namespace

TEST_CASE("selective attention concatenates init, selected, local") {
    StoreFixture fx;
    std::vector<float> q(8, 0.3f);
    std::vector<std::size_t> picked{25, 7, 18};  // unsorted on purpose

    // oracle: rows 0..3, then 7, 18, 25, then 34..39, in that order
    std::vector<std::size_t> order{0, 1, 2, 3, 7, 18, 25, 34, 35, 36, 37, 38, 39};
    TensorF32 sub_k({order.size(), 8}, std::vector<float>(order.size() * 8));
    TensorF32 sub_v({order.size(), 8}, std::vector<float>(order.size() * 8));
    for (std::size_t i = 0; i < order.size(); ++i) {
        std::copy(fx.keys.row(order[i]), fx.keys.row(order[i]) + 8, sub_k.row(i));
        std::copy(fx.values.row(order[i]), fx.values.row(order[i]) + 8, sub_v.row(i));
    }

    std::vector<float> got = selective_attention(q, fx.store.state(0, 0), picked);
    std::vector<float> want = softmax_attention(q, sub_k, sub_v);
    CHECK(got == want);
}

TEST_CASE("selecting the whole middle reproduces full attention") {
    StoreFixture fx;
    std::vector<std::size_t> all_middle;
    for (std::size_t id = 4; id < 34; ++id) all_middle.push_back(id);
    Rng rng(23);
    std::vector<float> q(8);
    for (float& x : q) x = static_cast<float>(rng.normal());

    std::vector<float> got = selective_attention(q, fx.store.state(0, 0), all_middle);
    std::vector<float> want = softmax_attention(q, fx.keys, fx.values);
    CHECK(got == want);
}

TEST_CASE("selective attention rejects bad middle ids") {
    StoreFixture fx;
    std::vector<float> q(8, 0.1f);
    std::vector<std::size_t> dup{7, 7};
    std::vector<std::size_t> local_id{35};
    std::vector<std::size_t> init_id{1};
    CHECK_THROWS_AS(selective_attention(q, fx.store.state(0, 0), dup),
                    std::invalid_argument);
    CHECK_THROWS_AS(selective_attention(q, fx.store.state(0, 0), local_id),
                    std::out_of_range);
    CHECK_THROWS_AS(selective_attention(q, fx.store.state(0, 0), init_id),
                    std::out_of_range);
}

TEST_CASE("group attention runs each query row independently") {
    TensorF32 keys = random_grid(31, 24, 6);
    TensorF32 values = random_grid(32, 24, 6);
    TensorF32 queries = random_grid(33, 3, 6);

    TensorF32 out = gqa_group_attention(queries, keys, values);
    REQUIRE(out.dims == std::vector<std::size_t>{3, 6});
    for (std::size_t r = 0; r < 3; ++r) {
        std::vector<float> want =
            softmax_attention({queries.row(r), 6}, keys, values);
        CHECK(std::memcmp(out.row(r), want.data(), 6 * sizeof(float)) == 0);
    }
}
