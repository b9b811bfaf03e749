#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <cstring>
#include <map>
#include <sstream>
#include <vector>

#include "pqkv/kv_store.hpp"
#include "pqkv/pq.hpp"
#include "pqkv/rng.hpp"

using namespace pqkv;

namespace {

struct Fixture {
    TensorF32 keys, values;
    std::size_t s, d_h;

    Fixture(std::uint64_t seed, std::size_t s_, std::size_t d) : s(s_), d_h(d) {
        Rng rng(seed);
        std::vector<float> k(s * d_h), v(s * d_h);
        for (float& x : k) x = static_cast<float>(rng.normal());
        for (float& x : v) x = static_cast<float>(rng.normal());
        keys = TensorF32({s, d_h}, std::move(k));
        values = TensorF32({s, d_h}, std::move(v));
    }
};

PqIndex index_for(const Fixture& f, std::size_t m, std::size_t b) {
    return pq_construct(f.keys, PqConfig::create(m, b, f.d_h), 8, 17);
}

// textbook block cache in units of whole blocks; valid as an oracle whenever
// every request touches exactly one block, every block is full, and capacity
// is a multiple of the block size
struct ReferenceCache {
    struct Slot {
        std::size_t freq = 0;
        std::uint64_t last = 0;
    };
    std::map<std::size_t, Slot> slots;
    std::size_t capacity_blocks;
    CachePolicy policy;
    std::uint64_t tick = 0;

    explicit ReferenceCache(std::size_t cap, CachePolicy p)
        : capacity_blocks(cap), policy(p) {}

    bool access(std::size_t block) {
        auto it = slots.find(block);
        if (it != slots.end()) {
            it->second.freq += 1;
            it->second.last = ++tick;
            return true;
        }
        if (slots.size() == capacity_blocks) {
            auto victim = slots.begin();
            for (auto c = std::next(slots.begin()); c != slots.end(); ++c) {
                bool worse = policy == CachePolicy::kLru
                                 ? c->second.last < victim->second.last
                                 : c->second.freq < victim->second.freq ||
                                       (c->second.freq == victim->second.freq &&
                                        c->second.last < victim->second.last);
                if (worse) victim = c;
            }
            slots.erase(victim);
        }
        slots.emplace(block, Slot{1, ++tick});
        return false;
    }
};

}  // namespace

TEST_CASE("offload splits segments and counts blocks") {
    Fixture f(1, 1000, 8);
    KvStore store(1, 1, 128, 4096, CachePolicy::kLru);
    SegmentConfig seg{16, 64, 0};
    OffloadReport rep = store.offload_prefill(0, 0, f.keys, f.values, seg);

    CHECK(rep.init_tokens == 16);
    CHECK(rep.local_tokens == 64);
    CHECK(rep.middle_tokens == 920);
    CHECK(rep.middle_blocks == 8);  // ids 16..935 span blocks 0..7
    CHECK(rep.bytes_offloaded == 920 * 2 * 2 * 8);

    const HeadState& st = store.state(0, 0);
    CHECK(st.init_entries.size() == 16);
    CHECK(st.local.size() == 64);
    CHECK(st.middle.size() == 920);
    CHECK(st.total_tokens == 1000);
    CHECK(st.local.front().first == 936);
    CHECK(st.local.back().first == 999);
    CHECK(st.middle.contains(16));
    CHECK(st.middle.contains(935));
    CHECK(!st.middle.contains(15));
    CHECK(!st.middle.contains(936));

    CHECK_THROWS_AS(store.offload_prefill(0, 0, f.keys, f.values, seg),
                    std::logic_error);
}

TEST_CASE("offload rejects a sequence shorter than the resident segments") {
    Fixture f(2, 70, 4);
    KvStore store(1, 1, 16, 64, CachePolicy::kLru);
    SegmentConfig seg{16, 64, 0};
    CHECK_THROWS_AS(store.offload_prefill(0, 0, f.keys, f.values, seg),
                    std::invalid_argument);
}

TEST_CASE("fetch returns bit-identical entries in request order") {
    Fixture f(3, 256, 8);
    KvStore store(1, 1, 32, 1024, CachePolicy::kLru);
    store.offload_prefill(0, 0, f.keys, f.values, SegmentConfig{8, 8, 0});

    std::vector<std::size_t> want{200, 19, 77};  // deliberately unsorted
    FetchReport rep = store.fetch_topk(0, 0, want, 4);
    REQUIRE(rep.entries.size() == 3);
    for (std::size_t i = 0; i < want.size(); ++i) {
        CHECK(std::memcmp(rep.entries[i].key.data(), f.keys.row(want[i]),
                          8 * sizeof(float)) == 0);
        CHECK(std::memcmp(rep.entries[i].value.data(), f.values.row(want[i]),
                          8 * sizeof(float)) == 0);
    }
    CHECK(rep.hits == 0);
    CHECK(rep.misses == 3);
    CHECK(rep.bytes_from_slow_tier == 3 * 2 * 2 * 8);
}

TEST_CASE("tokens sharing a block count as one lookup") {
    Fixture f(4, 256, 4);
    KvStore store(1, 1, 128, 1024, CachePolicy::kLru);
    store.offload_prefill(0, 0, f.keys, f.values, SegmentConfig{8, 8, 0});

    // 100 and 101 share block 0; 200 is block 1; 100 repeats
    FetchReport rep = store.fetch_topk(0, 0, std::vector<std::size_t>{100, 101, 200, 100}, 4);
    CHECK(rep.entries.size() == 4);
    CHECK(rep.hits + rep.misses == 2);
    CHECK(rep.bytes_from_slow_tier == 3 * 2 * 2 * 4);  // distinct tokens only

    CacheStats cs = store.cache_stats(0, 0);
    CHECK(cs.requests == 2);
}

TEST_CASE("a warm block hits on the second request") {
    Fixture f(5, 256, 4);
    KvStore store(1, 1, 32, 1024, CachePolicy::kLru);
    store.offload_prefill(0, 0, f.keys, f.values, SegmentConfig{8, 8, 0});

    CHECK(store.fetch_topk(0, 0, std::vector<std::size_t>{40}, 1).misses == 1);
    FetchReport again = store.fetch_topk(0, 0, std::vector<std::size_t>{40}, 1);
    CHECK(again.hits == 1);
    CHECK(again.bytes_from_slow_tier == 0);
}

TEST_CASE("zero capacity never caches") {
    Fixture f(6, 128, 4);
    KvStore store(1, 1, 16, 0, CachePolicy::kLfu);
    store.offload_prefill(0, 0, f.keys, f.values, SegmentConfig{4, 4, 0});
    for (int i = 0; i < 5; ++i) {
        FetchReport rep = store.fetch_topk(0, 0, std::vector<std::size_t>{60}, 2);
        CHECK(rep.hits == 0);
        CHECK(rep.misses == 1);
    }
    CHECK(store.cache_stats(0, 0).occupancy_tokens == 0);
}

TEST_CASE("fetch rejects ids outside the middle segment") {
    Fixture f(7, 128, 4);
    KvStore store(1, 1, 16, 64, CachePolicy::kLru);
    store.offload_prefill(0, 0, f.keys, f.values, SegmentConfig{4, 4, 0});
    CHECK_THROWS_AS(store.fetch_topk(0, 0, std::vector<std::size_t>{2}, 1),
                    std::out_of_range);  // init
    CHECK_THROWS_AS(store.fetch_topk(0, 0, std::vector<std::size_t>{126}, 1),
                    std::out_of_range);  // local
    CHECK_THROWS_AS(store.fetch_topk(0, 0, std::vector<std::size_t>{4000}, 1),
                    std::out_of_range);
    CHECK(store.fetch_topk(0, 0, std::vector<std::size_t>{}, 1).entries.empty());
}

TEST_CASE("cache update keeps the most requested blocks, ties low") {
    Fixture f(8, 512, 4);
    KvStore store(1, 1, 64, 4096, CachePolicy::kLru);
    store.offload_prefill(0, 0, f.keys, f.values, SegmentConfig{8, 8, 0});

    // block 2 gets two tokens, blocks 1 and 4 one each; k_cache = 2
    store.fetch_topk(0, 0, std::vector<std::size_t>{130, 140, 70, 280}, 2);
    const HeadState& st = store.state(0, 0);
    CHECK(st.cache.size() == 2);
    CHECK(st.cache.contains(2));
    CHECK(st.cache.contains(1));  // lower block id wins the tie against 4
    CHECK(!st.cache.contains(4));
}

TEST_CASE("eviction follows the policy") {
    // block_size 1 over a middle of ids 0..8 so each token is its own block
    SegmentConfig seg{0, 1, 0};
    auto run = [&](CachePolicy policy) {
        Fixture f(9, 10, 4);
        KvStore store(1, 1, 1, 2, policy);
        store.offload_prefill(0, 0, f.keys, f.values, seg);
        auto touch = [&](std::size_t id) {
            return store.fetch_topk(0, 0, std::vector<std::size_t>{id}, 1).hits == 1;
        };
        touch(0);
        touch(0);
        touch(1);
        touch(2);  // evicts: LRU drops 0 (stalest), LFU drops 1 (freq 1)
        return touch(0);
    };
    CHECK(run(CachePolicy::kLru) == false);
    CHECK(run(CachePolicy::kLfu) == true);
}

TEST_CASE("replayed request stream matches the reference cache") {
    // single-block requests over full blocks with block-aligned capacity keep
    // the store equivalent to a textbook block cache
    for (CachePolicy policy : {CachePolicy::kLru, CachePolicy::kLfu}) {
        Fixture f(10, 512, 4);
        const std::size_t block = 16;
        KvStore store(1, 1, block, 4 * block, policy);
        store.offload_prefill(0, 0, f.keys, f.values, SegmentConfig{0, block, 0});
        ReferenceCache ref(4, policy);

        Rng rng(2024);
        std::size_t middle_blocks = (512 - block) / block;
        for (int step = 0; step < 400; ++step) {
            std::size_t blk = rng.index(middle_blocks);
            std::size_t id = blk * block + rng.index(block);
            bool want_hit = ref.access(blk);
            FetchReport rep = store.fetch_topk(0, 0, std::vector<std::size_t>{id}, 1);
            CHECK(rep.hits == (want_hit ? 1u : 0u));
            CHECK(store.cache_stats(0, 0).occupancy_tokens <= store.cache_capacity());
        }
        CacheStats cs = store.cache_stats(0, 0);
        CHECK(cs.requests == 400);
        CHECK(cs.hits + cs.misses == cs.requests);
        CHECK(cs.hit_rate == doctest::Approx(static_cast<double>(cs.hits) / 400));
    }
}

TEST_CASE("evict then append keeps ids and codes consistent") {
    Fixture f(11, 200, 8);
    KvStore store(1, 1, 32, 512, CachePolicy::kLru);
    SegmentConfig seg{8, 16, 0};
    store.offload_prefill(0, 0, f.keys, f.values, seg);

    PqIndex index = index_for(f, 2, 4);
    std::size_t size_before = index.size();

    KvEntry fresh;
    fresh.key.assign(8, 0.25f);
    fresh.value.assign(8, -1.0f);
    std::size_t evicted = store.evict_local_append(0, 0, fresh, index);

    CHECK(evicted == 184);  // oldest local token: s - n_local
    CHECK(index.size() == size_before + 1);
    const HeadState& st = store.state(0, 0);
    CHECK(st.middle.contains(184));
    CHECK(st.local.size() == 16);
    CHECK(st.local.back().first == 200);
    CHECK(st.total_tokens == 201);

    // the appended code is the encoding of the evicted key
    std::vector<std::uint16_t> want = pq_encode_one(st.middle.at(184).key, index);
    CHECK(std::memcmp(index.code_row(size_before), want.data(),
                      want.size() * sizeof(std::uint16_t)) == 0);

    KvEntry bad;
    bad.key.assign(4, 0.0f);
    bad.value.assign(8, 0.0f);
    CHECK_THROWS_AS(store.evict_local_append(0, 0, bad, index), std::invalid_argument);
}

TEST_CASE("a cached block serves stale tokens from the slow tier until refreshed") {
    Fixture f(12, 100, 4);
    KvStore store(1, 1, 256, 512, CachePolicy::kLru);
    SegmentConfig seg{4, 8, 0};
    store.offload_prefill(0, 0, f.keys, f.values, seg);  // middle 4..91, one block
    PqIndex index = index_for(f, 2, 3);

    store.fetch_topk(0, 0, std::vector<std::size_t>{50}, 1);  // caches block 0

    KvEntry fresh;
    fresh.key.assign(4, 1.0f);
    fresh.value.assign(4, 1.0f);
    store.evict_local_append(0, 0, fresh, index);  // token 92 joins block 0

    FetchReport stale = store.fetch_topk(0, 0, std::vector<std::size_t>{92, 50}, 0);
    CHECK(stale.hits == 1);
    CHECK(stale.misses == 0);
    CHECK(stale.bytes_from_slow_tier == 1 * 2 * 2 * 4);  // only token 92

    // k_cache 0 above skipped the refresh; a refreshing fetch heals the block
    store.fetch_topk(0, 0, std::vector<std::size_t>{92}, 1);
    FetchReport healed = store.fetch_topk(0, 0, std::vector<std::size_t>{92}, 1);
    CHECK(healed.hits == 1);
    CHECK(healed.bytes_from_slow_tier == 0);
}

TEST_CASE("per head caches are private") {
    Fixture f(13, 128, 4);
    KvStore store(2, 2, 16, 256, CachePolicy::kLru);
    for (std::size_t layer = 0; layer < 2; ++layer)
        for (std::size_t head = 0; head < 2; ++head)
            store.offload_prefill(layer, head, f.keys, f.values, SegmentConfig{4, 4, 0});

    store.fetch_topk(0, 0, std::vector<std::size_t>{60}, 1);
    CHECK(store.fetch_topk(1, 0, std::vector<std::size_t>{60}, 1).misses == 1);
    CHECK(store.fetch_topk(0, 1, std::vector<std::size_t>{60}, 1).misses == 1);
    CHECK(store.cache_stats(0, 0).requests == 1);
    CHECK(store.cache_stats(1, 1).requests == 0);
    CHECK_THROWS_AS(store.state(2, 0), std::out_of_range);
}

TEST_CASE("trace records one row per block lookup") {
    Fixture f(14, 128, 4);
    KvStore store(1, 2, 16, 256, CachePolicy::kLru);
    store.enable_trace();
    for (std::size_t head = 0; head < 2; ++head)
        store.offload_prefill(0, head, f.keys, f.values, SegmentConfig{4, 4, 0});

    store.fetch_topk(0, 0, std::vector<std::size_t>{20, 40}, 2);
    store.fetch_topk(0, 1, std::vector<std::size_t>{20}, 2);
    store.fetch_topk(0, 0, std::vector<std::size_t>{20}, 2);

    const std::vector<TraceRow>& rows = store.trace();
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].step == 1);
    CHECK(rows[0].block_id == 1);
    CHECK(!rows[0].hit);
    CHECK(rows[1].block_id == 2);
    CHECK(rows[2].kv_head == 1);
    CHECK(rows[2].step == 1);  // ordinals count per state
    CHECK(rows[3].step == 2);
    CHECK(rows[3].hit);

    std::stringstream ss;
    write_trace_csv(ss, rows);
    CHECK(ss.str().rfind("step,layer,kv_head,block_id,hit\n", 0) == 0);
    CHECK(ss.str().find("1,0,0,1,0\n") != std::string::npos);
}
