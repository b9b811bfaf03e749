#include "pqkv/kv_store.hpp"

#include <algorithm>
#include <ostream>
#include <set>
#include <stdexcept>

namespace pqkv {

KvStore::KvStore(std::size_t num_layers, std::size_t num_kv_heads, std::size_t block_size,
                 std::size_t cache_capacity_tokens, CachePolicy policy)
    : num_layers_(num_layers), num_kv_heads_(num_kv_heads), block_size_(block_size),
      cache_capacity_(cache_capacity_tokens), policy_(policy) {
    if (num_layers < 1 || num_kv_heads < 1)
        throw std::invalid_argument("kv_store: need at least one layer and kv head");
    if (block_size < 1) throw std::invalid_argument("kv_store: block_size must be >= 1");
    states_.resize(num_layers * num_kv_heads);
}

HeadState& KvStore::state_mut(std::size_t layer, std::size_t kv_head) {
    if (layer >= num_layers_ || kv_head >= num_kv_heads_)
        throw std::out_of_range("kv_store: layer or kv_head out of range");
    return states_[layer * num_kv_heads_ + kv_head];
}

const HeadState& KvStore::state(std::size_t layer, std::size_t kv_head) const {
    if (layer >= num_layers_ || kv_head >= num_kv_heads_)
        throw std::out_of_range("kv_store: layer or kv_head out of range");
    return states_[layer * num_kv_heads_ + kv_head];
}

OffloadReport KvStore::offload_prefill(std::size_t layer, std::size_t kv_head,
                                       const TensorF32& keys, const TensorF32& values,
                                       const SegmentConfig& seg) {
    HeadState& st = state_mut(layer, kv_head);
    if (st.prefilled) throw std::logic_error("kv_store: state already prefilled");
    seg.validate();
    keys.validate();
    values.validate();
    if (keys.ndim() != 2 || values.ndim() != 2 || keys.dims != values.dims)
        throw std::invalid_argument("kv_store: keys and values must be 2-d with equal dims");
    std::size_t s = keys.dims[0], d_h = keys.dims[1];
    if (seg.n_init + seg.n_local > s)
        throw std::invalid_argument("kv_store: segment overflow, n_init + n_local > s");
    if (head_dim_ == 0) head_dim_ = d_h;
    if (d_h != head_dim_) throw std::invalid_argument("kv_store: head_dim mismatch");

    auto entry_at = [&](std::size_t i) {
        KvEntry e;
        e.key.assign(keys.row(i), keys.row(i) + d_h);
        e.value.assign(values.row(i), values.row(i) + d_h);
        return e;
    };

    OffloadReport rep;
    std::set<std::size_t> blocks;
    for (std::size_t i = 0; i < s; ++i) {
        if (i < seg.n_init) {
            st.init_entries.push_back(entry_at(i));
            ++rep.init_tokens;
        } else if (i >= s - seg.n_local) {
            st.local.emplace_back(i, entry_at(i));
            ++rep.local_tokens;
        } else {
            st.middle.emplace(i, entry_at(i));
            blocks.insert(i / block_size_);
            ++rep.middle_tokens;
        }
    }
    st.total_tokens = s;
    st.prefilled = true;
    rep.middle_blocks = blocks.size();
    rep.bytes_offloaded = rep.middle_tokens * token_bytes();
    return rep;
}

std::size_t KvStore::evict_local_append(std::size_t layer, std::size_t kv_head,
                                        KvEntry new_entry, PqIndex& index) {
    HeadState& st = state_mut(layer, kv_head);
    if (st.local.empty()) throw std::logic_error("kv_store: local segment is empty");
    if (new_entry.key.size() != head_dim_ || new_entry.value.size() != head_dim_)
        throw std::invalid_argument("kv_store: entry dim mismatch");

    auto [evicted_id, entry] = std::move(st.local.front());
    st.local.pop_front();
    append_code(index, pq_encode_one(entry.key, index));
    st.middle.emplace(evicted_id, std::move(entry));
    st.local.emplace_back(st.total_tokens++, std::move(new_entry));
    return evicted_id;
}

// Removes victims per policy until `incoming_tokens` fit. LRU evicts the
// stalest block; LFU the least frequent, ties by least recent use then lower
// block id (the map iteration order makes the id tie-break implicit).
void KvStore::evict_until_fits(HeadState& st, std::size_t incoming_tokens) {
    while (!st.cache.empty() &&
           st.occupancy_tokens + incoming_tokens > cache_capacity_) {
        auto victim = st.cache.begin();
        for (auto it = std::next(st.cache.begin()); it != st.cache.end(); ++it) {
            bool worse;
            if (policy_ == CachePolicy::kLru) {
                worse = it->second.last_used < victim->second.last_used;
            } else {
                worse = it->second.freq < victim->second.freq ||
                        (it->second.freq == victim->second.freq &&
                         it->second.last_used < victim->second.last_used);
            }
            if (worse) victim = it;
        }
        st.occupancy_tokens -= victim->second.snapshot.size();
        st.cache.erase(victim);
    }
}

FetchReport KvStore::fetch_topk(std::size_t layer, std::size_t kv_head,
                                std::span<const std::size_t> token_ids,
                                std::size_t k_cache) {
    HeadState& st = state_mut(layer, kv_head);
    for (std::size_t id : token_ids)
        if (!st.middle.contains(id))
            throw std::out_of_range("kv_store: token " + std::to_string(id) +
                                    " is not a middle token");
    ++st.fetch_calls;

    // distinct requested tokens per block
    std::map<std::size_t, std::set<std::size_t>> by_block;
    for (std::size_t id : token_ids) by_block[id / block_size_].insert(id);

    FetchReport rep;
    for (auto& [block_id, ids] : by_block) {
        auto it = st.cache.find(block_id);
        bool hit = it != st.cache.end();
        if (hit) {
            ++rep.hits;
            it->second.freq += 1;
            it->second.last_used = ++st.tick;
            for (std::size_t id : ids)
                if (!it->second.snapshot.contains(id))  // appended after caching
                    rep.bytes_from_slow_tier += token_bytes();
        } else {
            ++rep.misses;
            rep.bytes_from_slow_tier += ids.size() * token_bytes();
        }
        if (trace_enabled_)
            trace_.push_back({st.fetch_calls, layer, kv_head, block_id, hit});
    }
    st.hits += rep.hits;
    st.misses += rep.misses;
    st.requests += by_block.size();

    // the middle segment is authoritative; cached copies are bit-identical
    rep.entries.reserve(token_ids.size());
    for (std::size_t id : token_ids) rep.entries.push_back(st.middle.at(id));

    // cache update: top-k_cache blocks of this request by requested-token
    // count, ties toward the lower block id
    std::vector<std::pair<std::size_t, std::size_t>> ranked;  // (count, block)
    ranked.reserve(by_block.size());
    for (auto& [block_id, ids] : by_block) ranked.emplace_back(ids.size(), block_id);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    if (ranked.size() > k_cache) ranked.resize(k_cache);

    for (auto& [count, block_id] : ranked) {
        std::map<std::size_t, KvEntry> snapshot;
        for (std::size_t id = block_id * block_size_; id < (block_id + 1) * block_size_; ++id) {
            auto mit = st.middle.find(id);
            if (mit != st.middle.end()) snapshot.emplace(id, mit->second);
        }
        // a refresh re-inserts with its counters kept, so stale snapshots heal
        std::size_t freq = 1;
        std::uint64_t last = 0;
        auto it = st.cache.find(block_id);
        bool was_cached = it != st.cache.end();
        if (was_cached) {
            freq = it->second.freq;
            last = it->second.last_used;
            st.occupancy_tokens -= it->second.snapshot.size();
            st.cache.erase(it);
        }
        if (snapshot.size() > cache_capacity_) continue;  // cannot fit even alone
        evict_until_fits(st, snapshot.size());
        std::size_t tokens = snapshot.size();
        st.cache.emplace(block_id, HeadState::CachedBlock{std::move(snapshot), freq,
                                                          was_cached ? last : ++st.tick});
        st.occupancy_tokens += tokens;
    }
    return rep;
}

CacheStats KvStore::cache_stats(std::size_t layer, std::size_t kv_head) const {
    const HeadState& st = state(layer, kv_head);
    CacheStats cs;
    cs.hits = st.hits;
    cs.misses = st.misses;
    cs.requests = st.requests;
    cs.occupancy_tokens = st.occupancy_tokens;
    cs.hit_rate = st.requests ? static_cast<double>(st.hits) / st.requests : 0.0;
    return cs;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows) {
    out << "step,layer,kv_head,block_id,hit\n";
    for (const TraceRow& r : rows)
        out << r.step << ',' << r.layer << ',' << r.kv_head << ',' << r.block_id << ','
            << (r.hit ? 1 : 0) << '\n';
}

}  // namespace pqkv
