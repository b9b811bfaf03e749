#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <map>
#include <span>
#include <unordered_map>
#include <vector>

#include "pqkv/model.hpp"
#include "pqkv/pq.hpp"
#include "pqkv/tensor.hpp"

namespace pqkv {

struct KvEntry {
    std::vector<float> key;
    std::vector<float> value;
};

enum class CachePolicy { kLru, kLfu };

/// Result of one block-granular fetch. hits + misses always equals the number
/// of distinct blocks the request touched; entries come back in request order
/// and are bit-identical to what was offloaded.
struct FetchReport {
    std::vector<KvEntry> entries;
    std::size_t hits = 0;
    std::size_t misses = 0;
    std::size_t bytes_from_slow_tier = 0;
};

struct OffloadReport {
    std::size_t init_tokens = 0;
    std::size_t local_tokens = 0;
    std::size_t middle_tokens = 0;
    std::size_t middle_blocks = 0;
    std::size_t bytes_offloaded = 0;  // middle K/V at 2 bytes per element
};

struct CacheStats {
    std::size_t hits = 0;
    std::size_t misses = 0;
    std::size_t requests = 0;  // distinct block lookups
    std::size_t occupancy_tokens = 0;
    double hit_rate = 0.0;
};

struct TraceRow {
    std::size_t step = 0;  // per-state fetch ordinal, 1-based
    std::size_t layer = 0;
    std::size_t kv_head = 0;
    std::size_t block_id = 0;
    bool hit = false;
};

/// One (layer, kv_head) slice of the store: resident init segment, sliding
/// local ring (oldest first), evicted middle tokens on the slow tier, and a
/// bounded fast-tier block cache.
struct HeadState {
    struct CachedBlock {
        std::map<std::size_t, KvEntry> snapshot;
        std::size_t freq = 0;
        std::uint64_t last_used = 0;
    };

    std::vector<KvEntry> init_entries;
    std::deque<std::pair<std::size_t, KvEntry>> local;
    std::unordered_map<std::size_t, KvEntry> middle;
    std::map<std::size_t, CachedBlock> cache;

    std::size_t total_tokens = 0;  // next fresh token id
    std::size_t occupancy_tokens = 0;
    std::size_t hits = 0, misses = 0, requests = 0;
    std::size_t fetch_calls = 0;
    std::uint64_t tick = 0;
    bool prefilled = false;
};

/// Tiered KV manager for all (layer, kv_head) pairs. Caches are private per
/// pair; eviction follows the configured policy (LFU ties break toward the
/// least recently used block, then the lower block id). The cache-update phase
/// after each fetch is accounting-only and never delays the returned entries.
class KvStore {
public:
    KvStore(std::size_t num_layers, std::size_t num_kv_heads, std::size_t block_size,
            std::size_t cache_capacity_tokens, CachePolicy policy);

    /// Splits a prefilled sequence into init/local/middle, moving the middle
    /// K/V to the slow tier in blocks of block_size by token id.
    OffloadReport offload_prefill(std::size_t layer, std::size_t kv_head,
                                  const TensorF32& keys, const TensorF32& values,
                                  const SegmentConfig& seg);

    /// Pops the oldest local token into the middle segment, encodes its key
    /// into `index` via append_code, then admits the new entry to the local
    /// ring. Returns the evicted token id.
    std::size_t evict_local_append(std::size_t layer, std::size_t kv_head,
                                   KvEntry new_entry, PqIndex& index);

    /// Serves middle tokens at block granularity, counting one hit or miss per
    /// distinct block, then refreshes the cache with the top-k_cache blocks of
    /// this request ranked by requested-token count (ties toward the lower
    /// block id).
    FetchReport fetch_topk(std::size_t layer, std::size_t kv_head,
                           std::span<const std::size_t> token_ids, std::size_t k_cache);

    CacheStats cache_stats(std::size_t layer, std::size_t kv_head) const;

    const HeadState& state(std::size_t layer, std::size_t kv_head) const;

    std::size_t block_size() const { return block_size_; }
    std::size_t cache_capacity() const { return cache_capacity_; }

    void enable_trace() { trace_enabled_ = true; }
    const std::vector<TraceRow>& trace() const { return trace_; }

private:
    HeadState& state_mut(std::size_t layer, std::size_t kv_head);
    void evict_until_fits(HeadState& st, std::size_t incoming_tokens);
    std::size_t token_bytes() const { return 2 * 2 * head_dim_; }  // fp16 K + V

    std::size_t num_layers_, num_kv_heads_, block_size_, cache_capacity_;
    CachePolicy policy_;
    std::size_t head_dim_ = 0;  // fixed by the first offload
    std::vector<HeadState> states_;
    bool trace_enabled_ = false;
    std::vector<TraceRow> trace_;
};

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows);

}  // namespace pqkv
