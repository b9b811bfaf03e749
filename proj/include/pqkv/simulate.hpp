#pragma once

#include <span>

#include "pqkv/cost_model.hpp"
#include "pqkv/model.hpp"
#include "pqkv/pq.hpp"
#include "pqkv/timeline.hpp"

namespace pqkv {

/// Prefill pipeline: per layer in order, compute (Time_comp(s)/L on the GPU
/// stream), K/V offload (2*2*h_kv*s*d_h bytes on the transfer link), then the
/// layer's clustering batch on the CPU pool. Every layer saturates the pool
/// (h_kv*m parallel slots by default), so a layer's clustering occupies it for
/// Time_clus(s, T)/pool_width.
Timeline simulate_prefill(const ModelShape& shape, std::size_t s, const CostModel& model,
                          std::size_t iterations, std::size_t pool_width);

inline std::size_t default_pool_width(const ModelShape& shape, const PqConfig& cfg) {
    return shape.num_kv_heads * cfg.m;
}

/// One decode step. Per layer: the PQ code transfer (h_kv*m*s*b/8 bytes) rides
/// the link a layer ahead when prefetch is on (layer 0's codes are resident
/// before the step), otherwise it serializes at the layer boundary; pq_search
/// runs on compute; the top-k K/V fetch (2*2*h_kv*(1-hit_rate)*k*d_h bytes)
/// must follow pq_search and is the only transfer that cannot be hidden;
/// attention+FFN close the layer. cluster_ready, when given (one entry per
/// layer, relative to step start), stalls each layer until its codebooks are
/// ready and surfaces the stall as a wait_cluster event.
Timeline simulate_decode_step(const ModelShape& shape, std::size_t s,
                              const CostModel& model, const SegmentConfig& seg,
                              const PqConfig& cfg, double hit_rate, bool prefetch,
                              std::span<const double> cluster_ready = {});

/// Prefill makespan plus the first decode step's makespan.
double time_to_second_token(const Timeline& prefill, const Timeline& first_decode);

}  // namespace pqkv
