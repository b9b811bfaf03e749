#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "pqkv/cost_model.hpp"
#include "pqkv/kv_store.hpp"
#include "pqkv/model.hpp"
#include "pqkv/workload.hpp"

namespace pqkv {

struct RecallRow {
    std::size_t m = 0, b = 0, k = 0;
    std::uint64_t seed = 0;
    double recall = 0.0;
    double random_recall = 0.0;
    double output_error = 0.0;
    double random_output_error = 0.0;
};

struct RecallReport {
    std::vector<RecallRow> rows;
};

struct RecallGrid {
    std::vector<std::size_t> ms{2};
    std::vector<std::size_t> bs{6};
    std::vector<std::size_t> ks{64};
    std::vector<std::uint64_t> seeds{1};
    std::size_t max_iter = 15;
};

/// For every (m, b, seed): builds a PQ index over all s keys, then for every k
/// compares PQ selection against the exact top-k and a seeded random-selection
/// baseline, reporting recall and attention output error (Frobenius, relative
/// to full attention over the whole sequence). Metrics average over kv heads.
RecallReport run_recall(const WorkloadSpec& base, const RecallGrid& grid);

// columns: m,b,k,seed,recall,random_recall,output_error,random_output_error
void write_recall_csv(std::ostream& out, const RecallReport& report);

struct E2eConfig {
    WorkloadSpec workload;
    std::size_t num_layers = 2;
    std::size_t num_heads = 0;  // 0 -> h_kv * g
    SegmentConfig seg;
    std::size_t m = 2;
    std::size_t b = 6;
    std::size_t pq_max_iter = 0;  // 0 -> adaptive schedule t_max(model, s)
    std::size_t block_size = 128;
    std::size_t k_cache = 32;
    CachePolicy policy = CachePolicy::kLru;
    std::size_t cache_capacity_tokens = 4096;
    std::size_t steps = 8;
    CostModel model;
    std::size_t clip_lo = 3;
    std::size_t clip_hi = 30;
    std::size_t pool_width = 0;  // 0 -> h_kv * m
    bool prefetch = true;
    bool trace = false;
};

struct E2eStepRow {
    std::size_t step = 0;
    double recall = 0.0;
    double output_error = 0.0;
    double hit_rate = 0.0;
    double simulated_tpot = 0.0;
};

struct E2eReport {
    double tt2t = 0.0;
    std::size_t iterations = 0;  // clustering iterations the schedule granted
    std::vector<E2eStepRow> steps;
    std::vector<TraceRow> trace;
};

/// Desk-scale end-to-end run. The data path (prefill offload, PQ construction
/// with the adaptive iteration budget, per-step selection, fetch, selective
/// attention vs the full-attention oracle) runs on one representative layer;
/// the timing side scales to num_layers through the pipeline simulators. TT2T
/// pairs the prefill makespan with a cold-cache first decode step.
E2eReport run_e2e(const E2eConfig& cfg);

// columns: step,recall,output_error,hit_rate,simulated_tpot; the first data
// row carries step=tt2t with only the makespan column filled
void write_e2e_csv(std::ostream& out, const E2eReport& report);

}  // namespace pqkv
