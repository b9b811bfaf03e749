#include "pqkv/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <tuple>

#include "pqkv/attention.hpp"
#include "pqkv/pq.hpp"
#include "pqkv/rng.hpp"
#include "pqkv/simulate.hpp"

namespace pqkv {

namespace {

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::vector<float> sum_query_rows(const TensorF32& queries) {
    std::vector<float> q(queries.dims[1], 0.0f);
    for (std::size_t r = 0; r < queries.dims[0]; ++r)
        for (std::size_t j = 0; j < q.size(); ++j) q[j] += queries.row(r)[j];
    return q;
}

TensorF32 gather_rows(const TensorF32& grid, const std::vector<std::size_t>& rows) {
    if (rows.empty()) throw std::invalid_argument("experiments: empty row selection");
    std::size_t d = grid.dims[1];
    TensorF32 out({rows.size(), d}, std::vector<float>(rows.size() * d));
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(grid.row(rows[i]), grid.row(rows[i]) + d, out.data.begin() + i * d);
    return out;
}

double relative_error(const TensorF32& got, const TensorF32& want) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < want.data.size(); ++i) {
        double diff = static_cast<double>(got.data[i]) - static_cast<double>(want.data[i]);
        num += diff * diff;
        den += static_cast<double>(want.data[i]) * static_cast<double>(want.data[i]);
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

// k distinct ids in [0, s) by partial Fisher-Yates
std::vector<std::size_t> random_ids(Rng& rng, std::size_t s, std::size_t k) {
    std::vector<std::size_t> pool(s);
    for (std::size_t i = 0; i < s; ++i) pool[i] = i;
    for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.index(s - i)]);
    pool.resize(k);
    return pool;
}

double overlap_fraction(const std::vector<std::size_t>& got,
                        const std::vector<std::size_t>& want) {
    if (want.empty()) return 1.0;
    std::vector<std::size_t> a = got, b = want;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<std::size_t> both;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                          std::back_inserter(both));
    return static_cast<double>(both.size()) / static_cast<double>(want.size());
}

}  // namespace

RecallReport run_recall(const WorkloadSpec& base, const RecallGrid& grid) {
    if (grid.ms.empty() || grid.bs.empty() || grid.ks.empty() || grid.seeds.empty())
        throw std::invalid_argument("recall: grid must not be empty");
    for (std::size_t k : grid.ks)
        if (k < 1 || k > base.s)
            throw std::invalid_argument("recall: k must be in [1, s]");

    RecallReport report;
    for (std::size_t m : grid.ms)
        for (std::size_t b : grid.bs)
            for (std::uint64_t seed : grid.seeds) {
                WorkloadSpec spec = base;
                spec.seed = seed;
                Workload w = gen_workload(spec);
                PqConfig cfg = PqConfig::create(m, b, spec.d_h);

                std::vector<RecallRow> rows(grid.ks.size());
                for (std::size_t ki = 0; ki < grid.ks.size(); ++ki)
                    rows[ki] = {m, b, grid.ks[ki], seed, 0.0, 0.0, 0.0, 0.0};

                Rng seeder(seed ^ 0x7ec411u);
                for (std::size_t head = 0; head < spec.h_kv; ++head) {
                    TensorF32 keys = head_slice(w.keys, head);
                    TensorF32 values = head_slice(w.values, head);
                    TensorF32 queries = head_slice(w.queries, head);
                    PqIndex index = pq_construct(keys, cfg, grid.max_iter,
                                                 seeder.fork_seed());
                    std::vector<float> scores = pq_score_gqa(queries, index);
                    std::vector<float> q_sum = sum_query_rows(queries);
                    TensorF32 full = gqa_group_attention(queries, keys, values);

                    for (std::size_t ki = 0; ki < grid.ks.size(); ++ki) {
                        std::size_t k = grid.ks[ki];
                        std::vector<std::size_t> exact = exact_topk(q_sum, keys, k);
                        std::vector<std::size_t> approx = approx_topk(scores, k);
                        std::vector<std::size_t> random = random_ids(seeder, spec.s, k);

                        auto err_of = [&](std::vector<std::size_t> ids) {
                            std::sort(ids.begin(), ids.end());
                            TensorF32 sel = gqa_group_attention(
                                queries, gather_rows(keys, ids), gather_rows(values, ids));
                            return relative_error(sel, full);
                        };
                        rows[ki].recall += overlap_fraction(approx, exact);
                        rows[ki].random_recall += overlap_fraction(random, exact);
                        rows[ki].output_error += err_of(approx);
                        rows[ki].random_output_error += err_of(random);
                    }
                }
                double inv = 1.0 / static_cast<double>(spec.h_kv);
                for (RecallRow& r : rows) {
                    r.recall *= inv;
                    r.random_recall *= inv;
                    r.output_error *= inv;
                    r.random_output_error *= inv;
                    report.rows.push_back(r);
                }
            }

    std::stable_sort(report.rows.begin(), report.rows.end(),
                     [](const RecallRow& a, const RecallRow& b) {
                         return std::tie(a.m, a.b, a.k, a.seed) <
                                std::tie(b.m, b.b, b.k, b.seed);
                     });
    return report;
}

void write_recall_csv(std::ostream& out, const RecallReport& report) {
    out << "m,b,k,seed,recall,random_recall,output_error,random_output_error\n";
    for (const RecallRow& r : report.rows)
        out << r.m << ',' << r.b << ',' << r.k << ',' << r.seed << ',' << fmt(r.recall)
            << ',' << fmt(r.random_recall) << ',' << fmt(r.output_error) << ','
            << fmt(r.random_output_error) << '\n';
}

E2eReport run_e2e(const E2eConfig& cfg) {
    const WorkloadSpec& spec = cfg.workload;
    std::size_t num_heads = cfg.num_heads ? cfg.num_heads : spec.h_kv * spec.g;
    ModelShape shape = ModelShape::create(1, cfg.num_layers, num_heads, spec.h_kv,
                                          spec.d_h);
    if (shape.group_size != spec.g)
        throw std::invalid_argument("e2e: num_heads / h_kv must equal the workload g");
    validate_shape(shape, cfg.seg, spec.s);
    cfg.model.validate();
    PqConfig pq_cfg = PqConfig::create(cfg.m, cfg.b, spec.d_h);

    std::size_t mid = spec.s - cfg.seg.n_init - cfg.seg.n_local;
    if (mid < 1) throw std::invalid_argument("e2e: middle segment must be non-empty");
    if (cfg.seg.k > mid)
        throw std::invalid_argument("e2e: k exceeds the middle segment");

    E2eReport report;
    report.iterations =
        cfg.pq_max_iter ? cfg.pq_max_iter
                        : t_max(cfg.model, static_cast<double>(spec.s), cfg.clip_lo,
                                cfg.clip_hi);

    Workload w = gen_workload(spec);
    KvStore store(1, spec.h_kv, cfg.block_size, cfg.cache_capacity_tokens, cfg.policy);
    if (cfg.trace) store.enable_trace();

    Rng rng(spec.seed ^ 0xe2ee2eull);
    std::vector<PqIndex> indexes;
    std::vector<TensorF32> base_queries;
    for (std::size_t head = 0; head < spec.h_kv; ++head) {
        TensorF32 keys = head_slice(w.keys, head);
        TensorF32 values = head_slice(w.values, head);
        store.offload_prefill(0, head, keys, values, cfg.seg);

        std::vector<std::size_t> mid_rows(mid);
        for (std::size_t r = 0; r < mid; ++r) mid_rows[r] = cfg.seg.n_init + r;
        indexes.push_back(pq_construct(gather_rows(keys, mid_rows), pq_cfg,
                                       report.iterations, rng.fork_seed()));
        base_queries.push_back(head_slice(w.queries, head));
    }

    std::size_t pool = cfg.pool_width ? cfg.pool_width : default_pool_width(shape, pq_cfg);
    Timeline prefill = simulate_prefill(shape, spec.s, cfg.model, report.iterations, pool);
    // the first decode step always starts with a cold cache
    Timeline first_decode = simulate_decode_step(shape, spec.s + 1, cfg.model, cfg.seg,
                                                 pq_cfg, 0.0, cfg.prefetch);
    report.tt2t = time_to_second_token(prefill, first_decode);

    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        E2eStepRow row;
        row.step = step;
        for (std::size_t head = 0; head < spec.h_kv; ++head) {
            const HeadState& state = store.state(0, head);

            KvEntry fresh;
            fresh.key.resize(spec.d_h);
            fresh.value.resize(spec.d_h);
            for (float& x : fresh.key) x = static_cast<float>(rng.normal());
            for (float& x : fresh.value) x = static_cast<float>(rng.normal());
            store.evict_local_append(0, head, std::move(fresh), indexes[head]);

            // drift the step query mildly around the head's base query so
            // consecutive steps keep asking for overlapping token sets
            const TensorF32& base = base_queries[head];
            TensorF32 queries = base;
            double sigma = 0.25 / std::sqrt(static_cast<double>(spec.d_h));
            for (float& x : queries.data)
                x += static_cast<float>(sigma * rng.normal());

            std::vector<float> scores = pq_score_gqa(queries, indexes[head]);
            std::vector<std::size_t> sel_rows = approx_topk(scores, cfg.seg.k);
            std::vector<std::size_t> ids(sel_rows.size());
            for (std::size_t i = 0; i < sel_rows.size(); ++i)
                ids[i] = cfg.seg.n_init + sel_rows[i];

            FetchReport fetch = store.fetch_topk(0, head, ids, cfg.k_cache);
            std::size_t touched = fetch.hits + fetch.misses;
            row.hit_rate += touched ? static_cast<double>(fetch.hits) / touched : 0.0;

            // middle keys in row order for the exact-selection oracle
            std::size_t mid_now = state.middle.size();
            TensorF32 mid_keys({mid_now, spec.d_h},
                               std::vector<float>(mid_now * spec.d_h));
            for (std::size_t r = 0; r < mid_now; ++r) {
                const KvEntry& e = state.middle.at(cfg.seg.n_init + r);
                std::copy(e.key.begin(), e.key.end(), mid_keys.row(r));
            }
            std::vector<std::size_t> exact_rows =
                exact_topk(sum_query_rows(queries), mid_keys, cfg.seg.k);
            row.recall += overlap_fraction(sel_rows, exact_rows);

            // full-attention oracle over every token currently stored
            std::size_t total = state.total_tokens;
            TensorF32 all_keys({total, spec.d_h}, std::vector<float>(total * spec.d_h));
            TensorF32 all_values({total, spec.d_h}, std::vector<float>(total * spec.d_h));
            auto put = [&](std::size_t id, const KvEntry& e) {
                std::copy(e.key.begin(), e.key.end(), all_keys.row(id));
                std::copy(e.value.begin(), e.value.end(), all_values.row(id));
            };
            for (std::size_t i = 0; i < state.init_entries.size(); ++i)
                put(i, state.init_entries[i]);
            for (const auto& [id, e] : state.middle) put(id, e);
            for (const auto& [id, e] : state.local) put(id, e);

            TensorF32 full = gqa_group_attention(queries, all_keys, all_values);
            TensorF32 selective({spec.g, spec.d_h},
                                std::vector<float>(spec.g * spec.d_h));
            for (std::size_t r = 0; r < spec.g; ++r) {
                std::vector<float> o =
                    selective_attention({queries.row(r), spec.d_h}, state, ids);
                std::copy(o.begin(), o.end(), selective.row(r));
            }
            row.output_error += relative_error(selective, full);
        }
        double inv = 1.0 / static_cast<double>(spec.h_kv);
        row.recall *= inv;
        row.output_error *= inv;
        row.hit_rate *= inv;
        row.simulated_tpot =
            simulate_decode_step(shape, spec.s + step, cfg.model, cfg.seg, pq_cfg,
                                 row.hit_rate, cfg.prefetch)
                .end_to_end;
        report.steps.push_back(row);
    }
    if (cfg.trace) report.trace = store.trace();
    return report;
}

void write_e2e_csv(std::ostream& out, const E2eReport& report) {
    out << "step,recall,output_error,hit_rate,simulated_tpot\n";
    out << "tt2t,,,," << fmt(report.tt2t) << '\n';
    for (const E2eStepRow& r : report.steps)
        out << r.step << ',' << fmt(r.recall) << ',' << fmt(r.output_error) << ','
            << fmt(r.hit_rate) << ',' << fmt(r.simulated_tpot) << '\n';
}

}  // namespace pqkv
