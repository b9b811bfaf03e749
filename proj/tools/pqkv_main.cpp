#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "pqkv/attention.hpp"
#include "pqkv/cost_model.hpp"
#include "pqkv/experiments.hpp"
#include "pqkv/kv_store.hpp"
#include "pqkv/pq.hpp"
#include "pqkv/simulate.hpp"
#include "pqkv/tensor.hpp"
#include "pqkv/workload.hpp"

namespace {

pqkv::WorkloadKind parse_kind(const std::string& kind) {
    if (kind == "gaussian") return pqkv::WorkloadKind::kGaussianMixture;
    if (kind == "powerlaw") return pqkv::WorkloadKind::kPowerlaw;
    throw CLI::ValidationError("--kind", "expected 'gaussian' or 'powerlaw'");
}

pqkv::CachePolicy parse_policy(const std::string& policy) {
    if (policy == "lru") return pqkv::CachePolicy::kLru;
    if (policy == "lfu") return pqkv::CachePolicy::kLfu;
    throw CLI::ValidationError("--policy", "expected 'lru' or 'lfu'");
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    return out;
}

// header + numeric rows, comma separated
std::vector<std::vector<double>> read_csv_rows(const std::string& path,
                                               std::size_t columns) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() != columns)
            throw std::runtime_error(path + ": expected " + std::to_string(columns) +
                                     " columns, got " + std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error(path + ": no data rows");
    return rows;
}

struct WorkloadFlags {
    std::size_t s = 4096, d_h = 64, h_kv = 1, g = 1, components = 8;
    double spread = 0.5, zipf = 1.0;
    std::string kind = "gaussian";
    std::uint64_t seed = 0;

    void attach(CLI::App* cmd, bool with_seed = true) {
        cmd->add_option("--s", s, "sequence length");
        cmd->add_option("--d-h", d_h, "head dim");
        cmd->add_option("--h-kv", h_kv, "kv heads");
        cmd->add_option("--g", g, "query heads per kv head");
        cmd->add_option("--kind", kind, "workload kind: gaussian|powerlaw");
        cmd->add_option("--components", components, "gaussian mixture components");
        cmd->add_option("--spread", spread, "gaussian per-dim spread");
        cmd->add_option("--zipf", zipf, "powerlaw exponent");
        if (with_seed) cmd->add_option("--seed", seed, "rng seed")->required();
    }

    pqkv::WorkloadSpec spec() const {
        pqkv::WorkloadSpec w;
        w.s = s;
        w.d_h = d_h;
        w.h_kv = h_kv;
        w.g = g;
        w.kind = parse_kind(kind);
        w.n_components = components;
        w.spread = spread;
        w.zipf_exponent = zipf;
        w.seed = seed;
        return w;
    }
};

struct ShapeFlags {
    std::size_t layers = 8, heads = 0, h_kv = 1, d_h = 64;

    void attach(CLI::App* cmd) {
        cmd->add_option("--layers", layers, "transformer layers");
        cmd->add_option("--heads", heads, "query heads (0: h_kv)");
        cmd->add_option("--h-kv", h_kv, "kv heads");
        cmd->add_option("--d-h", d_h, "head dim");
    }

    pqkv::ModelShape shape() const {
        return pqkv::ModelShape::create(1, layers, heads ? heads : h_kv, h_kv, d_h);
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"product-quantized KV retrieval and tiered-memory pipeline simulator"};
    app.require_subcommand(1);

    // ---- gen ----------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "generate a synthetic workload");
    WorkloadFlags gen_w;
    gen_w.attach(gen);
    std::string gen_out = "workload";
    gen->add_option("--out", gen_out, "output path prefix");
    gen->callback([&] {
        pqkv::Workload w = pqkv::gen_workload(gen_w.spec());
        pqkv::save_tensor(gen_out + ".keys.pqt", w.keys);
        pqkv::save_tensor(gen_out + ".values.pqt", w.values);
        pqkv::save_tensor(gen_out + ".queries.pqt", w.queries);
        std::cout << "wrote " << gen_out << ".{keys,values,queries}.pqt\n";
    });

    // ---- build-index --------------------------------------------------
    auto* build = app.add_subcommand("build-index", "fit PQ codebooks over stored keys");
    std::string bi_keys, bi_out = "index.pqi";
    std::size_t bi_m = 2, bi_b = 6, bi_head = 0, bi_iter = 15;
    std::uint64_t bi_seed = 0;
    build->add_option("--keys", bi_keys, "keys tensor file")->required();
    build->add_option("--m", bi_m, "partitions");
    build->add_option("--b", bi_b, "bits per partition");
    build->add_option("--head", bi_head, "kv head to index when keys are 3-d");
    build->add_option("--max-iter", bi_iter, "k-means iteration cap");
    build->add_option("--seed", bi_seed, "rng seed")->required();
    build->add_option("--out", bi_out, "output index file");
    build->callback([&] {
        pqkv::TensorF32 keys = pqkv::load_tensor(bi_keys);
        if (keys.ndim() == 3) keys = pqkv::head_slice(keys, bi_head);
        pqkv::PqConfig cfg = pqkv::PqConfig::create(bi_m, bi_b, keys.dims[1]);
        pqkv::PqIndex index = pqkv::pq_construct(keys, cfg, bi_iter, bi_seed);
        pqkv::save_index(bi_out, index);
        std::cout << "indexed " << index.size() << " tokens, codes/key ratio "
                  << pqkv::codes_memory_ratio(cfg, keys.dims[1]) << "\n";
    });

    // ---- recall -------------------------------------------------------
    auto* recall = app.add_subcommand("recall", "selection quality vs the exact oracle");
    WorkloadFlags rc_w;
    rc_w.attach(recall, /*with_seed=*/false);
    pqkv::RecallGrid rc_grid;
    std::string rc_out;
    recall->add_option("--m", rc_grid.ms, "partition counts");
    recall->add_option("--b", rc_grid.bs, "bit widths");
    recall->add_option("--k", rc_grid.ks, "selection sizes")->required();
    recall->add_option("--seeds", rc_grid.seeds, "workload seeds")->required();
    recall->add_option("--max-iter", rc_grid.max_iter, "k-means iteration cap");
    recall->add_option("--out", rc_out, "output csv (default stdout)");
    recall->callback([&] {
        pqkv::RecallReport rep = pqkv::run_recall(rc_w.spec(), rc_grid);
        if (rc_out.empty()) {
            pqkv::write_recall_csv(std::cout, rep);
        } else {
            auto out = open_out(rc_out);
            pqkv::write_recall_csv(out, rep);
        }
    });

    // ---- fit-cost -----------------------------------------------------
    auto* fit = app.add_subcommand("fit-cost", "fit the latency model from samples");
    std::string fc_clus, fc_comp, fc_out = "cost_model.txt";
    double fc_obw = 16e9, fc_fbw = 16e9;
    fit->add_option("--clustering", fc_clus, "csv: s,iterations,seconds")->required();
    fit->add_option("--compute", fc_comp, "csv: s,seconds")->required();
    fit->add_option("--offload-bandwidth", fc_obw, "bytes/s GPU->CPU");
    fit->add_option("--fetch-bandwidth", fc_fbw, "bytes/s CPU->GPU");
    fit->add_option("--out", fc_out, "output model file");
    fit->callback([&] {
        std::vector<pqkv::ClusteringSample> cs;
        for (const auto& row : read_csv_rows(fc_clus, 3))
            cs.push_back({row[0], row[1], row[2]});
        std::vector<pqkv::ComputeSample> ps;
        for (const auto& row : read_csv_rows(fc_comp, 2)) ps.push_back({row[0], row[1]});
        pqkv::ClusteringFit cf = pqkv::fit_clustering(cs);
        pqkv::ComputeFit pf = pqkv::fit_compute(ps);
        pqkv::CostModel model;
        model.alpha1 = cf.alpha1;
        model.beta1 = cf.beta1;
        model.alpha2 = pf.alpha2;
        model.beta2 = pf.beta2;
        model.gamma2 = pf.gamma2;
        model.offload_bandwidth = fc_obw;
        model.fetch_bandwidth = fc_fbw;
        model.validate();
        pqkv::save_cost_model(fc_out, model);
        std::cout << "wrote " << fc_out << "\n";
    });

    // ---- simulate-prefill --------------------------------------------
    auto* sp = app.add_subcommand("simulate-prefill", "prefill pipeline timeline");
    ShapeFlags sp_shape;
    sp_shape.attach(sp);
    std::string sp_model, sp_out;
    std::size_t sp_s = 4096, sp_iter = 0, sp_m = 2, sp_pool = 0;
    std::size_t sp_clip_lo = 3, sp_clip_hi = 30;
    sp->add_option("--model", sp_model, "cost model file")->required();
    sp->add_option("--s", sp_s, "sequence length");
    sp->add_option("--iterations", sp_iter, "clustering iterations (0: t_max schedule)");
    sp->add_option("--m", sp_m, "PQ partitions (pool width default h_kv*m)");
    sp->add_option("--pool-width", sp_pool, "clustering pool slots");
    sp->add_option("--clip-lo", sp_clip_lo, "t_max lower clip");
    sp->add_option("--clip-hi", sp_clip_hi, "t_max upper clip");
    sp->add_option("--out", sp_out, "timeline csv (default stdout)");
    sp->callback([&] {
        pqkv::CostModel model = pqkv::load_cost_model(sp_model);
        model.validate();
        pqkv::ModelShape shape = sp_shape.shape();
        std::size_t iters = sp_iter ? sp_iter
                                    : pqkv::t_max(model, static_cast<double>(sp_s),
                                                  sp_clip_lo, sp_clip_hi);
        std::size_t pool = sp_pool ? sp_pool : shape.num_kv_heads * sp_m;
        pqkv::Timeline tl = pqkv::simulate_prefill(shape, sp_s, model, iters, pool);
        std::cerr << "iterations=" << iters << " makespan=" << tl.end_to_end << "\n";
        if (sp_out.empty()) {
            pqkv::write_timeline_csv(std::cout, tl);
        } else {
            auto out = open_out(sp_out);
            pqkv::write_timeline_csv(out, tl);
        }
    });

    // ---- simulate-decode ----------------------------------------------
    auto* sd = app.add_subcommand("simulate-decode", "one decode step timeline");
    ShapeFlags sd_shape;
    sd_shape.attach(sd);
    std::string sd_model, sd_out;
    std::size_t sd_s = 4096, sd_m = 2, sd_b = 6;
    pqkv::SegmentConfig sd_seg;
    double sd_hit = 0.0;
    bool sd_no_prefetch = false;
    sd->add_option("--model", sd_model, "cost model file")->required();
    sd->add_option("--s", sd_s, "sequence length");
    sd->add_option("--m", sd_m, "PQ partitions");
    sd->add_option("--b", sd_b, "bits per partition");
    sd->add_option("--k", sd_seg.k, "middle tokens selected per step");
    sd->add_option("--n-init", sd_seg.n_init, "resident initial tokens");
    sd->add_option("--n-local", sd_seg.n_local, "sliding local window");
    sd->add_option("--hit-rate", sd_hit, "block cache hit rate in [0,1]");
    sd->add_flag("--no-prefetch", sd_no_prefetch, "serialize PQ code transfers");
    sd->add_option("--out", sd_out, "timeline csv (default stdout)");
    sd->callback([&] {
        pqkv::CostModel model = pqkv::load_cost_model(sd_model);
        model.validate();
        pqkv::PqConfig cfg = pqkv::PqConfig::create(sd_m, sd_b, sd_shape.d_h);
        pqkv::Timeline tl = pqkv::simulate_decode_step(sd_shape.shape(), sd_s, model,
                                                       sd_seg, cfg, sd_hit,
                                                       !sd_no_prefetch);
        std::cerr << "makespan=" << tl.end_to_end << "\n";
        if (sd_out.empty()) {
            pqkv::write_timeline_csv(std::cout, tl);
        } else {
            auto out = open_out(sd_out);
            pqkv::write_timeline_csv(out, tl);
        }
    });

    // ---- e2e ------------------------------------------------------------
    auto* e2e = app.add_subcommand("e2e", "prefill + decode steps with live metrics");
    pqkv::E2eConfig ec;
    WorkloadFlags e2e_w;
    e2e_w.attach(e2e);
    std::string e2e_model, e2e_out, e2e_trace, e2e_policy = "lru";
    e2e->add_option("--layers", ec.num_layers, "transformer layers (timing side)");
    e2e->add_option("--heads", ec.num_heads, "query heads (0: h_kv*g)");
    e2e->add_option("--m", ec.m, "PQ partitions");
    e2e->add_option("--b", ec.b, "bits per partition");
    e2e->add_option("--k", ec.seg.k, "middle tokens selected per step");
    e2e->add_option("--n-init", ec.seg.n_init, "resident initial tokens");
    e2e->add_option("--n-local", ec.seg.n_local, "sliding local window");
    e2e->add_option("--block-size", ec.block_size, "tokens per slow-tier block");
    e2e->add_option("--k-cache", ec.k_cache, "blocks refreshed into the cache per step");
    e2e->add_option("--policy", e2e_policy, "cache policy: lru|lfu");
    e2e->add_option("--cache-capacity", ec.cache_capacity_tokens,
                    "fast-tier cache capacity in tokens");
    e2e->add_option("--steps", ec.steps, "decode steps");
    e2e->add_option("--model", e2e_model, "cost model file")->required();
    e2e->add_option("--max-iter", ec.pq_max_iter,
                    "clustering iterations (0: t_max schedule)");
    e2e->add_option("--pool-width", ec.pool_width, "clustering pool slots (0: h_kv*m)");
    e2e->add_option("--clip-lo", ec.clip_lo, "t_max lower clip");
    e2e->add_option("--clip-hi", ec.clip_hi, "t_max upper clip");
    bool e2e_no_prefetch = false;
    e2e->add_flag("--no-prefetch", e2e_no_prefetch, "serialize PQ code transfers");
    e2e->add_option("--out", e2e_out, "per-step csv (default stdout)");
    e2e->add_option("--trace-out", e2e_trace, "block access trace csv");
    e2e->callback([&] {
        ec.workload = e2e_w.spec();
        ec.policy = parse_policy(e2e_policy);
        ec.model = pqkv::load_cost_model(e2e_model);
        ec.prefetch = !e2e_no_prefetch;
        ec.trace = !e2e_trace.empty();
        pqkv::E2eReport rep = pqkv::run_e2e(ec);
        if (e2e_out.empty()) {
            pqkv::write_e2e_csv(std::cout, rep);
        } else {
            auto out = open_out(e2e_out);
            pqkv::write_e2e_csv(out, rep);
        }
        if (!e2e_trace.empty()) {
            auto out = open_out(e2e_trace);
            pqkv::write_trace_csv(out, rep.trace);
        }
        std::cerr << "iterations=" << rep.iterations << " tt2t=" << rep.tt2t << "\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
