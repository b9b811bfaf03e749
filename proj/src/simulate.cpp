#include "pqkv/simulate.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace pqkv {

namespace {

// List scheduler over the three serial resources. Zero-duration work is not
// emitted and does not occupy its resource; its completion time still flows to
// dependents through the returned node.
struct Sim {
    Timeline tl;
    std::array<double, 3> free_at{};
    std::array<std::ptrdiff_t, 3> last{-1, -1, -1};

    struct Node {
        double end = 0.0;
        std::ptrdiff_t idx = -1;
    };

    Node run(Resource r, std::string label, double duration,
             std::initializer_list<Node> deps) {
        if (duration < 0.0)
            throw std::invalid_argument("simulate: negative duration for " + label);
        double start = 0.0;
        for (const Node& d : deps) start = std::max(start, d.end);
        if (duration == 0.0) return {start, -1};

        auto ri = static_cast<std::size_t>(r);
        start = std::max(start, free_at[ri]);
        std::vector<std::size_t> dep_idx;
        if (last[ri] >= 0) dep_idx.push_back(static_cast<std::size_t>(last[ri]));
        for (const Node& d : deps)
            if (d.idx >= 0) dep_idx.push_back(static_cast<std::size_t>(d.idx));
        std::size_t i = tl.add(r, std::move(label), start, duration, std::move(dep_idx));
        free_at[ri] = start + duration;
        last[ri] = static_cast<std::ptrdiff_t>(i);
        return {start + duration, static_cast<std::ptrdiff_t>(i)};
    }
};

double transfer_seconds(double bytes, double bandwidth) {
    if (!(bandwidth > 0.0))
        throw std::invalid_argument("simulate: bandwidth must be > 0");
    return bytes / bandwidth;
}

}  // namespace

Timeline simulate_prefill(const ModelShape& shape, std::size_t s, const CostModel& model,
                          std::size_t iterations, std::size_t pool_width) {
    shape.validate();
    if (s < 1) throw std::invalid_argument("simulate: s must be >= 1");
    if (iterations < 1) throw std::invalid_argument("simulate: iterations must be >= 1");
    if (pool_width < 1) throw std::invalid_argument("simulate: pool_width must be >= 1");

    double sd = static_cast<double>(s);
    std::size_t L = shape.num_layers;
    double compute = model.compute_time(sd) / static_cast<double>(L);
    double offload_bytes = 2.0 * 2.0 * static_cast<double>(shape.num_kv_heads) * sd *
                           static_cast<double>(shape.head_dim);
    double offload = transfer_seconds(offload_bytes, model.offload_bandwidth);
    double cluster = model.clustering_time(sd, static_cast<double>(iterations)) /
                     static_cast<double>(pool_width);

    Sim sim;
    Sim::Node prev_compute{};
    for (std::size_t i = 0; i < L; ++i) {
        std::string suffix = "_L" + std::to_string(i);
        prev_compute = sim.run(Resource::kCompute, "compute" + suffix, compute,
                               {prev_compute});
        Sim::Node off = sim.run(Resource::kTransfer, "offload" + suffix, offload,
                                {prev_compute});
        sim.run(Resource::kCpuPool, "cluster" + suffix, cluster, {off});
    }
    return sim.tl;
}

Timeline simulate_decode_step(const ModelShape& shape, std::size_t s,
                              const CostModel& model, const SegmentConfig& seg,
                              const PqConfig& cfg, double hit_rate, bool prefetch,
                              std::span<const double> cluster_ready) {
    shape.validate();
    seg.validate();
    cfg.validate();
    validate_shape(shape, seg, s);
    if (seg.k > s - seg.n_init - seg.n_local)
        throw std::invalid_argument("simulate: k exceeds the middle segment");
    if (hit_rate < 0.0 || hit_rate > 1.0)
        throw std::invalid_argument("simulate: hit_rate must be in [0, 1]");
    std::size_t L = shape.num_layers;
    if (!cluster_ready.empty() && cluster_ready.size() != L)
        throw std::invalid_argument("simulate: cluster_ready needs one entry per layer");

    double sd = static_cast<double>(s);
    double h_kv = static_cast<double>(shape.num_kv_heads);
    double d_h = static_cast<double>(shape.head_dim);
    double codes_bytes = h_kv * static_cast<double>(cfg.m) * sd *
                         static_cast<double>(cfg.b) / 8.0;
    double fetch_bytes = 2.0 * 2.0 * h_kv * (1.0 - hit_rate) *
                         static_cast<double>(seg.k) * d_h;
    double codes = transfer_seconds(codes_bytes, model.fetch_bandwidth);
    double fetch = transfer_seconds(fetch_bytes, model.fetch_bandwidth);
    double Ld = static_cast<double>(L);
    double search = model.alpha2 / Ld + model.beta2 * sd;
    double attended = static_cast<double>(seg.n_init + seg.k + seg.n_local);
    double attn = model.alpha2 / Ld + model.beta2 * attended;

    Sim sim;
    std::vector<Sim::Node> code_arrival(L);
    if (!prefetch)
        code_arrival[0] = sim.run(Resource::kTransfer, "codes_L0", codes, {});
    // with prefetch on, layer 0's codes were moved before the step began

    Sim::Node prev_attn{};
    for (std::size_t i = 0; i < L; ++i) {
        std::string suffix = "_L" + std::to_string(i);
        if (prefetch) {
            if (i + 1 < L)  // next layer's codes ride along with this compute
                code_arrival[i + 1] = sim.run(Resource::kTransfer,
                                              "codes_L" + std::to_string(i + 1), codes,
                                              {prev_attn});
        } else if (i > 0) {
            code_arrival[i] = sim.run(Resource::kTransfer, "codes" + suffix, codes,
                                      {prev_attn});
        }

        if (!cluster_ready.empty()) {
            double base = std::max({sim.free_at[0], prev_attn.end, code_arrival[i].end});
            if (cluster_ready[i] > base)
                sim.run(Resource::kCompute, "wait_cluster" + suffix,
                        cluster_ready[i] - base, {prev_attn, code_arrival[i]});
        }
        Sim::Node se = sim.run(Resource::kCompute, "pq_search" + suffix, search,
                               {prev_attn, code_arrival[i]});
        Sim::Node fe = sim.run(Resource::kTransfer, "fetch_topk" + suffix, fetch, {se});
        prev_attn = sim.run(Resource::kCompute, "attn_ffn" + suffix, attn, {se, fe});
    }
    return sim.tl;
}

double time_to_second_token(const Timeline& prefill, const Timeline& first_decode) {
    return prefill.end_to_end + first_decode.end_to_end;
}

}  // namespace pqkv
