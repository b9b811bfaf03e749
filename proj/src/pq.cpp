#include "pqkv/pq.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "pqkv/kmeans.hpp"
#include "pqkv/topk.hpp"

namespace pqkv {

PqConfig PqConfig::create(std::size_t m, std::size_t b, std::size_t d_h) {
    if (m < 1) throw std::invalid_argument("pq: m must be >= 1");
    if (b < 1 || b > 16) throw std::invalid_argument("pq: b must be in [1, 16]");
    if (d_h < 1 || d_h % m != 0)
        throw std::invalid_argument("pq: head_dim must be a positive multiple of m");
    PqConfig cfg;
    cfg.m = m;
    cfg.b = b;
    cfg.d_m = d_h / m;
    cfg.n_clusters = std::size_t{1} << b;
    return cfg;
}

void PqConfig::validate() const {
    if (m < 1 || d_m < 1) throw std::invalid_argument("pq: m and d_m must be >= 1");
    if (b < 1 || b > 16) throw std::invalid_argument("pq: b must be in [1, 16]");
    if (n_clusters != (std::size_t{1} << b))
        throw std::invalid_argument("pq: n_clusters must equal 2^b");
}

const float* PqIndex::centroid(std::size_t partition, std::size_t cluster) const {
    return centroids.data.data() + (partition * cfg.n_clusters + cluster) * cfg.d_m;
}

const std::uint16_t* PqIndex::code_row(std::size_t token) const {
    if (token >= size()) throw std::out_of_range("pq: token id out of range");
    return codes.data() + token * cfg.m;
}

PqIndex pq_construct(const TensorF32& keys, const PqConfig& cfg,
                     std::size_t max_iter, std::uint64_t seed) {
    cfg.validate();
    keys.validate();
    if (keys.ndim() != 2) throw std::invalid_argument("pq: keys must be 2-d");
    if (keys.dims[1] != cfg.head_dim())
        throw std::invalid_argument("pq: key dim must equal m * d_m");
    std::size_t s = keys.dims[0];
    if (s < 1) throw std::invalid_argument("pq: need at least one key");

    PqIndex index;
    index.cfg = cfg;
    index.centroids = TensorF32({cfg.m, cfg.n_clusters, cfg.d_m},
                                std::vector<float>(cfg.m * cfg.n_clusters * cfg.d_m));
    index.codes.assign(s * cfg.m, 0);

    TensorF32 sub({s, cfg.d_m}, std::vector<float>(s * cfg.d_m));
    for (std::size_t j = 0; j < cfg.m; ++j) {
        for (std::size_t i = 0; i < s; ++i)
            for (std::size_t t = 0; t < cfg.d_m; ++t)
                sub.data[i * cfg.d_m + t] = keys.data[i * keys.dims[1] + j * cfg.d_m + t];
        // each partition gets its own stream so codebooks are independent
        KmeansResult km = kmeans_fit(sub, cfg.n_clusters, max_iter,
                                     seed + 0x9e3779b97f4a7c15ull * (j + 1));
        std::copy(km.centroids.data.begin(), km.centroids.data.end(),
                  index.centroids.data.begin() + j * cfg.n_clusters * cfg.d_m);
        for (std::size_t i = 0; i < s; ++i)
            index.codes[i * cfg.m + j] = static_cast<std::uint16_t>(km.assignments[i]);
    }
    return index;
}

std::vector<std::uint16_t> pq_encode_one(std::span<const float> key,
                                         const PqIndex& index) {
    const PqConfig& cfg = index.cfg;
    if (key.size() != cfg.head_dim())
        throw std::invalid_argument("pq: key dim must equal m * d_m");
    std::vector<std::uint16_t> code(cfg.m);
    for (std::size_t j = 0; j < cfg.m; ++j) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < cfg.n_clusters; ++c) {
            const float* cen = index.centroid(j, c);
            double acc = 0.0;
            for (std::size_t t = 0; t < cfg.d_m; ++t) {
                double diff = static_cast<double>(key[j * cfg.d_m + t]) -
                              static_cast<double>(cen[t]);
                acc += diff * diff;
            }
            if (acc < best_d) {
                best_d = acc;
                best = c;
            }
        }
        code[j] = static_cast<std::uint16_t>(best);
    }
    return code;
}

void append_code(PqIndex& index, std::span<const std::uint16_t> code) {
    if (code.size() != index.cfg.m)
        throw std::invalid_argument("pq: code must have m entries");
    for (std::uint16_t c : code)
        if (c >= index.cfg.n_clusters)
            throw std::invalid_argument("pq: code entry out of range");
    index.codes.insert(index.codes.end(), code.begin(), code.end());
}

namespace {

// [m x 2^b] centroid-dot table for one query, accumulated into `table`.
void add_score_table(std::span<const float> query, const PqIndex& index,
                     std::vector<double>& table) {
    const PqConfig& cfg = index.cfg;
    for (std::size_t j = 0; j < cfg.m; ++j) {
        const float* q = query.data() + j * cfg.d_m;
        for (std::size_t c = 0; c < cfg.n_clusters; ++c) {
            const float* cen = index.centroid(j, c);
            double acc = 0.0;
            for (std::size_t t = 0; t < cfg.d_m; ++t)
                acc += static_cast<double>(q[t]) * static_cast<double>(cen[t]);
            table[j * cfg.n_clusters + c] += acc;
        }
    }
}

std::vector<float> gather_scores(const PqIndex& index, const std::vector<double>& table) {
    const PqConfig& cfg = index.cfg;
    std::size_t s = index.size();
    std::vector<float> scores(s);
    for (std::size_t i = 0; i < s; ++i) {
        const std::uint16_t* code = index.codes.data() + i * cfg.m;
        double acc = 0.0;
        for (std::size_t j = 0; j < cfg.m; ++j)
            acc += table[j * cfg.n_clusters + code[j]];
        scores[i] = static_cast<float>(acc);
    }
    return scores;
}

}  // namespace

std::vector<float> pq_score(std::span<const float> query, const PqIndex& index) {
    if (query.size() != index.cfg.head_dim())
        throw std::invalid_argument("pq: query dim must equal m * d_m");
    std::vector<double> table(index.cfg.m * index.cfg.n_clusters, 0.0);
    add_score_table(query, index, table);
    return gather_scores(index, table);
}

std::vector<float> pq_score_gqa(const TensorF32& queries, const PqIndex& index) {
    if (queries.ndim() != 2 || queries.dims[0] < 1)
        throw std::invalid_argument("pq: queries must be a non-empty 2-d grid");
    if (queries.dims[1] != index.cfg.head_dim())
        throw std::invalid_argument("pq: query dim must equal m * d_m");
    std::vector<double> table(index.cfg.m * index.cfg.n_clusters, 0.0);
    for (std::size_t r = 0; r < queries.dims[0]; ++r)
        add_score_table({queries.row(r), queries.dims[1]}, index, table);
    return gather_scores(index, table);
}

std::vector<float> reconstruct(const PqIndex& index, std::size_t token) {
    const PqConfig& cfg = index.cfg;
    const std::uint16_t* code = index.code_row(token);
    std::vector<float> out(cfg.head_dim());
    for (std::size_t j = 0; j < cfg.m; ++j) {
        const float* cen = index.centroid(j, code[j]);
        std::copy(cen, cen + cfg.d_m, out.begin() + j * cfg.d_m);
    }
    return out;
}

std::vector<std::size_t> approx_topk(std::span<const float> scores, std::size_t k,
                                     const std::unordered_set<std::size_t>& excluded) {
    return top_k_desc(scores, k, excluded);
}

double codes_memory_ratio(const PqConfig& cfg, std::size_t d_h) {
    if (d_h < 1) throw std::invalid_argument("pq: head_dim must be >= 1");
    return static_cast<double>(cfg.m * cfg.b) / (16.0 * static_cast<double>(d_h));
}

void write_index(std::ostream& out, const PqIndex& index) {
    index.cfg.validate();
    write_tensor(out, index.centroids);
    write_grid_u16(out, {index.size(), index.cfg.m}, index.codes);
}

PqIndex read_index(std::istream& in) {
    PqIndex index;
    index.centroids = read_tensor(in);
    if (index.centroids.ndim() != 3)
        throw std::runtime_error("pq: centroid tensor must be 3-d");
    index.cfg.m = index.centroids.dims[0];
    index.cfg.n_clusters = index.centroids.dims[1];
    index.cfg.d_m = index.centroids.dims[2];
    index.cfg.b = 0;
    for (std::size_t b = 1; b <= 16; ++b)
        if ((std::size_t{1} << b) == index.cfg.n_clusters) index.cfg.b = b;
    index.cfg.validate();

    std::vector<std::size_t> dims;
    read_grid_u16(in, dims, index.codes);
    if (dims.size() != 2 || dims[1] != index.cfg.m)
        throw std::runtime_error("pq: code grid shape mismatch");
    for (std::uint16_t c : index.codes)
        if (c >= index.cfg.n_clusters) throw std::runtime_error("pq: code entry out of range");
    return index;
}

void save_index(const std::string& path, const PqIndex& index) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("pq: cannot open " + path);
    write_index(out, index);
}

PqIndex load_index(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("pq: cannot open " + path);
    return read_index(in);
}

}  // namespace pqkv
