#include "pqkv/model.hpp"

#include <stdexcept>
#include <string>

namespace pqkv {

ModelShape ModelShape::create(std::size_t batch, std::size_t num_layers,
                              std::size_t num_heads, std::size_t num_kv_heads,
                              std::size_t head_dim) {
    ModelShape s;
    s.batch = batch;
    s.num_layers = num_layers;
    s.num_heads = num_heads;
    s.num_kv_heads = num_kv_heads;
    s.head_dim = head_dim;
    s.model_dim = num_heads * head_dim;
    s.group_size = num_kv_heads ? num_heads / num_kv_heads : 0;
    s.validate();
    return s;
}

void ModelShape::validate() const {
    if (batch < 1) throw std::invalid_argument("shape: batch must be >= 1");
    if (num_layers < 1) throw std::invalid_argument("shape: num_layers must be >= 1");
    if (num_heads < 1) throw std::invalid_argument("shape: num_heads must be >= 1");
    if (num_kv_heads < 1) throw std::invalid_argument("shape: num_kv_heads must be >= 1");
    if (head_dim < 1) throw std::invalid_argument("shape: head_dim must be >= 1");
    if (num_heads % num_kv_heads != 0)
        throw std::invalid_argument("shape: num_heads must be divisible by num_kv_heads");
    if (model_dim != num_heads * head_dim)
        throw std::invalid_argument("shape: model_dim must equal num_heads * head_dim");
    if (group_size != num_heads / num_kv_heads)
        throw std::invalid_argument("shape: group_size must equal num_heads / num_kv_heads");
}

void SegmentConfig::validate() const {
    if (n_local < 1) throw std::invalid_argument("segments: n_local must be >= 1");
}

void validate_shape(const ModelShape& shape, const SegmentConfig& seg, std::size_t s) {
    shape.validate();
    seg.validate();
    if (s < 1) throw std::invalid_argument("shape: sequence length must be >= 1");
    if (seg.n_init + seg.n_local > s)
        throw std::invalid_argument(
            "segments: n_init + n_local must be <= sequence length (" +
            std::to_string(seg.n_init) + " + " + std::to_string(seg.n_local) + " > " +
            std::to_string(s) + ")");
}

}  // namespace pqkv
