#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace pqkv {

/// Dense row-major float32 tensor. The flat data vector always holds exactly
/// the product of dims entries; every stored value is finite.
struct TensorF32 {
    std::vector<std::size_t> dims;
    std::vector<float> data;

    TensorF32() = default;
    TensorF32(std::vector<std::size_t> dims_, std::vector<float> data_);

    std::size_t numel() const;
    std::size_t ndim() const { return dims.size(); }

    /// Row of a 2-d tensor as a pointer into data.
    const float* row(std::size_t i) const;
    float* row(std::size_t i);

    /// Throws std::invalid_argument if dims/data disagree or a value is not finite.
    void validate() const;
};

// Binary tensor file layout, little-endian throughout:
//   magic "PQKV" | version u32 | dtype u8 (0 = f32, 1 = u16) | ndim u8 |
//   dims u64 each | payload row-major
inline constexpr std::uint32_t kTensorFormatVersion = 1;

void write_tensor(std::ostream& out, const TensorF32& t);
TensorF32 read_tensor(std::istream& in);

/// u16 grid (used for PQ code grids) in the same header scheme, dtype 1.
void write_grid_u16(std::ostream& out, const std::vector<std::size_t>& dims,
                    const std::vector<std::uint16_t>& data);
void read_grid_u16(std::istream& in, std::vector<std::size_t>& dims,
                   std::vector<std::uint16_t>& data);

void save_tensor(const std::string& path, const TensorF32& t);
TensorF32 load_tensor(const std::string& path);

}  // namespace pqkv
