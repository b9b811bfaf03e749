#include "pqkv/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <ostream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "tensor file I/O assumes a little-endian host");

namespace pqkv {

namespace {

constexpr char kMagic[4] = {'P', 'Q', 'K', 'V'};
constexpr std::uint8_t kDtypeF32 = 0;
constexpr std::uint8_t kDtypeU16 = 1;

std::size_t checked_numel(const std::vector<std::size_t>& dims) {
    std::size_t n = 1;
    for (std::size_t d : dims) {
        if (d == 0) throw std::invalid_argument("tensor: zero-sized dimension");
        if (d > std::numeric_limits<std::size_t>::max() / n)
            throw std::invalid_argument("tensor: dimension product overflows");
        n *= d;
    }
    return n;
}

template <typename T>
void write_raw(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("tensor: truncated file");
    return v;
}

void write_header(std::ostream& out, std::uint8_t dtype,
                  const std::vector<std::size_t>& dims) {
    if (dims.empty()) throw std::invalid_argument("tensor: ndim must be >= 1");
    if (dims.size() > 255) throw std::invalid_argument("tensor: too many dimensions");
    out.write(kMagic, 4);
    write_raw(out, kTensorFormatVersion);
    write_raw(out, dtype);
    write_raw(out, static_cast<std::uint8_t>(dims.size()));
    for (std::size_t d : dims) write_raw(out, static_cast<std::uint64_t>(d));
}

std::vector<std::size_t> read_header(std::istream& in, std::uint8_t want_dtype) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("tensor: bad magic");
    auto version = read_raw<std::uint32_t>(in);
    if (version != kTensorFormatVersion)
        throw std::runtime_error("tensor: unsupported format version");
    auto dtype = read_raw<std::uint8_t>(in);
    if (dtype != want_dtype) throw std::runtime_error("tensor: unexpected dtype");
    auto ndim = read_raw<std::uint8_t>(in);
    if (ndim == 0) throw std::runtime_error("tensor: ndim must be >= 1");
    std::vector<std::size_t> dims(ndim);
    for (auto& d : dims) d = static_cast<std::size_t>(read_raw<std::uint64_t>(in));
    return dims;
}

}  // namespace

TensorF32::TensorF32(std::vector<std::size_t> dims_, std::vector<float> data_)
    : dims(std::move(dims_)), data(std::move(data_)) {
    validate();
}

std::size_t TensorF32::numel() const { return checked_numel(dims); }

const float* TensorF32::row(std::size_t i) const {
    if (dims.size() != 2) throw std::invalid_argument("tensor: row() needs a 2-d tensor");
    if (i >= dims[0]) throw std::out_of_range("tensor: row index out of range");
    return data.data() + i * dims[1];
}

float* TensorF32::row(std::size_t i) {
    return const_cast<float*>(static_cast<const TensorF32*>(this)->row(i));
}

void TensorF32::validate() const {
    if (checked_numel(dims) != data.size())
        throw std::invalid_argument("tensor: data size does not match product of dims");
    for (float v : data)
        if (!std::isfinite(v)) throw std::invalid_argument("tensor: non-finite value");
}

void write_tensor(std::ostream& out, const TensorF32& t) {
    t.validate();
    write_header(out, kDtypeF32, t.dims);
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!out) throw std::runtime_error("tensor: write failed");
}

TensorF32 read_tensor(std::istream& in) {
    TensorF32 t;
    t.dims = read_header(in, kDtypeF32);
    t.data.resize(checked_numel(t.dims));
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!in) throw std::runtime_error("tensor: truncated payload");
    t.validate();
    return t;
}

void write_grid_u16(std::ostream& out, const std::vector<std::size_t>& dims,
                    const std::vector<std::uint16_t>& data) {
    if (checked_numel(dims) != data.size())
        throw std::invalid_argument("grid: data size does not match product of dims");
    write_header(out, kDtypeU16, dims);
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(std::uint16_t)));
    if (!out) throw std::runtime_error("grid: write failed");
}

void read_grid_u16(std::istream& in, std::vector<std::size_t>& dims,
                   std::vector<std::uint16_t>& data) {
    dims = read_header(in, kDtypeU16);
    data.resize(checked_numel(dims));
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(std::uint16_t)));
    if (!in) throw std::runtime_error("grid: truncated payload");
}

void save_tensor(const std::string& path, const TensorF32& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("tensor: cannot open " + path);
    write_tensor(out, t);
}

TensorF32 load_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("tensor: cannot open " + path);
    return read_tensor(in);
}

}  // namespace pqkv
