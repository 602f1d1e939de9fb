#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

#include "icdh/error.hpp"
#include "icdh/image.hpp"
#include "icdh/mlp.hpp"

namespace icdh {

// Model file layout, all integers and floats little-endian:
//   magic "ICDH-MLP-1" (10 bytes)
//   u32 schema version
//   u32 layer count + 1, then that many u32 layer sizes
//   u64 init seed
//   u64 model version
//   f64 parameters, layer by layer: weights row-major, then biases
//   u32 CRC-32 of every byte after the magic and before the checksum

inline constexpr std::string_view kModelMagic = "ICDH-MLP-1";
inline constexpr std::uint32_t kModelSchemaVersion = 1;

namespace detail {

template <class T>
void put_le(Bytes& out, T v)
{
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    auto u = std::bit_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
}

class LeReader {
public:
    LeReader(const Bytes& b, std::size_t pos) : bytes_(b), pos_(pos) {}

    template <class T>
    T get()
    {
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
        if (pos_ + sizeof(U) > bytes_.size()) throw IoError("model file truncated");
        U u = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) u |= U{bytes_[pos_ + i]} << (8 * i);
        pos_ += sizeof(U);
        return std::bit_cast<T>(u);
    }
    std::size_t pos() const noexcept { return pos_; }

private:
    const Bytes& bytes_;
    std::size_t pos_;
};

inline std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n)
{
    return static_cast<std::uint32_t>(::crc32(::crc32(0L, Z_NULL, 0), data, static_cast<uInt>(n)));
}

} // namespace detail

inline Bytes serialize_model(const MlpModel& model)
{
    Bytes out(kModelMagic.begin(), kModelMagic.end());
    detail::put_le(out, kModelSchemaVersion);
    const auto dims = model.dims();
    detail::put_le(out, static_cast<std::uint32_t>(dims.size()));
    for (int d : dims) detail::put_le(out, static_cast<std::uint32_t>(d));
    detail::put_le(out, model.init_seed);
    detail::put_le(out, model.model_version);
    for (const auto& l : model.params.layers) {
        for (Eigen::Index i = 0; i < l.weights.size(); ++i) detail::put_le(out, l.weights.data()[i]);
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) detail::put_le(out, l.bias.data()[i]);
    }
    const auto crc = detail::crc32_of(out.data() + kModelMagic.size(), out.size() - kModelMagic.size());
    detail::put_le(out, crc);
    return out;
}

inline MlpModel deserialize_model(const Bytes& bytes)
{
    if (bytes.size() < kModelMagic.size() ||
        std::memcmp(bytes.data(), kModelMagic.data(), kModelMagic.size()) != 0) {
        throw FormatError("not a model file (bad magic)");
    }
    detail::LeReader rd(bytes, kModelMagic.size());
    const auto version = rd.get<std::uint32_t>();
    if (version != kModelSchemaVersion) {
        throw FormatError("unsupported model schema version " + std::to_string(version));
    }
    const auto ndims = rd.get<std::uint32_t>();
    if (ndims < 2 || ndims > 64) throw FormatError("implausible layer count in model file");
    std::vector<int> dims;
    for (std::uint32_t i = 0; i < ndims; ++i) {
        const auto d = rd.get<std::uint32_t>();
        if (d == 0 || d > (1u << 20)) throw FormatError("implausible layer size in model file");
        dims.push_back(static_cast<int>(d));
    }
    MlpModel m;
    m.init_seed = rd.get<std::uint64_t>();
    m.model_version = rd.get<std::uint64_t>();

    std::size_t nparams = 0;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        nparams += static_cast<std::size_t>(dims[i]) * dims[i + 1] + dims[i + 1];
    }
    if (rd.pos() + nparams * 8 + 4 > bytes.size()) throw IoError("model file truncated");

    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        DenseLayer l{Matrix(dims[i], dims[i + 1]), Vector(dims[i + 1])};
        for (Eigen::Index k = 0; k < l.weights.size(); ++k) l.weights.data()[k] = rd.get<double>();
        for (Eigen::Index k = 0; k < l.bias.size(); ++k) l.bias.data()[k] = rd.get<double>();
        m.params.layers.push_back(std::move(l));
    }
    const std::size_t payload_end = rd.pos();
    const auto stored = rd.get<std::uint32_t>();
    if (rd.pos() != bytes.size()) throw FormatError("trailing bytes after model checksum");
    const auto actual = detail::crc32_of(bytes.data() + kModelMagic.size(), payload_end - kModelMagic.size());
    if (stored != actual) throw FormatError("model checksum mismatch");
    if (!m.params.all_finite()) throw FormatError("model contains non-finite parameters");
    return m;
}

inline void save_model(const MlpModel& model, const std::string& path)
{
    write_file_bytes(path, serialize_model(model));
}

inline MlpModel load_model(const std::string& path) { return deserialize_model(read_file_bytes(path)); }

/// CRC-32 stored in a serialized model (its trailing four bytes).
inline std::uint32_t model_checksum(const Bytes& serialized)
{
    if (serialized.size() < 4) throw IoError("model file truncated");
    detail::LeReader rd(serialized, serialized.size() - 4);
    return rd.get<std::uint32_t>();
}

} // namespace icdh
