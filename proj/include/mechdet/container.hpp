#pragma once

// Tensor container shared by trace, projection-head, and pipeline files:
//
//   magic[4] | version u32 (=1) | header_len u64 | header JSON (UTF-8,
//   canonical) | zero padding to 64 | tensor payloads, each 64-byte aligned
//
// Tensor offsets in the header are relative to the payload start, which is
// itself the first 64-byte boundary after the header.

#include <array>
#include <filesystem>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mechdet {

inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr std::size_t kTensorAlignment = 64;

enum class DType { f16, f32, f64, i32, i64 };

std::string_view to_string(DType d);
DType parse_dtype(std::string_view s);
std::size_t dtype_size(DType d);

struct TensorBlob {
    std::string name;
    DType dtype = DType::f32;
    std::vector<std::int64_t> shape;
    std::vector<std::byte> bytes;

    std::size_t element_count() const;
};

struct Container {
    std::array<char, 4> magic{};
    nlohmann::json meta = nlohmann::json::object();
    std::vector<TensorBlob> tensors;

    const TensorBlob* find(std::string_view name) const;
};

std::vector<std::byte> encode_container(const Container& c);
Container decode_container(std::span<const std::byte> data, std::string_view expected_magic);

void write_container(std::ostream& out, const Container& c);
Container read_container(std::istream& in, std::string_view expected_magic);

std::vector<std::byte> read_all(std::istream& in);

// Whole-file helpers; errors are Error READ_FAILED / WRITE_FAILED.
std::vector<std::byte> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes);

// Typed packing helpers. f16 packing narrows; unpacking widens to f32.
TensorBlob pack_floats(std::string name, DType dtype, std::vector<std::int64_t> shape,
                       std::span<const float> values);
TensorBlob pack_doubles(std::string name, std::vector<std::int64_t> shape, std::span<const double> values);
TensorBlob pack_ints(std::string name, std::vector<std::int64_t> shape, std::span<const std::int64_t> values);

std::vector<float> unpack_floats(const TensorBlob& t);
std::vector<double> unpack_doubles(const TensorBlob& t);
std::vector<std::int64_t> unpack_ints(const TensorBlob& t);

}  // namespace mechdet
