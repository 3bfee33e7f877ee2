#include "mechdet/container.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <numeric>
#include <ostream>

#include "mechdet/error.hpp"
#include "mechdet/half.hpp"

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

namespace mechdet {

namespace {

constexpr std::size_t kPreambleSize = 16;

std::size_t align_up(std::size_t n) { return (n + kTensorAlignment - 1) / kTensorAlignment * kTensorAlignment; }

template <typename T>
void put(std::vector<std::byte>& out, T v) {
    const auto* p = reinterpret_cast<const std::byte*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(std::span<const std::byte> data, std::size_t at) {
    T v;
    std::memcpy(&v, data.data() + at, sizeof(T));
    return v;
}

std::size_t shape_product(const std::vector<std::int64_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) {
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

template <typename T>
std::vector<std::byte> as_bytes_vec(std::span<const T> v) {
    std::vector<std::byte> out(v.size_bytes());
    if (!v.empty()) {
        std::memcpy(out.data(), v.data(), v.size_bytes());
    }
    return out;
}

template <typename T>
std::vector<T> from_bytes(const TensorBlob& t) {
    std::vector<T> out(t.bytes.size() / sizeof(T));
    if (!out.empty()) {
        std::memcpy(out.data(), t.bytes.data(), out.size() * sizeof(T));
    }
    return out;
}

}  // namespace

std::string_view to_string(DType d) {
    switch (d) {
        case DType::f16: return "f16";
        case DType::f32: return "f32";
        case DType::f64: return "f64";
        case DType::i32: return "i32";
        case DType::i64: return "i64";
    }
    return "?";
}

DType parse_dtype(std::string_view s) {
    if (s == "f16") return DType::f16;
    if (s == "f32") return DType::f32;
    if (s == "f64") return DType::f64;
    if (s == "i32") return DType::i32;
    if (s == "i64") return DType::i64;
    throw FormatError("BAD_DTYPE", "unknown dtype '" + std::string(s) + "'");
}

std::size_t dtype_size(DType d) {
    switch (d) {
        case DType::f16: return 2;
        case DType::f32:
        case DType::i32: return 4;
        case DType::f64:
        case DType::i64: return 8;
    }
    return 0;
}

std::size_t TensorBlob::element_count() const { return shape_product(shape); }

const TensorBlob* Container::find(std::string_view name) const {
    auto it = std::find_if(tensors.begin(), tensors.end(), [&](const TensorBlob& t) { return t.name == name; });
    return it == tensors.end() ? nullptr : &*it;
}

std::vector<std::byte> encode_container(const Container& c) {
    nlohmann::json dir = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& t : c.tensors) {
        if (t.bytes.size() != t.element_count() * dtype_size(t.dtype)) {
            throw InputError("TENSOR_SIZE", "tensor '" + t.name + "' byte length does not match its shape");
        }
        dir.push_back({{"name", t.name},
                       {"dtype", to_string(t.dtype)},
                       {"shape", t.shape},
                       {"offset", offset},
                       {"length", t.bytes.size()}});
        offset = align_up(offset + t.bytes.size());
    }
    nlohmann::json header = {{"meta", c.meta}, {"tensors", dir}};
    const std::string text = header.dump();

    std::vector<std::byte> out;
    const auto* m = reinterpret_cast<const std::byte*>(c.magic.data());
    out.insert(out.end(), m, m + 4);
    put<std::uint32_t>(out, kContainerVersion);
    put<std::uint64_t>(out, text.size());
    const auto* h = reinterpret_cast<const std::byte*>(text.data());
    out.insert(out.end(), h, h + text.size());

    const std::size_t payload_start = align_up(out.size());
    out.resize(payload_start, std::byte{0});
    for (std::size_t i = 0; i < c.tensors.size(); ++i) {
        const auto& t = c.tensors[i];
        out.insert(out.end(), t.bytes.begin(), t.bytes.end());
        if (i + 1 < c.tensors.size()) {
            out.resize(payload_start + align_up(out.size() - payload_start), std::byte{0});
        }
    }
    return out;
}

Container decode_container(std::span<const std::byte> data, std::string_view expected_magic) {
    if (data.size() < kPreambleSize) {
        throw FormatError("TRUNCATED", "file shorter than the container preamble");
    }
    Container c;
    std::memcpy(c.magic.data(), data.data(), 4);
    if (std::string_view(c.magic.data(), 4) != expected_magic) {
        throw FormatError("BAD_MAGIC", "expected magic '" + std::string(expected_magic) + "', found '" +
                                           std::string(c.magic.data(), 4) + "'");
    }
    const auto version = get<std::uint32_t>(data, 4);
    if (version != kContainerVersion) {
        throw FormatError("UNSUPPORTED_VERSION", "container version " + std::to_string(version));
    }
    const auto header_len = get<std::uint64_t>(data, 8);
    if (header_len > data.size() - kPreambleSize) {
        throw FormatError("TRUNCATED", "header extends beyond end of file");
    }
    const auto* hp = reinterpret_cast<const char*>(data.data() + kPreambleSize);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hp, hp + header_len);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("BAD_HEADER", std::string("header is not valid JSON: ") + e.what());
    }
    if (!header.is_object() || !header.contains("tensors") || !header["tensors"].is_array()) {
        throw FormatError("BAD_HEADER", "header lacks a tensor directory");
    }
    c.meta = header.value("meta", nlohmann::json::object());

    const std::size_t payload_start = align_up(kPreambleSize + header_len);
    struct Extent {
        std::size_t begin, end;
        std::string name;
    };
    std::vector<Extent> extents;
    try {
        for (const auto& entry : header["tensors"]) {
            TensorBlob t;
            t.name = entry.at("name").get<std::string>();
            t.dtype = parse_dtype(entry.at("dtype").get<std::string>());
            t.shape = entry.at("shape").get<std::vector<std::int64_t>>();
            if (std::any_of(t.shape.begin(), t.shape.end(), [](std::int64_t d) { return d < 0; })) {
                throw FormatError("BAD_HEADER", "tensor '" + t.name + "' has a negative dimension");
            }
            const auto offset = entry.at("offset").get<std::uint64_t>();
            const auto length = entry.at("length").get<std::uint64_t>();
            if (length != t.element_count() * dtype_size(t.dtype)) {
                throw FormatError("BAD_HEADER", "tensor '" + t.name + "' length disagrees with shape");
            }
            if (offset % kTensorAlignment != 0) {
                throw FormatError("BAD_HEADER", "tensor '" + t.name + "' is not 64-byte aligned");
            }
            if (c.find(t.name) != nullptr) {
                throw FormatError("BAD_HEADER", "duplicate tensor '" + t.name + "'");
            }
            if (payload_start > data.size() || offset > data.size() - payload_start ||
                length > data.size() - payload_start - offset) {
                throw FormatError("TRUNCATED", "tensor '" + t.name + "' extends beyond end of file");
            }
            const auto* p = data.data() + payload_start + offset;
            t.bytes.assign(p, p + length);
            extents.push_back({offset, offset + length, t.name});
            c.tensors.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("BAD_HEADER", std::string("malformed tensor directory: ") + e.what());
    }
    std::sort(extents.begin(), extents.end(), [](const Extent& a, const Extent& b) { return a.begin < b.begin; });
    for (std::size_t i = 1; i < extents.size(); ++i) {
        if (extents[i].begin < extents[i - 1].end) {
            throw FormatError("OVERLAP", "tensors '" + extents[i - 1].name + "' and '" + extents[i].name + "' overlap");
        }
    }
    return c;
}

void write_container(std::ostream& out, const Container& c) {
    const auto bytes = encode_container(c);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error("WRITE_FAILED", "could not write container");
    }
}

std::vector<std::byte> read_all(std::istream& in) {
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<std::byte> out(raw.size());
    if (!raw.empty()) {
        std::memcpy(out.data(), raw.data(), raw.size());
    }
    return out;
}

std::vector<std::byte> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("READ_FAILED", "cannot open " + path.string());
    }
    return read_all(in);
}

void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("WRITE_FAILED", "cannot open " + path.string() + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error("WRITE_FAILED", "could not write " + path.string());
    }
}

Container read_container(std::istream& in, std::string_view expected_magic) {
    const auto bytes = read_all(in);
    return decode_container(bytes, expected_magic);
}

TensorBlob pack_floats(std::string name, DType dtype, std::vector<std::int64_t> shape,
                       std::span<const float> values) {
    TensorBlob t{std::move(name), dtype, std::move(shape), {}};
    if (values.size() != t.element_count()) {
        throw InputError("TENSOR_SIZE", "tensor '" + t.name + "' value count does not match its shape");
    }
    if (dtype == DType::f32) {
        t.bytes = as_bytes_vec(values);
    } else if (dtype == DType::f16) {
        std::vector<std::uint16_t> h(values.size());
        std::transform(values.begin(), values.end(), h.begin(), float_to_half);
        t.bytes = as_bytes_vec(std::span<const std::uint16_t>(h));
    } else {
        throw InputError("BAD_DTYPE", "float tensors are stored as f16 or f32");
    }
    return t;
}

TensorBlob pack_doubles(std::string name, std::vector<std::int64_t> shape, std::span<const double> values) {
    TensorBlob t{std::move(name), DType::f64, std::move(shape), {}};
    if (values.size() != t.element_count()) {
        throw InputError("TENSOR_SIZE", "tensor '" + t.name + "' value count does not match its shape");
    }
    t.bytes = as_bytes_vec(values);
    return t;
}

TensorBlob pack_ints(std::string name, std::vector<std::int64_t> shape, std::span<const std::int64_t> values) {
    TensorBlob t{std::move(name), DType::i64, std::move(shape), {}};
    if (values.size() != t.element_count()) {
        throw InputError("TENSOR_SIZE", "tensor '" + t.name + "' value count does not match its shape");
    }
    t.bytes = as_bytes_vec(values);
    return t;
}

std::vector<float> unpack_floats(const TensorBlob& t) {
    switch (t.dtype) {
        case DType::f32: return from_bytes<float>(t);
        case DType::f16: {
            const auto h = from_bytes<std::uint16_t>(t);
            std::vector<float> out(h.size());
            std::transform(h.begin(), h.end(), out.begin(), half_to_float);
            return out;
        }
        default: throw FormatError("BAD_DTYPE", "tensor '" + t.name + "' is not a floating tensor");
    }
}

std::vector<double> unpack_doubles(const TensorBlob& t) {
    if (t.dtype != DType::f64) {
        throw FormatError("BAD_DTYPE", "tensor '" + t.name + "' is not f64");
    }
    return from_bytes<double>(t);
}

std::vector<std::int64_t> unpack_ints(const TensorBlob& t) {
    if (t.dtype == DType::i64) {
        return from_bytes<std::int64_t>(t);
    }
    if (t.dtype == DType::i32) {
        const auto v = from_bytes<std::int32_t>(t);
        return {v.begin(), v.end()};
    }
    throw FormatError("BAD_DTYPE", "tensor '" + t.name + "' is not an integer tensor");
}

}  // namespace mechdet
