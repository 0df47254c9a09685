// SPDX-License-Identifier: Apache-2.0
#include "loralego/safetensors.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "loralego/errors.hpp"

namespace loralego {

namespace {

using nlohmann::json;

Dtype dtype_from_name(const std::string& name) {
    if (name == "F32") return Dtype::f32;
    if (name == "F16") return Dtype::f16;
    if (name == "BF16") return Dtype::bf16;
    throw ParseError(ParseError::Kind::unknown_dtype, "unsupported dtype \"" + name + "\"");
}

}  // namespace

std::size_t dtype_size(Dtype dtype) {
    switch (dtype) {
        case Dtype::f32: return 4;
        case Dtype::f16: return 2;
        case Dtype::bf16: return 2;
    }
    return 0;
}

const char* dtype_name(Dtype dtype) {
    switch (dtype) {
        case Dtype::f32: return "F32";
        case Dtype::f16: return "F16";
        case Dtype::bf16: return "BF16";
    }
    return "?";
}

std::uint16_t f32_to_f16_bits(float value) {
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
    const std::uint32_t sign = (bits >> 16) & 0x8000u;
    const std::uint32_t exp = (bits >> 23) & 0xffu;
    std::uint32_t mant = bits & 0x7fffffu;

    if (exp == 0xffu) {  // inf / nan
        return static_cast<std::uint16_t>(sign | 0x7c00u | (mant ? 0x200u : 0u));
    }
    const int unbiased = static_cast<int>(exp) - 127;
    if (unbiased > 15) {  // overflow to inf
        return static_cast<std::uint16_t>(sign | 0x7c00u);
    }
    if (unbiased >= -14) {  // normal range
        std::uint32_t half = static_cast<std::uint32_t>(unbiased + 15) << 10 | (mant >> 13);
        const std::uint32_t rest = mant & 0x1fffu;
        if (rest > 0x1000u || (rest == 0x1000u && (half & 1u))) {
            ++half;  // rounds up, possibly carrying into the exponent
        }
        return static_cast<std::uint16_t>(sign | half);
    }
    if (unbiased < -25) {  // underflow to zero
        return static_cast<std::uint16_t>(sign);
    }
    // subnormal half
    mant |= 0x800000u;
    const int shift = -unbiased - 1;  // 14..24 bits below the kept ones
    std::uint32_t half = mant >> (shift + 10);
    const std::uint32_t rest = mant & ((1u << (shift + 10)) - 1u);
    const std::uint32_t halfway = 1u << (shift + 9);
    if (rest > halfway || (rest == halfway && (half & 1u))) {
        ++half;
    }
    return static_cast<std::uint16_t>(sign | half);
}

float f16_bits_to_f32(std::uint16_t bits) {
    const std::uint32_t sign = static_cast<std::uint32_t>(bits & 0x8000u) << 16;
    const std::uint32_t exp = (bits >> 10) & 0x1fu;
    const std::uint32_t mant = bits & 0x3ffu;
    std::uint32_t out;
    if (exp == 0) {
        if (mant == 0) {
            out = sign;
        } else {  // subnormal: renormalize
            int e = -1;
            std::uint32_t m = mant;
            do {
                ++e;
                m <<= 1;
            } while ((m & 0x400u) == 0);
            out = sign | static_cast<std::uint32_t>(113 - e) << 23 | ((m & 0x3ffu) << 13);
        }
    } else if (exp == 0x1fu) {
        out = sign | 0x7f800000u | (mant << 13);
    } else {
        out = sign | (exp + 112) << 23 | (mant << 13);
    }
    return std::bit_cast<float>(out);
}

float bf16_bits_to_f32(std::uint16_t bits) {
    return std::bit_cast<float>(static_cast<std::uint32_t>(bits) << 16);
}

std::size_t TensorEntry::element_count() const {
    std::size_t n = 1;
    for (const std::size_t d : shape) {
        n *= d;
    }
    return n;
}

std::vector<double> TensorEntry::to_f64() const {
    const std::size_t n = element_count();
    std::vector<double> out(n);
    switch (dtype) {
        case Dtype::f32: {
            for (std::size_t i = 0; i < n; ++i) {
                float f;
                std::memcpy(&f, bytes.data() + i * 4, 4);
                out[i] = static_cast<double>(f);
            }
            break;
        }
        case Dtype::f16: {
            for (std::size_t i = 0; i < n; ++i) {
                std::uint16_t h;
                std::memcpy(&h, bytes.data() + i * 2, 2);
                out[i] = static_cast<double>(f16_bits_to_f32(h));
            }
            break;
        }
        case Dtype::bf16: {
            for (std::size_t i = 0; i < n; ++i) {
                std::uint16_t h;
                std::memcpy(&h, bytes.data() + i * 2, 2);
                out[i] = static_cast<double>(bf16_bits_to_f32(h));
            }
            break;
        }
    }
    return out;
}

TensorEntry TensorEntry::from_f64(const std::vector<double>& values,
                                  std::vector<std::size_t> shape, Dtype dtype) {
    TensorEntry entry;
    entry.dtype = dtype;
    entry.shape = std::move(shape);
    if (entry.element_count() != values.size()) {
        throw DimensionError("tensor entry: value count does not match shape");
    }
    entry.bytes.resize(values.size() * dtype_size(dtype));
    switch (dtype) {
        case Dtype::f32: {
            for (std::size_t i = 0; i < values.size(); ++i) {
                const float f = static_cast<float>(values[i]);
                std::memcpy(entry.bytes.data() + i * 4, &f, 4);
            }
            break;
        }
        case Dtype::f16: {
            for (std::size_t i = 0; i < values.size(); ++i) {
                const std::uint16_t h = f32_to_f16_bits(static_cast<float>(values[i]));
                std::memcpy(entry.bytes.data() + i * 2, &h, 2);
            }
            break;
        }
        case Dtype::bf16:
            throw DomainError("bf16 write is not supported");
    }
    return entry;
}

void write_safetensors(const TensorMap& map, const std::filesystem::path& path) {
    json header = json::object();
    std::size_t offset = 0;
    for (const auto& [name, entry] : map.entries) {
        const std::size_t end = offset + entry.bytes.size();
        header[name] = {
            {"dtype", dtype_name(entry.dtype)},
            {"shape", entry.shape},
            {"data_offsets", {offset, end}},
        };
        offset = end;
    }
    // nlohmann keeps object keys sorted; dump() emits no whitespace.
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    std::uint64_t header_len = header_str.size();
    std::array<char, 8> len_le{};
    for (int i = 0; i < 8; ++i) {
        len_le[i] = static_cast<char>((header_len >> (8 * i)) & 0xff);
    }
    out.write(len_le.data(), 8);
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const auto& [name, entry] : map.entries) {
        out.write(reinterpret_cast<const char*>(entry.bytes.data()),
                  static_cast<std::streamsize>(entry.bytes.size()));
    }
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

TensorMap read_safetensors(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    const std::uint64_t file_size = static_cast<std::uint64_t>(in.tellg());
    in.seekg(0);
    if (file_size < 8) {
        throw ParseError(ParseError::Kind::truncated, "file shorter than the 8-byte length prefix");
    }
    std::array<unsigned char, 8> len_le{};
    in.read(reinterpret_cast<char*>(len_le.data()), 8);
    std::uint64_t header_len = 0;
    for (int i = 0; i < 8; ++i) {
        header_len |= static_cast<std::uint64_t>(len_le[i]) << (8 * i);
    }
    if (header_len == 0) {
        throw ParseError(ParseError::Kind::bad_header, "header length is zero");
    }
    if (8 + header_len > file_size) {
        throw ParseError(ParseError::Kind::truncated, "file shorter than the declared header");
    }
    std::string header_str(header_len, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(header_len));

    json header = json::parse(header_str, nullptr, /*allow_exceptions=*/false);
    if (header.is_discarded() || !header.is_object()) {
        throw ParseError(ParseError::Kind::bad_header, "header is not a JSON object");
    }

    const std::uint64_t data_size = file_size - 8 - header_len;
    struct Region {
        std::string name;
        std::uint64_t begin;
        std::uint64_t end;
    };
    std::vector<Region> regions;

    TensorMap map;
    for (const auto& [name, info] : header.items()) {
        if (name == "__metadata__") {
            continue;
        }
        if (!info.is_object() || !info.contains("dtype") || !info.contains("shape") ||
            !info.contains("data_offsets")) {
            throw ParseError(ParseError::Kind::bad_header,
                             "tensor \"" + name + "\" lacks dtype/shape/data_offsets");
        }
        TensorEntry entry;
        entry.dtype = dtype_from_name(info["dtype"].get<std::string>());
        for (const auto& d : info["shape"]) {
            if (!d.is_number_unsigned()) {
                throw ParseError(ParseError::Kind::bad_header,
                                 "tensor \"" + name + "\" has a non-integer shape entry");
            }
            entry.shape.push_back(d.get<std::size_t>());
        }
        const auto& offsets = info["data_offsets"];
        if (!offsets.is_array() || offsets.size() != 2) {
            throw ParseError(ParseError::Kind::bad_header,
                             "tensor \"" + name + "\" has malformed data_offsets");
        }
        const std::uint64_t begin = offsets[0].get<std::uint64_t>();
        const std::uint64_t end = offsets[1].get<std::uint64_t>();
        const std::uint64_t expected = entry.element_count() * dtype_size(entry.dtype);
        if (end < begin || end - begin != expected) {
            throw ParseError(ParseError::Kind::bad_offsets,
                             "tensor \"" + name + "\" offsets disagree with its shape");
        }
        if (end > data_size) {
            throw ParseError(ParseError::Kind::truncated,
                             "file shorter than the declared data region");
        }
        regions.push_back({name, begin, end});

        entry.bytes.resize(expected);
        in.seekg(static_cast<std::streamoff>(8 + header_len + begin));
        in.read(reinterpret_cast<char*>(entry.bytes.data()),
                static_cast<std::streamsize>(expected));
        if (!in) {
            throw ParseError(ParseError::Kind::truncated, "tensor data read failed");
        }
        map.entries.emplace(name, std::move(entry));
    }

    // Offsets must tile the data region exactly: start at 0, no gaps, no overlap.
    std::sort(regions.begin(), regions.end(),
              [](const Region& a, const Region& b) { return a.begin < b.begin; });
    std::uint64_t cursor = 0;
    for (const Region& r : regions) {
        if (r.begin != cursor) {
            throw ParseError(ParseError::Kind::bad_offsets,
                             "tensor \"" + r.name + "\" offsets overlap or leave a gap");
        }
        cursor = r.end;
    }
    if (cursor != data_size) {
        throw ParseError(ParseError::Kind::bad_offsets,
                         "data region extends past the last declared tensor");
    }
    return map;
}

}  // namespace loralego
