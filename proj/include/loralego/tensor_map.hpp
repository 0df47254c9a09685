// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace loralego {

/// On-disk element types. f32/f16/bf16 are readable; the writer emits
/// f32 or f16.
enum class Dtype {
    f32,
    f16,
    bf16,
};

std::size_t dtype_size(Dtype dtype);
const char* dtype_name(Dtype dtype);  // safetensors tag, e.g. "F32"

/// One stored tensor: raw little-endian bytes plus shape and element type.
struct TensorEntry {
    Dtype dtype = Dtype::f32;
    std::vector<std::size_t> shape;
    std::vector<std::uint8_t> bytes;

    std::size_t element_count() const;

    /// Decodes to f64 values in storage order.
    std::vector<double> to_f64() const;

    static TensorEntry from_f64(const std::vector<double>& values,
                                std::vector<std::size_t> shape, Dtype dtype);
};

/// Name-keyed tensor collection; iteration order is the sorted name order,
/// which is also the on-disk data order.
struct TensorMap {
    std::map<std::string, TensorEntry> entries;
};

// Scalar conversions used by the f16/bf16 paths. Round-to-nearest-even.
std::uint16_t f32_to_f16_bits(float value);
float f16_bits_to_f32(std::uint16_t bits);
float bf16_bits_to_f32(std::uint16_t bits);

}  // namespace loralego
