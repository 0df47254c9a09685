// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "loralego/tensor_map.hpp"

namespace loralego {

// safetensors container layout:
//   [8-byte little-endian header length N] [N bytes of JSON header]
//   [packed tensor data]
// The header maps tensor names to {"dtype", "shape", "data_offsets"}, with
// offsets relative to the start of the data region. An optional
// "__metadata__" entry carries free-form strings and is skipped on read.

/// Writes the map with sorted header keys, no insignificant whitespace, and
/// data packed contiguously from offset 0 in name order. read_safetensors
/// inverts it exactly.
void write_safetensors(const TensorMap& map, const std::filesystem::path& path);

/// Parses and validates a container; throws ParseError with a kind of
/// truncated / bad_header / unknown_dtype / bad_offsets, or IoError when the
/// file cannot be opened.
TensorMap read_safetensors(const std::filesystem::path& path);

}  // namespace loralego
