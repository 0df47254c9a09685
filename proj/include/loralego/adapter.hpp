// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "loralego/matrix.hpp"
#include "loralego/tensor_map.hpp"

namespace loralego {

/// One adapted module: a is the r×d_in down-projection, b the d_out×r
/// up-projection, so the delta is b·a.
struct LoraLayer {
    Matrix a;
    Matrix b;

    std::size_t rank() const { return a.rows(); }
    std::size_t d_in() const { return a.cols(); }
    std::size_t d_out() const { return b.rows(); }
};

/// A named adapter: per-module-path layers plus the rank/alpha metadata a
/// loader needs to apply the (alpha / rank) output scale.
struct LoraAdapter {
    std::string name;
    std::map<std::string, LoraLayer> layers;  // keyed by module path
    double alpha = 1.0;
    std::size_t rank = 1;
    bool scaling_folded = false;

    std::vector<std::string> target_modules;
    nlohmann::json extra_config = nlohmann::json::object();  // preserved verbatim

    /// Loader multiplier alpha / rank (1 once the scale has been folded).
    double scaling() const { return alpha / static_cast<double>(rank); }
};

/// Checks the structural invariants (rank/shape consistency, positive alpha,
/// finite entries); throws ValidationError.
void validate_adapter(const LoraAdapter& adapter);

/// Reads <dir>/adapter_model.safetensors + <dir>/adapter_config.json,
/// pairing "<path>.lora_A.weight" / "<path>.lora_B.weight" tensors. Tensors
/// matching neither pattern are an error unless ignore_extra is set.
LoraAdapter load_adapter(const std::filesystem::path& dir, bool ignore_extra = false);

/// Inverse of load_adapter up to dtype rounding. Writes config keys r,
/// lora_alpha and target_modules from the adapter, everything else verbatim
/// from extra_config.
void save_adapter(const LoraAdapter& adapter, const std::filesystem::path& dir,
                  Dtype dtype = Dtype::f32);

}  // namespace loralego
