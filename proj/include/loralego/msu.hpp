// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "loralego/adapter.hpp"
#include "loralego/permutation.hpp"

namespace loralego {

struct MsuSource {
    std::string adapter;
    std::string layer;
    std::size_t rank_index = 0;
};

/// One rank's worth of parameters: row i of A and column i of B, handled as
/// the combined vector [a, b] of length d_in + d_out.
struct Msu {
    std::vector<double> a;  // length d_in
    std::vector<double> b;  // length d_out
    MsuSource source;

    std::vector<double> combined() const;
};

/// All MSUs of one layer path gathered from every candidate adapter.
struct MsuPool {
    std::string layer;
    std::size_t d_in = 0;
    std::size_t d_out = 0;
    std::vector<Msu> msus;
};

/// Multiplies every B by alpha/rank and sets alpha = rank, leaving the
/// effective delta (alpha/rank)·B·A unchanged. Folding twice is an error.
LoraAdapter fold_scaling(const LoraAdapter& adapter);

/// Splits a layer into its rank MSUs; lossless inverse of assemble_layer.
std::vector<Msu> extract_msus(const LoraLayer& layer, const MsuSource& meta);

/// Stacks a-vectors as the rows of A and b-vectors as the columns of B.
LoraLayer assemble_layer(std::span<const Msu> msus);

/// A' = P·A, B' = B·Pᵀ: relabels the MSUs without changing B·A.
LoraLayer permute_layer(const LoraLayer& layer, const PermutationSpec& p);

/// Stacks layers into one of rank Σ ranks, pre-multiplying each block's
/// b-vectors by its weight, so the delta becomes Σ wⱼ·BⱼAⱼ.
LoraLayer concat_layers(std::span<const LoraLayer> layers, std::span<const double> weights);

/// scale · B·A.
Matrix delta_weight(const LoraLayer& layer, double scale = 1.0);

/// The delta a loader would apply: (alpha/rank) · B·A for the named layer.
Matrix effective_delta(const LoraAdapter& adapter, const std::string& layer_path);

}  // namespace loralego
