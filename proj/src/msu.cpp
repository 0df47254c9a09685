// SPDX-License-Identifier: Apache-2.0
#include "loralego/msu.hpp"

#include <string>

#include "loralego/errors.hpp"

namespace loralego {

std::vector<double> Msu::combined() const {
    std::vector<double> s;
    s.reserve(a.size() + b.size());
    s.insert(s.end(), a.begin(), a.end());
    s.insert(s.end(), b.begin(), b.end());
    return s;
}

LoraAdapter fold_scaling(const LoraAdapter& adapter) {
    if (adapter.scaling_folded) {
        throw StateError("adapter \"" + adapter.name + "\" already has its scale folded");
    }
    LoraAdapter out = adapter;
    const double factor = adapter.scaling();
    for (auto& [path, layer] : out.layers) {
        for (double& v : layer.b.data()) {
            v *= factor;
        }
    }
    out.alpha = static_cast<double>(out.rank);
    out.scaling_folded = true;
    return out;
}

std::vector<Msu> extract_msus(const LoraLayer& layer, const MsuSource& meta) {
    std::vector<Msu> msus;
    msus.reserve(layer.rank());
    for (std::size_t i = 0; i < layer.rank(); ++i) {
        Msu msu;
        const auto row = layer.a.row(i);
        msu.a.assign(row.begin(), row.end());
        msu.b = layer.b.col(i);
        msu.source = meta;
        msu.source.rank_index = i;
        msus.push_back(std::move(msu));
    }
    return msus;
}

LoraLayer assemble_layer(std::span<const Msu> msus) {
    if (msus.empty()) {
        throw ValidationError(ValidationError::Kind::invalid_value,
                              "assemble_layer: empty MSU list");
    }
    const std::size_t d_in = msus.front().a.size();
    const std::size_t d_out = msus.front().b.size();
    for (const Msu& msu : msus) {
        if (msu.a.size() != d_in || msu.b.size() != d_out) {
            throw ValidationError(ValidationError::Kind::shape_conflict,
                                  "assemble_layer: MSU dims differ across the list");
        }
    }
    LoraLayer layer{Matrix(msus.size(), d_in), Matrix(d_out, msus.size())};
    for (std::size_t i = 0; i < msus.size(); ++i) {
        auto row = layer.a.row(i);
        for (std::size_t j = 0; j < d_in; ++j) {
            row[j] = msus[i].a[j];
        }
        for (std::size_t j = 0; j < d_out; ++j) {
            layer.b(j, i) = msus[i].b[j];
        }
    }
    return layer;
}

LoraLayer permute_layer(const LoraLayer& layer, const PermutationSpec& p) {
    if (p.size() != layer.rank()) {
        throw DimensionError("permute_layer: permutation length " + std::to_string(p.size()) +
                             " vs rank " + std::to_string(layer.rank()));
    }
    LoraLayer out;
    out.a = apply_row_permutation(layer.a, p);
    // B' = B·Pᵀ places column p[i] of B at column i, mirroring the rows of A.
    out.b = Matrix(layer.d_out(), layer.rank());
    for (std::size_t i = 0; i < layer.rank(); ++i) {
        const std::size_t src = p[i];
        for (std::size_t j = 0; j < layer.d_out(); ++j) {
            out.b(j, i) = layer.b(j, src);
        }
    }
    return out;
}

LoraLayer concat_layers(std::span<const LoraLayer> layers, std::span<const double> weights) {
    if (layers.empty()) {
        throw ValidationError(ValidationError::Kind::invalid_value,
                              "concat_layers: empty layer list");
    }
    if (layers.size() != weights.size()) {
        throw DimensionError("concat_layers: " + std::to_string(layers.size()) +
                             " layers but " + std::to_string(weights.size()) + " weights");
    }
    const std::size_t d_in = layers.front().d_in();
    const std::size_t d_out = layers.front().d_out();
    std::size_t total_rank = 0;
    for (const LoraLayer& layer : layers) {
        if (layer.d_in() != d_in || layer.d_out() != d_out) {
            throw ValidationError(ValidationError::Kind::shape_conflict,
                                  "concat_layers: layer dims differ");
        }
        total_rank += layer.rank();
    }
    LoraLayer out{Matrix(total_rank, d_in), Matrix(d_out, total_rank)};
    std::size_t base = 0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const LoraLayer& src = layers[l];
        const double w = weights[l];
        for (std::size_t i = 0; i < src.rank(); ++i) {
            auto dst_row = out.a.row(base + i);
            const auto src_row = src.a.row(i);
            for (std::size_t j = 0; j < d_in; ++j) {
                dst_row[j] = src_row[j];
            }
            for (std::size_t j = 0; j < d_out; ++j) {
                out.b(j, base + i) = w * src.b(j, i);
            }
        }
        base += src.rank();
    }
    return out;
}

Matrix delta_weight(const LoraLayer& layer, double scale) {
    Matrix delta = matmul(layer.b, layer.a);
    if (scale != 1.0) {
        for (double& v : delta.data()) {
            v *= scale;
        }
    }
    return delta;
}

Matrix effective_delta(const LoraAdapter& adapter, const std::string& layer_path) {
    const auto it = adapter.layers.find(layer_path);
    if (it == adapter.layers.end()) {
        throw DomainError("adapter \"" + adapter.name + "\" has no layer \"" + layer_path +
                          "\"");
    }
    return delta_weight(it->second, adapter.scaling());
}

}  // namespace loralego
