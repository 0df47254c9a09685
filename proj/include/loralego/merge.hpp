// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "loralego/adapter.hpp"
#include "loralego/kmeans.hpp"
#include "loralego/msu.hpp"

namespace loralego {

/// Target rank policy: an explicit k, or a multiple of the mean input rank
/// (the default is 2x, clamped per layer to [1, Σ ranks]).
struct KPolicy {
    std::optional<std::size_t> explicit_k;
    double rank_multiple = 2.0;

    static KPolicy explicit_value(std::size_t k) { return {k, 0.0}; }
    static KPolicy multiple_of_rank(double m) { return {std::nullopt, m}; }

    /// Parses "12" or "2r" / "1.5r".
    static KPolicy parse(const std::string& text);
};

struct MergeOptions {
    KPolicy k_policy;
    bool param_reweight = true;
    bool output_reweight = true;
    bool union_layers = false;  // merge layers missing from some adapters
    KmeansConfig kmeans;        // k and seed are overwritten per layer
    std::uint64_t seed = 0;
};

/// Per-cluster diagnostics captured while merging.
struct ClusterRecord {
    std::size_t size = 0;
    std::vector<std::size_t> member_indices;             // indices into the layer pool
    std::map<std::string, std::size_t> adapter_members;  // adapter name -> member count
    double mean_member_inf_norm = 0.0;
    double centroid_inf_norm = 0.0;  // before reweighting
    double mean_member_l2_norm = 0.0;
    double centroid_l2_norm = 0.0;  // before reweighting
    double applied_scale = 1.0;
};

struct LayerMergeRecord {
    std::string layer;
    std::size_t pool_size = 0;
    std::size_t k = 0;
    double r_ref = 0.0;  // mean contributing rank
    double inertia = 0.0;
    std::size_t iterations = 0;
    double output_factor = 1.0;
    std::vector<ClusterRecord> clusters;
};

struct MergeReport {
    std::vector<LayerMergeRecord> layers;

    nlohmann::json to_json() const;
    void write(const std::filesystem::path& path) const;
};

/// Gathers the named layer's MSUs from every adapter that has it, in
/// adapter input order. Adapters must already be scaling-folded.
MsuPool build_pool(std::span<const LoraAdapter> adapters, const std::string& layer_path);

/// Rescales the centroid so its infinity norm matches the mean member
/// infinity norm; the direction is unchanged. A zero centroid is returned
/// as-is.
std::vector<double> parameter_reweight(const std::vector<double>& centroid,
                                       const std::vector<std::vector<double>>& members);

/// √(r_ref / k), the output scale that keeps entry variance at the
/// reference-rank level.
double output_reweight_factor(double r_ref, std::size_t k);

/// The clustering pipeline: per layer, pool MSUs, k-means them into k
/// clusters, and assemble the centroids into a rank-k layer, applying the
/// dual reweighting. The result carries alpha = k so a standard loader
/// applies unit scale.
std::pair<LoraAdapter, MergeReport> lego_merge(std::span<const LoraAdapter> adapters,
                                               const MergeOptions& opts);

/// Element-wise mean of the scaling-folded factors. Requires equal ranks.
LoraAdapter weight_average(std::span<const LoraAdapter> adapters);

/// A' = p·ΣAᵢ, B' = p·ΣBᵢ on the scaling-folded factors.
LoraAdapter task_arithmetic(std::span<const LoraAdapter> adapters, double coefficient);

/// Trim to the top density fraction by magnitude per adapter, elect the
/// sign of each coordinate by summed mass, and average the entries that
/// agree with it.
LoraAdapter ties_merge(std::span<const LoraAdapter> adapters, double density = 0.5,
                       double merge_scale = 1.0);

/// Output-exact ensemble: concatenates every MSU with weight 1/n, so the
/// merged delta equals the mean of the per-adapter deltas.
LoraAdapter ensemble_merge(std::span<const LoraAdapter> adapters);

/// Rank reduction of a single adapter: lego_merge on the singleton list
/// with an explicit k in [1, rank].
std::pair<LoraAdapter, MergeReport> prune_lora(const LoraAdapter& adapter, std::size_t k,
                                               MergeOptions opts = {});

namespace detail {
/// The per-matrix ties kernel (trim / elect / disjoint mean), exposed for
/// direct testing.
Matrix ties_combine(std::span<const Matrix> matrices, double density, double merge_scale);
}  // namespace detail

}  // namespace loralego
