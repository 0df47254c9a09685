// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "loralego/adapter.hpp"
#include "loralego/merge.hpp"
#include "loralego/rng.hpp"

namespace loralego {

/// A frozen base weight plus a ground-truth delta and probe pairs
/// y = (W0 + delta)·x, standing in for a fine-tuning task.
struct SyntheticTask {
    Matrix base;
    Matrix target_delta;
    std::vector<std::vector<double>> probe_x;
    std::vector<std::vector<double>> probe_y;
};

SyntheticTask make_task(Matrix base, Matrix target_delta, std::size_t n_probes, Rng& rng);

/// CSV-serializable experiment output. Re-running with the same seed
/// reproduces every byte: doubles are formatted with %.17g and rows are
/// accumulated in a fixed trial order.
struct ExperimentReport {
    std::string id;
    nlohmann::json params = nlohmann::json::object();
    std::uint64_t seed = 0;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::string to_csv() const;
    nlohmann::json sidecar() const;

    /// Writes <dir>/<id>.csv and <dir>/<id>.json.
    void write(const std::filesystem::path& dir) const;
};

enum class AdapterInit {
    gaussian,    // every factor entry N(0, 1)
    structured,  // MSUs drawn from a few prototypes plus small noise
};

/// Single-layer synthetic adapter (layer path "layer.0", alpha = rank).
LoraAdapter gen_synthetic_adapter(std::size_t d_in, std::size_t d_out, std::size_t rank,
                                  Rng& rng, AdapterInit init = AdapterInit::gaussian,
                                  std::size_t n_prototypes = 4, double noise = 1e-3);

struct FitResult {
    LoraLayer layer;
    double relative_residual = 0.0;  // ||target - B·A||_F / ||target||_F
    bool converged = false;
    std::size_t iterations = 0;
};

/// Alternating least squares on ||target - B·A||_F. Non-convergence is not
/// an error; the best iterate is returned with converged = false.
FitResult fit_lora_to_target(const Matrix& target, std::size_t rank, double tol = 1e-10,
                             std::size_t max_iters = 200);

/// W0·x + (alpha/rank)·B·A·x for the adapter's single layer.
std::vector<double> forward(const SyntheticTask& task, const LoraAdapter& adapter,
                            const std::vector<double>& x);

/// Merging an adapter with a randomly permuted copy of itself: per layer,
/// the relative delta error of the element-wise average (e_avg) vs the
/// clustering merge at k = r (e_lego). Requires rank >= 2.
ExperimentReport misalignment_experiment(const LoraAdapter& adapter, Rng& rng);

/// misalignment_experiment over `trials` fresh gaussian adapters, one row
/// per trial.
ExperimentReport misalignment_sweep(std::size_t d_in, std::size_t d_out, std::size_t rank,
                                    std::size_t trials, std::uint64_t seed);

/// Entry variance of gaussian-factor products at each k, raw and scaled by
/// r/k. Requires trials·p² >= 1e5 samples per configuration.
ExperimentReport variance_sweep(std::size_t p, std::size_t r,
                                const std::vector<std::size_t>& ks, std::size_t trials,
                                std::uint64_t seed);

/// Per-cluster centroid norm vs mean member norm over a merge of the given
/// adapters. Throws if any cluster violates the L2 triangle-inequality
/// bound centroid <= mean member + 1e-12.
ExperimentReport norm_decay_report(std::span<const LoraAdapter> adapters, std::size_t k,
                                   std::uint64_t seed);

/// Probe-set relative output error after pruning a fitted rank-r adapter to
/// ceil(f·r) for each keep fraction f.
ExperimentReport pruning_curve(const SyntheticTask& task, std::size_t rank,
                               const std::vector<double>& fractions, std::uint64_t seed);

/// Two adapters sharing r-1 MSUs and differing in one: relative error of
/// the element-wise average vs the clustering merge at k = r+1, both
/// measured against the union of distinct MSUs. The merge runs without the
/// output factor so exact preservation is measurable.
ExperimentReport conflict_experiment(std::size_t d_in, std::size_t d_out, std::size_t rank,
                                     std::size_t trials, std::uint64_t seed);

}  // namespace loralego
