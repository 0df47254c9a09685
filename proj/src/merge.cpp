// SPDX-License-Identifier: Apache-2.0
#include "loralego/merge.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "loralego/errors.hpp"

namespace loralego {

namespace {

/// Folds every adapter's alpha/rank scale so the factors compare directly.
std::vector<LoraAdapter> folded_copy(std::span<const LoraAdapter> adapters) {
    if (adapters.empty()) {
        throw DomainError("merge: need at least one adapter");
    }
    std::vector<LoraAdapter> out;
    out.reserve(adapters.size());
    for (const LoraAdapter& adapter : adapters) {
        out.push_back(adapter.scaling_folded ? adapter : fold_scaling(adapter));
    }
    return out;
}

/// Layer paths to merge. By default every adapter must cover the same set;
/// with union_layers the union is taken instead.
std::vector<std::string> merge_layer_paths(std::span<const LoraAdapter> adapters,
                                           bool union_layers) {
    std::set<std::string> all;
    for (const LoraAdapter& adapter : adapters) {
        for (const auto& [path, layer] : adapter.layers) {
            all.insert(path);
        }
    }
    if (!union_layers) {
        for (const LoraAdapter& adapter : adapters) {
            for (const std::string& path : all) {
                if (!adapter.layers.count(path)) {
                    throw ValidationError(ValidationError::Kind::layer_set_mismatch,
                                          "adapter \"" + adapter.name + "\" lacks layer \"" +
                                              path + "\" (pass --union to merge anyway)");
                }
            }
        }
    }
    return {all.begin(), all.end()};
}

void check_layer_shapes(std::span<const LoraAdapter> adapters, const std::string& path) {
    const LoraLayer* first = nullptr;
    const LoraAdapter* first_owner = nullptr;
    for (const LoraAdapter& adapter : adapters) {
        const auto it = adapter.layers.find(path);
        if (it == adapter.layers.end()) {
            continue;
        }
        if (!first) {
            first = &it->second;
            first_owner = &adapter;
            continue;
        }
        if (it->second.d_in() != first->d_in() || it->second.d_out() != first->d_out()) {
            throw ValidationError(
                ValidationError::Kind::shape_conflict,
                "layer \"" + path + "\": " + first_owner->name + " has " +
                    std::to_string(first->d_out()) + "x" + std::to_string(first->d_in()) +
                    " but " + adapter.name + " has " + std::to_string(it->second.d_out()) +
                    "x" + std::to_string(it->second.d_in()));
        }
    }
}

void require_equal_ranks(std::span<const LoraAdapter> adapters, const char* method) {
    for (const LoraAdapter& adapter : adapters) {
        if (adapter.rank != adapters.front().rank) {
            throw ValidationError(ValidationError::Kind::rank_mismatch,
                                  std::string(method) + " requires equal ranks, but \"" +
                                      adapters.front().name + "\" has rank " +
                                      std::to_string(adapters.front().rank) + " and \"" +
                                      adapter.name + "\" has rank " +
                                      std::to_string(adapter.rank));
        }
    }
}

void require_same_layer_sets(std::span<const LoraAdapter> adapters, const char* method) {
    for (const LoraAdapter& adapter : adapters) {
        if (adapter.layers.size() != adapters.front().layers.size()) {
            throw ValidationError(ValidationError::Kind::layer_set_mismatch,
                                  std::string(method) + ": adapters cover different layers");
        }
        for (const auto& [path, layer] : adapters.front().layers) {
            if (!adapter.layers.count(path)) {
                throw ValidationError(ValidationError::Kind::layer_set_mismatch,
                                      std::string(method) + ": adapter \"" + adapter.name +
                                          "\" lacks layer \"" + path + "\"");
            }
        }
    }
}

}  // namespace

KPolicy KPolicy::parse(const std::string& text) {
    if (text.empty()) {
        throw DomainError("k policy: empty string");
    }
    try {
        std::size_t consumed = 0;
        if (text.back() == 'r' || text.back() == 'R') {
            const std::string head = text.substr(0, text.size() - 1);
            const double m = head.empty() ? 1.0 : std::stod(head, &consumed);
            if (!head.empty() && consumed != head.size()) {
                throw std::invalid_argument(text);
            }
            if (!(m > 0.0)) {
                throw DomainError("k policy: multiple must be positive");
            }
            return multiple_of_rank(m);
        }
        const long long k = std::stoll(text, &consumed);
        if (consumed != text.size()) {
            throw std::invalid_argument(text);
        }
        if (k < 1) {
            throw DomainError("k policy: explicit k must be >= 1");
        }
        return explicit_value(static_cast<std::size_t>(k));
    } catch (const std::invalid_argument&) {
        throw DomainError("k policy: cannot parse \"" + text + "\" (expected e.g. 12 or 2r)");
    } catch (const std::out_of_range&) {
        throw DomainError("k policy: value out of range in \"" + text + "\"");
    }
}

nlohmann::json MergeReport::to_json() const {
    nlohmann::json out = nlohmann::json::array();
    for (const LayerMergeRecord& rec : layers) {
        nlohmann::json clusters = nlohmann::json::array();
        for (const ClusterRecord& c : rec.clusters) {
            clusters.push_back({
                {"size", c.size},
                {"member_indices", c.member_indices},
                {"adapter_members", c.adapter_members},
                {"mean_member_inf_norm", c.mean_member_inf_norm},
                {"centroid_inf_norm", c.centroid_inf_norm},
                {"mean_member_l2_norm", c.mean_member_l2_norm},
                {"centroid_l2_norm", c.centroid_l2_norm},
                {"applied_scale", c.applied_scale},
            });
        }
        out.push_back({
            {"layer", rec.layer},
            {"pool_size", rec.pool_size},
            {"k", rec.k},
            {"r_ref", rec.r_ref},
            {"inertia", rec.inertia},
            {"iterations", rec.iterations},
            {"output_factor", rec.output_factor},
            {"clusters", clusters},
        });
    }
    return out;
}

void MergeReport::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out << to_json().dump(2) << "\n";
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

MsuPool build_pool(std::span<const LoraAdapter> adapters, const std::string& layer_path) {
    MsuPool pool;
    pool.layer = layer_path;
    for (const LoraAdapter& adapter : adapters) {
        const auto it = adapter.layers.find(layer_path);
        if (it == adapter.layers.end()) {
            continue;
        }
        if (pool.msus.empty()) {
            pool.d_in = it->second.d_in();
            pool.d_out = it->second.d_out();
        }
        auto msus = extract_msus(it->second, {adapter.name, layer_path, 0});
        pool.msus.insert(pool.msus.end(), std::make_move_iterator(msus.begin()),
                         std::make_move_iterator(msus.end()));
    }
    return pool;
}

std::vector<double> parameter_reweight(const std::vector<double>& centroid,
                                       const std::vector<std::vector<double>>& members) {
    if (members.empty()) {
        throw DomainError("parameter_reweight: empty member list");
    }
    const double centroid_norm = inf_norm(centroid);
    if (centroid_norm == 0.0) {
        return centroid;  // scaling a zero vector is undefined and pointless
    }
    double mean_norm = 0.0;
    for (const auto& member : members) {
        mean_norm += inf_norm(member);
    }
    mean_norm /= static_cast<double>(members.size());
    std::vector<double> out = centroid;
    const double scale = mean_norm / centroid_norm;
    for (double& v : out) {
        v *= scale;
    }
    return out;
}

double output_reweight_factor(double r_ref, std::size_t k) {
    if (!(r_ref > 0.0)) {
        throw DomainError("output_reweight_factor: r_ref must be positive");
    }
    if (k < 1) {
        throw DomainError("output_reweight_factor: k must be >= 1");
    }
    return std::sqrt(r_ref / static_cast<double>(k));
}

namespace {

LayerMergeRecord merge_one_layer(std::span<const LoraAdapter> adapters,
                                 const std::string& path, const MergeOptions& opts,
                                 LoraLayer& out_layer) {
    check_layer_shapes(adapters, path);
    MsuPool pool = build_pool(adapters, path);
    if (pool.msus.empty()) {
        throw ValidationError(ValidationError::Kind::layer_set_mismatch,
                              "no adapter contributes layer \"" + path + "\"");
    }

    double rank_sum = 0.0;
    std::size_t contributing = 0;
    for (const LoraAdapter& adapter : adapters) {
        if (adapter.layers.count(path)) {
            rank_sum += static_cast<double>(adapter.rank);
            ++contributing;
        }
    }
    const double r_ref = rank_sum / static_cast<double>(contributing);

    std::size_t k;
    if (opts.k_policy.explicit_k) {
        k = *opts.k_policy.explicit_k;
        if (k < 1 || k > pool.msus.size()) {
            throw DomainError("layer \"" + path + "\": k = " + std::to_string(k) +
                              " outside [1, " + std::to_string(pool.msus.size()) + "]");
        }
    } else {
        const auto scaled =
            static_cast<long long>(std::llround(opts.k_policy.rank_multiple * r_ref));
        k = static_cast<std::size_t>(
            std::clamp<long long>(scaled, 1, static_cast<long long>(pool.msus.size())));
    }

    std::vector<std::vector<double>> points;
    points.reserve(pool.msus.size());
    for (const Msu& msu : pool.msus) {
        points.push_back(msu.combined());
    }

    KmeansConfig cfg = opts.kmeans;
    cfg.k = k;
    cfg.seed = derive_seed(opts.seed, path);
    const ClusterResult clusters = kmeans(points, cfg);

    LayerMergeRecord record;
    record.layer = path;
    record.pool_size = pool.msus.size();
    record.k = k;
    record.r_ref = r_ref;
    record.inertia = clusters.inertia;
    record.iterations = clusters.iterations_run;
    record.output_factor =
        opts.output_reweight ? output_reweight_factor(r_ref, k) : 1.0;

    const auto members_by_cluster = clusters.members();
    std::vector<Msu> merged_msus;
    merged_msus.reserve(k);
    for (std::size_t c = 0; c < k; ++c) {
        const auto& member_ids = members_by_cluster[c];
        std::vector<std::vector<double>> member_vectors;
        member_vectors.reserve(member_ids.size());
        for (const std::size_t id : member_ids) {
            member_vectors.push_back(points[id]);
        }

        ClusterRecord crec;
        crec.size = member_ids.size();
        crec.member_indices = member_ids;
        for (const std::size_t id : member_ids) {
            ++crec.adapter_members[pool.msus[id].source.adapter];
        }
        double inf_sum = 0.0;
        double l2_sum = 0.0;
        for (const auto& member : member_vectors) {
            inf_sum += inf_norm(member);
            l2_sum += l2_norm(member);
        }
        crec.mean_member_inf_norm = inf_sum / static_cast<double>(member_ids.size());
        crec.mean_member_l2_norm = l2_sum / static_cast<double>(member_ids.size());
        crec.centroid_inf_norm = inf_norm(clusters.centroids[c]);
        crec.centroid_l2_norm = l2_norm(clusters.centroids[c]);

        std::vector<double> centroid = clusters.centroids[c];
        if (opts.param_reweight) {
            centroid = parameter_reweight(centroid, member_vectors);
            crec.applied_scale = crec.centroid_inf_norm == 0.0
                                     ? 1.0
                                     : crec.mean_member_inf_norm / crec.centroid_inf_norm;
        }
        record.clusters.push_back(std::move(crec));

        Msu msu;
        msu.a.assign(centroid.begin(), centroid.begin() + static_cast<long>(pool.d_in));
        msu.b.assign(centroid.begin() + static_cast<long>(pool.d_in), centroid.end());
        if (record.output_factor != 1.0) {
            for (double& v : msu.b) {
                v *= record.output_factor;
            }
        }
        msu.source = {"merged", path, c};
        merged_msus.push_back(std::move(msu));
    }

    out_layer = assemble_layer(merged_msus);
    return record;
}

}  // namespace

std::pair<LoraAdapter, MergeReport> lego_merge(std::span<const LoraAdapter> adapters,
                                               const MergeOptions& opts) {
    const std::vector<LoraAdapter> folded = folded_copy(adapters);
    const std::vector<std::string> paths = merge_layer_paths(folded, opts.union_layers);
    if (paths.empty()) {
        throw ValidationError(ValidationError::Kind::invalid_value,
                              "merge: adapters contain no layers");
    }

    std::vector<LoraLayer> layers(paths.size());
    std::vector<LayerMergeRecord> records(paths.size());
    std::vector<std::exception_ptr> failures(paths.size());
    // Layers are independent; per-layer seeds derive from the layer path, so
    // the outcome does not depend on the schedule.
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(paths.size()); ++i) {
        try {
            records[i] = merge_one_layer(folded, paths[i], opts, layers[i]);
        } catch (...) {
            failures[i] = std::current_exception();
        }
    }
    for (const std::exception_ptr& failure : failures) {
        if (failure) {
            std::rethrow_exception(failure);
        }
    }

    // A single on-disk (r, alpha) pair must describe every layer.
    for (const LayerMergeRecord& rec : records) {
        if (rec.k != records.front().k) {
            throw ValidationError(ValidationError::Kind::rank_mismatch,
                                  "resolved k differs across layers (" +
                                      std::to_string(records.front().k) + " vs " +
                                      std::to_string(rec.k) +
                                      "); pass an explicit k that fits every layer");
        }
    }

    LoraAdapter merged;
    merged.name = "merged";
    merged.rank = records.front().k;
    merged.alpha = static_cast<double>(merged.rank);
    merged.scaling_folded = true;
    merged.target_modules = folded.front().target_modules;
    merged.extra_config = folded.front().extra_config;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        merged.layers.emplace(paths[i], std::move(layers[i]));
    }

    MergeReport report;
    report.layers = std::move(records);
    return {std::move(merged), std::move(report)};
}

LoraAdapter weight_average(std::span<const LoraAdapter> adapters) {
    // Delegates so that task_arithmetic(·, 1/n) is bit-identical by
    // construction.
    LoraAdapter out = task_arithmetic(adapters, 1.0 / static_cast<double>(adapters.size()));
    out.name = "average";
    return out;
}

LoraAdapter task_arithmetic(std::span<const LoraAdapter> adapters, double coefficient) {
    const std::vector<LoraAdapter> folded = folded_copy(adapters);
    require_equal_ranks(folded, "task arithmetic");
    require_same_layer_sets(folded, "task arithmetic");

    LoraAdapter out = folded.front();
    out.name = "task_arithmetic";
    for (auto& [path, layer] : out.layers) {
        check_layer_shapes(folded, path);
        Matrix a_sum = layer.a;
        Matrix b_sum = layer.b;
        for (std::size_t i = 1; i < folded.size(); ++i) {
            const LoraLayer& other = folded[i].layers.at(path);
            a_sum = add(a_sum, other.a);
            b_sum = add(b_sum, other.b);
        }
        layer.a = scale(a_sum, coefficient);
        layer.b = scale(b_sum, coefficient);
    }
    return out;
}

namespace detail {

Matrix ties_combine(std::span<const Matrix> matrices, double density, double merge_scale) {
    const std::size_t n = matrices.front().size();
    const std::size_t keep = static_cast<std::size_t>(
        std::ceil(density * static_cast<double>(n)));

    // Trim: keep the top entries by magnitude per adapter (ties resolved by
    // index for determinism).
    std::vector<std::vector<double>> trimmed(matrices.size(),
                                             std::vector<double>(n, 0.0));
    std::vector<std::size_t> order(n);
    for (std::size_t m = 0; m < matrices.size(); ++m) {
        const auto& data = matrices[m].data();
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t lhs, std::size_t rhs) {
            const double la = std::fabs(data[lhs]);
            const double ra = std::fabs(data[rhs]);
            return la != ra ? la > ra : lhs < rhs;
        });
        for (std::size_t i = 0; i < keep && i < n; ++i) {
            trimmed[m][order[i]] = data[order[i]];
        }
    }

    Matrix out(matrices.front().rows(), matrices.front().cols());
    for (std::size_t i = 0; i < n; ++i) {
        double mass = 0.0;
        for (const auto& t : trimmed) {
            mass += t[i];
        }
        const double elected = mass > 0.0 ? 1.0 : (mass < 0.0 ? -1.0 : 0.0);
        if (elected == 0.0) {
            continue;
        }
        double sum = 0.0;
        std::size_t agreeing = 0;
        for (const auto& t : trimmed) {
            if (t[i] * elected > 0.0) {
                sum += t[i];
                ++agreeing;
            }
        }
        out.data()[i] = merge_scale * sum / static_cast<double>(agreeing);
    }
    return out;
}

}  // namespace detail

LoraAdapter ties_merge(std::span<const LoraAdapter> adapters, double density,
                       double merge_scale) {
    if (!(density > 0.0) || density > 1.0) {
        throw DomainError("ties_merge: density must be in (0, 1]");
    }
    const std::vector<LoraAdapter> folded = folded_copy(adapters);
    require_equal_ranks(folded, "ties merging");
    require_same_layer_sets(folded, "ties merging");

    LoraAdapter out = folded.front();
    out.name = "ties";
    for (auto& [path, layer] : out.layers) {
        check_layer_shapes(folded, path);
        std::vector<Matrix> a_parts;
        std::vector<Matrix> b_parts;
        for (const LoraAdapter& adapter : folded) {
            const LoraLayer& src = adapter.layers.at(path);
            a_parts.push_back(src.a);
            b_parts.push_back(src.b);
        }
        layer.a = detail::ties_combine(a_parts, density, merge_scale);
        layer.b = detail::ties_combine(b_parts, density, merge_scale);
    }
    return out;
}

LoraAdapter ensemble_merge(std::span<const LoraAdapter> adapters) {
    const std::vector<LoraAdapter> folded = folded_copy(adapters);
    require_same_layer_sets(folded, "ensemble");

    LoraAdapter out;
    out.name = "ensemble";
    out.scaling_folded = true;
    out.target_modules = folded.front().target_modules;
    out.extra_config = folded.front().extra_config;
    const double weight = 1.0 / static_cast<double>(folded.size());
    std::size_t total_rank = 0;
    for (const LoraAdapter& adapter : folded) {
        total_rank += adapter.rank;
    }
    out.rank = total_rank;
    out.alpha = static_cast<double>(total_rank);

    for (const auto& [path, layer] : folded.front().layers) {
        check_layer_shapes(folded, path);
        std::vector<LoraLayer> parts;
        std::vector<double> weights;
        for (const LoraAdapter& adapter : folded) {
            parts.push_back(adapter.layers.at(path));
            weights.push_back(weight);
        }
        out.layers.emplace(path, concat_layers(parts, weights));
    }
    return out;
}

std::pair<LoraAdapter, MergeReport> prune_lora(const LoraAdapter& adapter, std::size_t k,
                                               MergeOptions opts) {
    if (k < 1 || k > adapter.rank) {
        throw DomainError("prune: k = " + std::to_string(k) + " outside [1, " +
                          std::to_string(adapter.rank) + "]");
    }
    opts.k_policy = KPolicy::explicit_value(k);
    const LoraAdapter adapters[] = {adapter};
    auto result = lego_merge(adapters, opts);
    result.first.name = adapter.name + "-pruned";
    return result;
}

}  // namespace loralego
