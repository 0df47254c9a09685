// SPDX-License-Identifier: Apache-2.0
#include "loralego/harness.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <fstream>

#include "loralego/errors.hpp"
#include "loralego/version.hpp"

namespace loralego {

namespace {

constexpr const char* kLayerPath = "layer.0";

double relative_error(const Matrix& value, const Matrix& reference) {
    const double ref_norm = frobenius_norm(reference);
    const double diff_norm = frobenius_norm(subtract(value, reference));
    return ref_norm == 0.0 ? diff_norm : diff_norm / ref_norm;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (auto& v : m.data()) {
        v = rng.gaussian();
    }
    return m;
}

LoraAdapter single_layer_adapter(std::string name, LoraLayer layer) {
    LoraAdapter adapter;
    adapter.name = std::move(name);
    adapter.rank = layer.rank();
    adapter.alpha = static_cast<double>(adapter.rank);
    adapter.layers.emplace(kLayerPath, std::move(layer));
    return adapter;
}

const LoraLayer& sole_layer(const LoraAdapter& adapter) {
    if (adapter.layers.size() != 1) {
        throw DomainError("expected a single-layer adapter, got " +
                          std::to_string(adapter.layers.size()) + " layers");
    }
    return adapter.layers.begin()->second;
}

}  // namespace

SyntheticTask make_task(Matrix base, Matrix target_delta, std::size_t n_probes, Rng& rng) {
    if (!base.same_shape(target_delta)) {
        throw DimensionError("make_task: base and target delta shapes differ");
    }
    SyntheticTask task;
    task.base = std::move(base);
    task.target_delta = std::move(target_delta);
    const Matrix full = add(task.base, task.target_delta);
    for (std::size_t i = 0; i < n_probes; ++i) {
        std::vector<double> x = rng.gaussian_vector(full.cols());
        std::vector<double> y(full.rows(), 0.0);
        for (std::size_t r = 0; r < full.rows(); ++r) {
            double acc = 0.0;
            const auto row = full.row(r);
            for (std::size_t c = 0; c < full.cols(); ++c) {
                acc += row[c] * x[c];
            }
            y[r] = acc;
        }
        task.probe_x.push_back(std::move(x));
        task.probe_y.push_back(std::move(y));
    }
    return task;
}

std::string ExperimentReport::to_csv() const {
    std::string out;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i > 0) {
            out += ',';
        }
        out += columns[i];
    }
    out += '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i > 0) {
                out += ',';
            }
            out += format_double(row[i]);
        }
        out += '\n';
    }
    return out;
}

nlohmann::json ExperimentReport::sidecar() const {
    return {
        {"experiment", id},
        {"params", params},
        {"seed", seed},
        {"columns", columns},
        {"rows", rows.size()},
        {"version", kVersion},
    };
}

void ExperimentReport::write(const std::filesystem::path& dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }
    {
        std::ofstream csv(dir / (id + ".csv"), std::ios::trunc | std::ios::binary);
        if (!csv) {
            throw IoError("cannot write " + (dir / (id + ".csv")).string());
        }
        csv << to_csv();
    }
    std::ofstream meta(dir / (id + ".json"), std::ios::trunc | std::ios::binary);
    if (!meta) {
        throw IoError("cannot write " + (dir / (id + ".json")).string());
    }
    meta << sidecar().dump(2) << "\n";
}

LoraAdapter gen_synthetic_adapter(std::size_t d_in, std::size_t d_out, std::size_t rank,
                                  Rng& rng, AdapterInit init, std::size_t n_prototypes,
                                  double noise) {
    if (d_in < 1 || d_out < 1) {
        throw DomainError("gen_synthetic_adapter: dimensions must be >= 1");
    }
    if (rank < 1) {
        throw DomainError("gen_synthetic_adapter: rank must be >= 1");
    }
    LoraLayer layer;
    switch (init) {
        case AdapterInit::gaussian: {
            layer.a = gaussian_matrix(rank, d_in, rng);
            layer.b = gaussian_matrix(d_out, rank, rng);
            break;
        }
        case AdapterInit::structured: {
            if (n_prototypes < 1) {
                throw DomainError("gen_synthetic_adapter: need >= 1 prototype");
            }
            std::vector<std::vector<double>> prototypes;
            for (std::size_t p = 0; p < n_prototypes; ++p) {
                prototypes.push_back(rng.gaussian_vector(d_in + d_out));
            }
            std::vector<Msu> msus(rank);
            for (std::size_t i = 0; i < rank; ++i) {
                std::vector<double> s = prototypes[i % n_prototypes];
                for (double& v : s) {
                    v += noise * rng.gaussian();
                }
                msus[i].a.assign(s.begin(), s.begin() + static_cast<long>(d_in));
                msus[i].b.assign(s.begin() + static_cast<long>(d_in), s.end());
                msus[i].source = {"synthetic", kLayerPath, i};
            }
            layer = assemble_layer(msus);
            break;
        }
    }
    return single_layer_adapter("synthetic", std::move(layer));
}

FitResult fit_lora_to_target(const Matrix& target, std::size_t rank, double tol,
                             std::size_t max_iters) {
    if (rank < 1) {
        throw DomainError("fit_lora_to_target: rank must be >= 1");
    }
    if (rank > std::min(target.rows(), target.cols())) {
        throw DomainError("fit_lora_to_target: rank exceeds min(d_out, d_in)");
    }
    const double target_norm = frobenius_norm(target);

    Rng rng(derive_seed(0x4c534651u, target.rows() * 1315423911u + target.cols()));
    Matrix b = gaussian_matrix(target.rows(), rank, rng);
    Matrix a(rank, target.cols());

    // Ridge fallback only when a normal-equation matrix goes singular.
    const auto solve_regularized = [](const Matrix& gram, const Matrix& rhs) {
        try {
            return solve_linear(gram, rhs);
        } catch (const DomainError&) {
            Matrix damped = gram;
            double trace = 0.0;
            for (std::size_t i = 0; i < gram.rows(); ++i) {
                trace += gram(i, i);
            }
            const double ridge = 1e-12 * (1.0 + trace / static_cast<double>(gram.rows()));
            for (std::size_t i = 0; i < gram.rows(); ++i) {
                damped(i, i) += ridge;
            }
            return solve_linear(damped, rhs);
        }
    };

    FitResult best;
    best.relative_residual = std::numeric_limits<double>::infinity();
    double prev = std::numeric_limits<double>::infinity();
    std::size_t iter = 0;
    for (; iter < max_iters; ++iter) {
        const Matrix bt = transpose(b);
        a = solve_regularized(matmul(bt, b), matmul(bt, target));
        const Matrix at = transpose(a);
        b = transpose(solve_regularized(matmul(a, at), matmul(a, transpose(target))));

        const double residual = frobenius_norm(subtract(target, matmul(b, a)));
        const double rel = target_norm == 0.0 ? 0.0 : residual / target_norm;
        if (rel < best.relative_residual) {
            best.relative_residual = rel;
            best.layer = LoraLayer{a, b};
        }
        if (std::isfinite(prev) && prev - rel <= tol * std::max(prev, 1e-300)) {
            ++iter;
            best.converged = true;
            break;
        }
        prev = rel;
    }
    best.iterations = iter;
    return best;
}

std::vector<double> forward(const SyntheticTask& task, const LoraAdapter& adapter,
                            const std::vector<double>& x) {
    const LoraLayer& layer = sole_layer(adapter);
    if (x.size() != task.base.cols() || layer.d_in() != task.base.cols() ||
        layer.d_out() != task.base.rows()) {
        throw DimensionError("forward: shapes do not conform");
    }
    const Matrix xm(x.size(), 1, x);
    const Matrix base_part = matmul(task.base, xm);
    const Matrix delta_part = matmul(layer.b, matmul(layer.a, xm));
    const double scaling = adapter.scaling();
    std::vector<double> y(task.base.rows());
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = base_part(i, 0) + scaling * delta_part(i, 0);
    }
    return y;
}

ExperimentReport misalignment_experiment(const LoraAdapter& adapter, Rng& rng) {
    if (adapter.rank < 2) {
        throw DomainError("misalignment experiment needs rank >= 2");
    }
    LoraAdapter permuted = adapter;
    permuted.name = adapter.name + "-permuted";
    for (auto& [path, layer] : permuted.layers) {
        PermutationSpec p = PermutationSpec::random(adapter.rank, rng);
        while (p.is_identity()) {
            p = PermutationSpec::random(adapter.rank, rng);
        }
        layer = permute_layer(layer, p);
    }

    const LoraAdapter pair[] = {adapter, permuted};
    const LoraAdapter averaged = weight_average(pair);

    MergeOptions opts;
    opts.k_policy = KPolicy::explicit_value(adapter.rank);
    opts.seed = rng.next_u64();
    const auto [merged, merge_report] = lego_merge(pair, opts);

    ExperimentReport report;
    report.id = "misalignment";
    report.columns = {"layer_index", "e_avg", "e_lego"};
    std::size_t index = 0;
    for (const auto& [path, layer] : adapter.layers) {
        const Matrix reference = effective_delta(adapter, path);
        report.rows.push_back({static_cast<double>(index),
                               relative_error(effective_delta(averaged, path), reference),
                               relative_error(effective_delta(merged, path), reference)});
        ++index;
    }
    return report;
}

ExperimentReport misalignment_sweep(std::size_t d_in, std::size_t d_out, std::size_t rank,
                                    std::size_t trials, std::uint64_t seed) {
    ExperimentReport report;
    report.id = "misalignment";
    report.seed = seed;
    report.params = {{"d_in", d_in}, {"d_out", d_out}, {"r", rank}, {"trials", trials}};
    report.columns = {"trial", "e_avg", "e_lego"};
    for (std::size_t trial = 0; trial < trials; ++trial) {
        Rng rng(derive_seed(seed, trial));
        const LoraAdapter adapter = gen_synthetic_adapter(d_in, d_out, rank, rng);
        const ExperimentReport one = misalignment_experiment(adapter, rng);
        report.rows.push_back({static_cast<double>(trial), one.rows[0][1], one.rows[0][2]});
    }
    return report;
}

ExperimentReport variance_sweep(std::size_t p, std::size_t r,
                                const std::vector<std::size_t>& ks, std::size_t trials,
                                std::uint64_t seed) {
    if (trials * p * p < 100000) {
        throw DomainError("variance_sweep: need trials * p^2 >= 1e5 samples per k");
    }
    ExperimentReport report;
    report.id = "variance";
    report.seed = seed;
    report.params = {{"p", p}, {"r", r}, {"ks", ks}, {"trials", trials}};
    report.columns = {"k", "samples", "var_raw", "var_scaled", "var_raw_over_k",
                      "var_scaled_over_r"};

    for (const std::size_t k : ks) {
        if (k < 1) {
            throw DomainError("variance_sweep: k must be >= 1");
        }
        std::vector<double> trial_sum(trials, 0.0);
        std::vector<double> trial_sumsq(trials, 0.0);
        // Trials own derived seeds; partial sums are reduced in trial order
        // afterwards so the result is independent of the schedule.
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(trials); ++t) {
            Rng rng(derive_seed(derive_seed(seed, k), static_cast<std::uint64_t>(t)));
            const Matrix a = gaussian_matrix(p, k, rng);
            const Matrix b = gaussian_matrix(k, p, rng);
            const Matrix prod = matmul(a, b);
            double s = 0.0;
            double s2 = 0.0;
            for (const double v : prod.data()) {
                s += v;
                s2 += v * v;
            }
            trial_sum[t] = s;
            trial_sumsq[t] = s2;
        }
        double sum = 0.0;
        double sumsq = 0.0;
        for (std::size_t t = 0; t < trials; ++t) {
            sum += trial_sum[t];
            sumsq += trial_sumsq[t];
        }
        const double n = static_cast<double>(trials) * static_cast<double>(p * p);
        const double mean = sum / n;
        const double var_raw = sumsq / n - mean * mean;
        const double factor = output_reweight_factor(static_cast<double>(r), k);
        const double var_scaled = factor * factor * var_raw;
        report.rows.push_back({static_cast<double>(k), n, var_raw, var_scaled,
                               var_raw / static_cast<double>(k),
                               var_scaled / static_cast<double>(r)});
    }
    return report;
}

ExperimentReport norm_decay_report(std::span<const LoraAdapter> adapters, std::size_t k,
                                   std::uint64_t seed) {
    if (adapters.size() < 2) {
        throw DomainError("norm_decay_report: need at least two adapters");
    }
    MergeOptions opts;
    opts.k_policy = KPolicy::explicit_value(k);
    opts.seed = seed;
    const auto [merged, merge_report] = lego_merge(adapters, opts);

    ExperimentReport report;
    report.id = "norm-decay";
    report.seed = seed;
    report.params = {{"k", k}, {"adapters", adapters.size()}};
    report.columns = {"layer_index", "cluster",         "size",
                      "centroid_l2", "mean_member_l2",  "centroid_inf",
                      "mean_member_inf"};
    for (std::size_t li = 0; li < merge_report.layers.size(); ++li) {
        const LayerMergeRecord& rec = merge_report.layers[li];
        for (std::size_t c = 0; c < rec.clusters.size(); ++c) {
            const ClusterRecord& cluster = rec.clusters[c];
            if (cluster.centroid_l2_norm > cluster.mean_member_l2_norm + 1e-12) {
                throw std::logic_error(
                    "norm decay violated: centroid L2 norm exceeds the member mean in layer " +
                    rec.layer);
            }
            report.rows.push_back({static_cast<double>(li), static_cast<double>(c),
                                   static_cast<double>(cluster.size), cluster.centroid_l2_norm,
                                   cluster.mean_member_l2_norm, cluster.centroid_inf_norm,
                                   cluster.mean_member_inf_norm});
        }
    }
    return report;
}

ExperimentReport pruning_curve(const SyntheticTask& task, std::size_t rank,
                               const std::vector<double>& fractions, std::uint64_t seed) {
    for (const double f : fractions) {
        if (!(f > 0.0) || f > 1.0) {
            throw DomainError("pruning_curve: fractions must lie in (0, 1]");
        }
    }
    const FitResult fit = fit_lora_to_target(task.target_delta, rank);
    const LoraAdapter fitted = single_layer_adapter("fitted", fit.layer);

    const auto probe_error = [&](const LoraAdapter& adapter) {
        double total = 0.0;
        for (std::size_t i = 0; i < task.probe_x.size(); ++i) {
            const std::vector<double> y = forward(task, adapter, task.probe_x[i]);
            double diff = 0.0;
            double ref = 0.0;
            for (std::size_t j = 0; j < y.size(); ++j) {
                const double d = y[j] - task.probe_y[i][j];
                diff += d * d;
                ref += task.probe_y[i][j] * task.probe_y[i][j];
            }
            total += ref == 0.0 ? std::sqrt(diff) : std::sqrt(diff / ref);
        }
        return total / static_cast<double>(task.probe_x.size());
    };

    ExperimentReport report;
    report.id = "pruning-curve";
    report.seed = seed;
    report.params = {{"r", rank},
                     {"fractions", fractions},
                     {"fit_residual", fit.relative_residual},
                     {"probes", task.probe_x.size()}};
    report.columns = {"fraction", "k", "probe_rel_err"};
    for (const double f : fractions) {
        const std::size_t k = static_cast<std::size_t>(
            std::ceil(f * static_cast<double>(rank)));
        MergeOptions opts;
        opts.seed = derive_seed(seed, k);
        const auto [pruned, prune_report] = prune_lora(fitted, k, opts);
        report.rows.push_back({f, static_cast<double>(k), probe_error(pruned)});
    }
    return report;
}

ExperimentReport conflict_experiment(std::size_t d_in, std::size_t d_out, std::size_t rank,
                                     std::size_t trials, std::uint64_t seed) {
    if (rank < 2) {
        throw DomainError("conflict_experiment: rank must be >= 2");
    }
    ExperimentReport report;
    report.id = "conflict";
    report.seed = seed;
    report.params = {{"d_in", d_in},
                     {"d_out", d_out},
                     {"r", rank},
                     {"trials", trials},
                     {"k", rank + 1},
                     {"output_reweight", false},
                     {"references",
                      "e_avg and e_lego vs the union of distinct MSUs; "
                      "e_concat vs the summed per-adapter deltas"}};
    report.columns = {"trial", "e_avg", "e_concat", "e_lego"};

    for (std::size_t trial = 0; trial < trials; ++trial) {
        Rng rng(derive_seed(seed, trial));
        std::vector<Msu> shared(rank - 1);
        for (std::size_t i = 0; i < rank - 1; ++i) {
            shared[i].a = rng.gaussian_vector(d_in);
            shared[i].b = rng.gaussian_vector(d_out);
            shared[i].source = {"shared", kLayerPath, i};
        }
        const auto task_adapter = [&](const std::string& name) {
            std::vector<Msu> msus = shared;
            Msu unique;
            unique.a = rng.gaussian_vector(d_in);
            unique.b = rng.gaussian_vector(d_out);
            unique.source = {name, kLayerPath, rank - 1};
            msus.push_back(unique);
            return std::pair{single_layer_adapter(name, assemble_layer(msus)), unique};
        };
        const auto [adapter1, unique1] = task_adapter("task1");
        const auto [adapter2, unique2] = task_adapter("task2");

        // Ideal union: every distinct MSU contributes once.
        std::vector<Msu> union_msus = shared;
        union_msus.push_back(unique1);
        union_msus.push_back(unique2);
        const Matrix reference = delta_weight(assemble_layer(union_msus));

        const LoraAdapter pair[] = {adapter1, adapter2};
        const LoraAdapter averaged = weight_average(pair);

        // Concatenating all 2r units keeps both adapters verbatim; its
        // natural reference is the sum of the two deltas.
        const LoraLayer layers[] = {adapter1.layers.at(kLayerPath),
                                    adapter2.layers.at(kLayerPath)};
        const double unit_weights[] = {1.0, 1.0};
        const Matrix concat_delta = delta_weight(concat_layers(layers, unit_weights));
        const Matrix sum_reference = add(delta_weight(layers[0]), delta_weight(layers[1]));

        MergeOptions opts;
        opts.k_policy = KPolicy::explicit_value(rank + 1);
        opts.output_reweight = false;  // keep the check exact
        opts.seed = derive_seed(seed, trial * 2 + 1);
        const auto [merged, merge_report] = lego_merge(pair, opts);

        report.rows.push_back(
            {static_cast<double>(trial),
             relative_error(effective_delta(averaged, kLayerPath), reference),
             relative_error(concat_delta, sum_reference),
             relative_error(effective_delta(merged, kLayerPath), reference)});
    }
    return report;
}

}  // namespace loralego
