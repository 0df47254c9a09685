// SPDX-License-Identifier: Apache-2.0
//
// loralego: merge, prune and inspect LoRA adapters by clustering their
// rank-wise units. Exit codes: 0 success, 1 verification failure, 2
// usage or validation error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "loralego/adapter.hpp"
#include "loralego/errors.hpp"
#include "loralego/harness.hpp"
#include "loralego/kmeans.hpp"
#include "loralego/merge.hpp"
#include "loralego/msu.hpp"
#include "loralego/version.hpp"

namespace fs = std::filesystem;
using namespace loralego;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitUsage = 2;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::vector<LoraAdapter> load_adapters(const std::vector<std::string>& dirs,
                                       bool ignore_extra) {
    if (dirs.empty()) {
        throw DomainError("no adapter directories given");
    }
    std::vector<LoraAdapter> adapters;
    for (const auto& dir : dirs) {
        adapters.push_back(load_adapter(dir, ignore_extra));
    }
    return adapters;
}

Dtype parse_dtype(const std::string& name) {
    if (name == "f32") return Dtype::f32;
    if (name == "f16") return Dtype::f16;
    throw DomainError("dtype must be f32 or f16, got \"" + name + "\"");
}

// ---------------------------------------------------------------------------
// merge

struct MergeArgs {
    std::vector<std::string> adapters;
    std::string out;
    std::string method = "lego";
    std::string k_spec = "2r";
    bool no_param_reweight = false;
    bool no_output_reweight = false;
    bool union_layers = false;
    bool ignore_extra = false;
    std::uint64_t seed = 0;
    std::string dtype = "f32";
    std::string report_path;
    double ta_coef = 0.0;
    bool ta_coef_set = false;
    double ties_density = 0.5;
    double ties_scale = 1.0;
};

int cmd_merge(const MergeArgs& args) {
    const std::vector<LoraAdapter> adapters = load_adapters(args.adapters, args.ignore_extra);

    LoraAdapter merged;
    bool have_report = false;
    MergeReport report;
    if (args.method == "lego") {
        MergeOptions opts;
        opts.k_policy = KPolicy::parse(args.k_spec);
        opts.param_reweight = !args.no_param_reweight;
        opts.output_reweight = !args.no_output_reweight;
        opts.union_layers = args.union_layers;
        opts.seed = args.seed;
        auto result = lego_merge(adapters, opts);
        merged = std::move(result.first);
        report = std::move(result.second);
        have_report = true;
    } else if (args.method == "average") {
        merged = weight_average(adapters);
    } else if (args.method == "task-arithmetic") {
        const double coef =
            args.ta_coef_set ? args.ta_coef : 1.0 / static_cast<double>(adapters.size());
        merged = task_arithmetic(adapters, coef);
    } else if (args.method == "ties") {
        merged = ties_merge(adapters, args.ties_density, args.ties_scale);
    } else if (args.method == "ensemble") {
        merged = ensemble_merge(adapters);
    } else {
        throw DomainError("unknown method \"" + args.method +
                          "\" (expected lego, average, task-arithmetic, ties or ensemble)");
    }

    save_adapter(merged, args.out, parse_dtype(args.dtype));
    std::cout << "wrote " << args.method << " merge of " << adapters.size()
              << " adapter(s), rank " << merged.rank << ", to " << args.out << "\n";
    if (have_report) {
        const fs::path report_path = args.report_path.empty()
                                         ? fs::path(args.out) / "merge_report.json"
                                         : fs::path(args.report_path);
        report.write(report_path);
        std::cout << "report: " << report_path.string() << "\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// prune

struct PruneArgs {
    std::string adapter;
    std::string out;
    std::int64_t keep_rank = 0;
    double keep_frac = 0.0;
    bool ignore_extra = false;
    std::uint64_t seed = 0;
    std::string dtype = "f32";
    std::string report_path;
};

int cmd_prune(const PruneArgs& args) {
    const LoraAdapter adapter = load_adapter(args.adapter, args.ignore_extra);
    std::size_t k;
    if (args.keep_rank > 0) {
        k = static_cast<std::size_t>(args.keep_rank);
    } else if (args.keep_frac > 0.0) {
        if (args.keep_frac > 1.0) {
            throw DomainError("--keep-frac must lie in (0, 1]");
        }
        k = static_cast<std::size_t>(
            std::ceil(args.keep_frac * static_cast<double>(adapter.rank)));
    } else {
        throw DomainError("pass --keep-rank or --keep-frac");
    }

    MergeOptions opts;
    opts.seed = args.seed;
    const auto [pruned, report] = prune_lora(adapter, k, opts);
    save_adapter(pruned, args.out, parse_dtype(args.dtype));
    const fs::path report_path = args.report_path.empty()
                                     ? fs::path(args.out) / "prune_report.json"
                                     : fs::path(args.report_path);
    report.write(report_path);
    std::cout << "pruned " << adapter.name << " from rank " << adapter.rank << " to rank "
              << k << ", wrote " << args.out << "\n";
    std::cout << "report: " << report_path.string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// inspect

int cmd_inspect(const std::string& dir, bool as_json, bool ignore_extra) {
    const LoraAdapter adapter = load_adapter(dir, ignore_extra);
    nlohmann::json out = {
        {"name", adapter.name},
        {"rank", adapter.rank},
        {"alpha", adapter.alpha},
        {"scaling", adapter.scaling()},
        {"layers", nlohmann::json::array()},
    };
    for (const auto& [path, layer] : adapter.layers) {
        const auto msus = extract_msus(layer, {adapter.name, path, 0});
        nlohmann::json norms = nlohmann::json::array();
        for (const auto& msu : msus) {
            norms.push_back(inf_norm(msu.combined()));
        }
        out["layers"].push_back({
            {"path", path},
            {"d_in", layer.d_in()},
            {"d_out", layer.d_out()},
            {"msu_inf_norms", norms},
            {"delta_frobenius", frobenius_norm(effective_delta(adapter, path))},
        });
    }

    if (as_json) {
        std::cout << out.dump(2) << "\n";
        return kExitOk;
    }
    std::cout << "adapter: " << adapter.name << "\n";
    std::cout << "rank: " << adapter.rank << "  alpha: " << adapter.alpha
              << "  scaling: " << fmt(adapter.scaling()) << "  layers: "
              << adapter.layers.size() << "\n";
    for (const auto& layer : out["layers"]) {
        std::cout << "layer " << layer["path"].get<std::string>()
                  << ": d_in=" << layer["d_in"] << " d_out=" << layer["d_out"]
                  << " |delta|_F=" << fmt(layer["delta_frobenius"].get<double>()) << "\n";
        std::size_t i = 0;
        for (const auto& norm : layer["msu_inf_norms"]) {
            std::cout << "  msu " << i++ << ": inf_norm=" << fmt(norm.get<double>()) << "\n";
        }
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// verify

struct SuiteOutcome {
    bool passed = true;
    std::string detail;
};

int cmd_verify(std::uint64_t seed, const std::string& adapter_dir) {
    std::vector<std::pair<std::string, SuiteOutcome>> outcomes;

    const auto random_layer = [](std::size_t rank, std::size_t d_in, std::size_t d_out,
                                 Rng& rng) {
        LoraLayer layer{Matrix(rank, d_in), Matrix(d_out, rank)};
        for (auto& v : layer.a.data()) {
            v = rng.gaussian();
        }
        for (auto& v : layer.b.data()) {
            v = rng.gaussian();
        }
        return layer;
    };

    {  // Permuting units never changes the delta.
        SuiteOutcome outcome;
        Rng rng(derive_seed(seed, "permutation"));
        for (int trial = 0; trial < 1000; ++trial) {
            const std::size_t rank = 2 + rng.uniform_below(15);
            const LoraLayer layer = random_layer(rank, 1 + rng.uniform_below(24),
                                                 1 + rng.uniform_below(24), rng);
            const PermutationSpec p = PermutationSpec::random(rank, rng);
            const double diff =
                max_abs_diff(delta_weight(permute_layer(layer, p)), delta_weight(layer));
            if (diff >= 1e-12) {
                outcome = {false, "trial " + std::to_string(trial) + " diff " + fmt(diff)};
                break;
            }
            const Matrix pm = p.to_matrix();
            if (max_abs_diff(matmul(transpose(pm), pm), Matrix::identity(rank)) != 0.0) {
                outcome = {false, "PtP != I at trial " + std::to_string(trial)};
                break;
            }
        }
        if (outcome.passed) {
            outcome.detail = "1000 random (layer, permutation) pairs, max |dW' - dW| < 1e-12";
        }
        outcomes.emplace_back("permutation-invariance", outcome);
    }

    {  // Concatenation equals output summation.
        SuiteOutcome outcome;
        Rng rng(derive_seed(seed, "concat"));
        for (int trial = 0; trial < 500; ++trial) {
            const std::size_t n = 2 + rng.uniform_below(4);
            std::vector<LoraLayer> layers;
            std::vector<double> weights(n, 1.0 / static_cast<double>(n));
            Matrix expected(6, 8);
            for (std::size_t i = 0; i < n; ++i) {
                layers.push_back(random_layer(1 + rng.uniform_below(6), 8, 6, rng));
                expected = add(expected, delta_weight(layers.back(), weights[i]));
            }
            const double diff = max_abs_diff(delta_weight(concat_layers(layers, weights)),
                                             expected);
            if (diff >= 1e-12) {
                outcome = {false, "trial " + std::to_string(trial) + " diff " + fmt(diff)};
                break;
            }
        }
        if (outcome.passed) {
            outcome.detail = "500 random pools of 2-5 layers, max diff < 1e-12";
        }
        outcomes.emplace_back("concatenation-summation", outcome);
    }

    {  // Self-merge identity via clustering at k = r.
        SuiteOutcome outcome;
        Rng rng(derive_seed(seed, "selfmerge"));
        for (int trial = 0; trial < 100; ++trial) {
            Rng trial_rng(derive_seed(seed, 1000 + static_cast<std::uint64_t>(trial)));
            const LoraAdapter phi = gen_synthetic_adapter(64, 64, 8, trial_rng);
            MergeOptions opts;
            opts.k_policy = KPolicy::explicit_value(8);
            opts.seed = trial_rng.next_u64();
            const auto [merged, report] = lego_merge(std::vector<LoraAdapter>{phi}, opts);
            const Matrix reference = effective_delta(phi, "layer.0");
            const double diff =
                max_abs_diff(effective_delta(merged, "layer.0"), reference);
            if (diff >= 1e-9) {
                outcome = {false, "trial " + std::to_string(trial) + " diff " + fmt(diff)};
                break;
            }
        }
        if (outcome.passed) {
            outcome.detail = "100 adapters (d=64, r=8), merge and prune at k=r, diff < 1e-9";
        }
        outcomes.emplace_back("self-merge-identity", outcome);
    }

    {  // Misalignment: averaging interferes, clustering does not.
        SuiteOutcome outcome;
        const ExperimentReport report =
            misalignment_sweep(32, 32, 8, 100, derive_seed(seed, "misalignment"));
        std::size_t avg_hurts = 0;
        for (const auto& row : report.rows) {
            if (row[1] > 0.05) {
                ++avg_hurts;
            }
            if (row[2] >= 1e-9) {
                outcome = {false, "seed index " + fmt(row[0]) + ": e_lego " + fmt(row[2])};
                break;
            }
        }
        if (outcome.passed && avg_hurts < 95) {
            outcome = {false,
                       "only " + std::to_string(avg_hurts) + "/100 seeds show e_avg > 0.05"};
        }
        if (outcome.passed) {
            outcome.detail = "100 seeds: e_lego < 1e-9 in 100, e_avg > 0.05 in " +
                             std::to_string(avg_hurts);
        }
        outcomes.emplace_back("misalignment-fix", outcome);
    }

    {  // Gaussian product variance scales from k back to r.
        SuiteOutcome outcome;
        const ExperimentReport report =
            variance_sweep(64, 8, {8, 16, 32}, 25, derive_seed(seed, "variance"));
        for (const auto& row : report.rows) {
            const double k = row[0];
            if (row[2] < 0.9 * k || row[2] > 1.1 * k || row[3] < 0.9 * 8.0 ||
                row[3] > 1.1 * 8.0) {
                outcome = {false, "k=" + fmt(k) + " raw " + fmt(row[2]) + " scaled " +
                                      fmt(row[3])};
                break;
            }
        }
        if (outcome.passed) {
            outcome.detail = "k in {8,16,32}: raw variance within 10% of k, scaled within "
                             "10% of r=8";
        }
        outcomes.emplace_back("variance-reweighting", outcome);
    }

    {  // Norm decay and the parameter reweight contract.
        SuiteOutcome outcome;
        std::size_t clusters_checked = 0;
        for (int trial = 0; trial < 20 && outcome.passed; ++trial) {
            Rng rng(derive_seed(seed, 2000 + static_cast<std::uint64_t>(trial)));
            std::vector<LoraAdapter> adapters;
            for (int i = 0; i < 3; ++i) {
                adapters.push_back(gen_synthetic_adapter(16, 16, 6, rng));
                adapters.back().name += std::to_string(i);
            }
            try {
                const ExperimentReport report =
                    norm_decay_report(adapters, 6, rng.next_u64());
                clusters_checked += report.rows.size();
            } catch (const std::logic_error& e) {
                outcome = {false, e.what()};
            }
        }
        if (outcome.passed) {
            outcome.detail = std::to_string(clusters_checked) +
                             " clusters satisfy the L2 triangle-inequality bound";
        }
        outcomes.emplace_back("norm-decay", outcome);
    }

    if (!adapter_dir.empty()) {  // adapter-specific checks
        SuiteOutcome outcome;
        const LoraAdapter adapter = load_adapter(adapter_dir);
        Rng rng(derive_seed(seed, "adapter"));
        for (const auto& [path, layer] : adapter.layers) {
            const LoraLayer back = assemble_layer(extract_msus(layer, {adapter.name, path, 0}));
            if (back.a.data() != layer.a.data() || back.b.data() != layer.b.data()) {
                outcome = {false, "extract/assemble not lossless on " + path};
                break;
            }
            if (adapter.rank >= 2) {
                const PermutationSpec p = PermutationSpec::random(adapter.rank, rng);
                const double diff =
                    max_abs_diff(delta_weight(permute_layer(layer, p)), delta_weight(layer));
                if (diff >= 1e-12) {
                    outcome = {false, "permutation changes delta on " + path};
                    break;
                }
            }
        }
        if (outcome.passed) {
            outcome.detail = "adapter " + adapter.name + ": " +
                             std::to_string(adapter.layers.size()) +
                             " layers, lossless decomposition and permutation invariance";
        }
        outcomes.emplace_back("adapter-checks", outcome);
    }

    bool all_passed = true;
    for (const auto& [name, outcome] : outcomes) {
        std::cout << (outcome.passed ? "PASS " : "FAIL ") << name;
        if (!outcome.detail.empty()) {
            std::cout << ": " << outcome.detail;
        }
        if (!outcome.passed) {
            std::cout << " (seed " << seed << ")";
        }
        std::cout << "\n";
        all_passed = all_passed && outcome.passed;
    }
    return all_passed ? kExitOk : kExitVerifyFailed;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
    std::string experiment;
    std::string out = "reports";
    std::uint64_t seed = 0;
    std::size_t p = 64;
    std::size_t r = 8;
    std::vector<std::size_t> ks;
    std::size_t trials = 0;
    std::size_t d = 32;
    std::size_t k = 0;
    std::size_t n_adapters = 3;
    std::size_t probes = 16;
    bool structured = false;
    std::vector<double> fractions;
    std::vector<std::string> adapters;  // real files instead of synthetic inputs
};

int cmd_bench(const BenchArgs& args) {
    static const std::vector<std::string> kIds = {"misalignment", "variance", "norm-decay",
                                                  "pruning-curve", "conflict"};
    ExperimentReport report;
    if (args.experiment == "misalignment") {
        if (!args.adapters.empty()) {
            if (args.adapters.size() != 1) {
                throw DomainError("misalignment takes exactly one --adapters entry");
            }
            const LoraAdapter adapter = load_adapter(args.adapters.front());
            Rng rng(args.seed);
            report = misalignment_experiment(adapter, rng);
            report.params = {{"adapter", adapter.name}, {"r", adapter.rank}};
        } else {
            report = misalignment_sweep(args.d, args.d, args.r,
                                        args.trials ? args.trials : 100, args.seed);
        }
    } else if (args.experiment == "variance") {
        const std::vector<std::size_t> ks =
            args.ks.empty() ? std::vector<std::size_t>{args.r, 2 * args.r, 4 * args.r}
                            : args.ks;
        report = variance_sweep(args.p, args.r, ks, args.trials ? args.trials : 30,
                                args.seed);
    } else if (args.experiment == "norm-decay") {
        std::vector<LoraAdapter> adapters;
        std::size_t mean_rank = args.r;
        if (!args.adapters.empty()) {
            adapters = load_adapters(args.adapters, false);
            std::size_t rank_sum = 0;
            for (const auto& adapter : adapters) {
                rank_sum += adapter.rank;
            }
            mean_rank = rank_sum / adapters.size();
        } else {
            Rng rng(derive_seed(args.seed, "norm-decay-adapters"));
            for (std::size_t i = 0; i < args.n_adapters; ++i) {
                adapters.push_back(gen_synthetic_adapter(args.d, args.d, args.r, rng));
                adapters.back().name += std::to_string(i);
            }
        }
        report = norm_decay_report(adapters, args.k ? args.k : 2 * mean_rank, args.seed);
    } else if (args.experiment == "pruning-curve") {
        Rng rng(derive_seed(args.seed, "pruning-task"));
        const LoraAdapter source =
            args.structured
                ? gen_synthetic_adapter(args.d, args.d, args.r, rng,
                                        AdapterInit::structured, std::max<std::size_t>(
                                            1, args.r / 2), 1e-3)
                : gen_synthetic_adapter(args.d, args.d, args.r, rng);
        Matrix base(args.d, args.d);
        for (auto& v : base.data()) {
            v = rng.gaussian();
        }
        const SyntheticTask task =
            make_task(std::move(base), effective_delta(source, "layer.0"), args.probes, rng);
        const std::vector<double> fractions =
            args.fractions.empty()
                ? std::vector<double>{0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0}
                : args.fractions;
        report = pruning_curve(task, args.r, fractions, args.seed);
    } else if (args.experiment == "conflict") {
        report = conflict_experiment(args.d, args.d, args.r,
                                     args.trials ? args.trials : 50, args.seed);
    } else {
        std::cerr << "unknown experiment \"" << args.experiment << "\"; valid ids:";
        for (const auto& id : kIds) {
            std::cerr << " " << id;
        }
        std::cerr << "\n";
        return kExitUsage;
    }
    report.seed = args.seed;
    report.write(args.out);
    std::cout << "wrote " << (fs::path(args.out) / (report.id + ".csv")).string() << " ("
              << report.rows.size() << " rows) and sidecar JSON\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Merge, prune and inspect LoRA adapters via rank-wise unit clustering"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);
    app.fallthrough();  // lets --threads appear after the subcommand too

    int threads = 0;
    app.add_option("--threads", threads, "worker thread count (0 = library default)");

    MergeArgs merge_args;
    CLI::App* merge = app.add_subcommand("merge", "merge adapters into one");
    merge->add_option("--adapters", merge_args.adapters, "adapter directories")
        ->required()
        ->delimiter(',');
    merge->add_option("--out", merge_args.out, "output adapter directory")->required();
    merge->add_option("--method", merge_args.method,
                      "lego | average | task-arithmetic | ties | ensemble");
    merge->add_option("--k", merge_args.k_spec, "target rank: integer or multiple like 2r");
    merge->add_flag("--no-param-reweight", merge_args.no_param_reweight,
                    "skip centroid norm matching");
    merge->add_flag("--no-output-reweight", merge_args.no_output_reweight,
                    "skip the sqrt(r/k) output factor");
    merge->add_flag("--union", merge_args.union_layers,
                    "merge layers missing from some adapters");
    merge->add_flag("--ignore-extra", merge_args.ignore_extra,
                    "skip tensors that are not lora_A/lora_B pairs");
    merge->add_option("--seed", merge_args.seed, "clustering seed")
        ->envname("LORALEGO_SEED");
    merge->add_option("--dtype", merge_args.dtype, "output dtype: f32 | f16");
    merge->add_option("--report", merge_args.report_path, "merge report path (lego only)");
    merge->add_option("--ta-coef", merge_args.ta_coef,
                      "task-arithmetic coefficient (default 1/n)")
        ->each([&merge_args](const std::string&) { merge_args.ta_coef_set = true; });
    merge->add_option("--ties-density", merge_args.ties_density,
                      "fraction of entries kept by ties trimming");
    merge->add_option("--ties-scale", merge_args.ties_scale, "ties merge scale");

    PruneArgs prune_args;
    CLI::App* prune = app.add_subcommand("prune", "reduce a single adapter's rank");
    prune->add_option("--adapter", prune_args.adapter, "adapter directory")->required();
    prune->add_option("--out", prune_args.out, "output adapter directory")->required();
    prune->add_option("--keep-rank", prune_args.keep_rank, "target rank k");
    prune->add_option("--keep-frac", prune_args.keep_frac, "keep fraction of the rank");
    prune->add_flag("--ignore-extra", prune_args.ignore_extra,
                    "skip tensors that are not lora_A/lora_B pairs");
    prune->add_option("--seed", prune_args.seed, "clustering seed")
        ->envname("LORALEGO_SEED");
    prune->add_option("--dtype", prune_args.dtype, "output dtype: f32 | f16");
    prune->add_option("--report", prune_args.report_path, "prune report path");

    std::string inspect_dir;
    bool inspect_json = false;
    bool inspect_ignore_extra = false;
    CLI::App* inspect = app.add_subcommand("inspect", "print adapter structure and norms");
    inspect->add_option("--adapter", inspect_dir, "adapter directory")->required();
    inspect->add_flag("--json", inspect_json, "machine-readable output");
    inspect->add_flag("--ignore-extra", inspect_ignore_extra,
                      "skip tensors that are not lora_A/lora_B pairs");

    std::uint64_t verify_seed = 0;
    std::string verify_adapter;
    CLI::App* verify = app.add_subcommand("verify", "run the invariant suites");
    verify->add_option("--seed", verify_seed, "base seed")->envname("LORALEGO_SEED");
    verify->add_option("--adapter", verify_adapter, "also check this adapter");

    BenchArgs bench_args;
    CLI::App* bench = app.add_subcommand("bench", "run an experiment and write CSV + JSON");
    bench->add_option("experiment", bench_args.experiment,
                      "misalignment | variance | norm-decay | pruning-curve | conflict")
        ->required();
    bench->add_option("--out", bench_args.out, "output directory");
    bench->add_option("--seed", bench_args.seed, "base seed")->envname("LORALEGO_SEED");
    bench->add_option("--p", bench_args.p, "matrix dimension for variance");
    bench->add_option("--r", bench_args.r, "adapter rank");
    bench->add_option("--ks", bench_args.ks, "ranks to sweep")->delimiter(',');
    bench->add_option("--trials", bench_args.trials, "trial count");
    bench->add_option("--d", bench_args.d, "layer dimension");
    bench->add_option("--k", bench_args.k, "cluster count for norm-decay");
    bench->add_option("--n-adapters", bench_args.n_adapters, "adapters for norm-decay");
    bench->add_option("--probes", bench_args.probes, "probe count for pruning-curve");
    bench->add_flag("--structured", bench_args.structured,
                    "duplicated-prototype target for pruning-curve");
    bench->add_option("--fractions", bench_args.fractions, "keep fractions")->delimiter(',');
    bench->add_option("--adapters", bench_args.adapters,
                      "adapter directories to use instead of synthetic inputs "
                      "(misalignment, norm-decay)")
        ->delimiter(',');

    CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
    if (threads > 0) {
        omp_set_num_threads(threads);
    }
#endif

    try {
        if (*merge) {
            return cmd_merge(merge_args);
        }
        if (*prune) {
            return cmd_prune(prune_args);
        }
        if (*inspect) {
            return cmd_inspect(inspect_dir, inspect_json, inspect_ignore_extra);
        }
        if (*verify) {
            return cmd_verify(verify_seed, verify_adapter);
        }
        if (*bench) {
            return cmd_bench(bench_args);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitVerifyFailed;
    }
    return kExitUsage;
}
