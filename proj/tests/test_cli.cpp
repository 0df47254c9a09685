// SPDX-License-Identifier: Apache-2.0
//
// Drives the command-line binary as a subprocess and checks the exit-code
// contract: 0 success, 1 verification failure, 2 usage/validation error.
// Usage: test_cli <path-to-loralego-binary>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "loralego/adapter.hpp"
#include "loralego/harness.hpp"
#include "loralego/msu.hpp"
#include "loralego/rng.hpp"

using namespace loralego;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void check(bool ok, const std::string& what) {
    std::cout << (ok ? "ok   " : "FAIL ") << what << "\n";
    if (!ok) {
        ++g_failures;
    }
}

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Harness {
    std::string binary;
    fs::path work;

    explicit Harness(std::string bin) : binary(std::move(bin)) {
        work = fs::temp_directory_path() /
               ("loralego_cli_" + std::to_string(::getpid()));
        fs::remove_all(work);
        fs::create_directories(work);
    }
    ~Harness() {
        std::error_code ec;
        fs::remove_all(work, ec);
    }

    RunResult run(const std::string& args) const {
        const fs::path out_file = work / "stdout.txt";
        const fs::path err_file = work / "stderr.txt";
        const std::string cmd = binary + " " + args + " >" + out_file.string() + " 2>" +
                                err_file.string();
        const int raw = std::system(cmd.c_str());
        RunResult result;
        result.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
        result.out = read_file(out_file);
        result.err = read_file(err_file);
        return result;
    }
};

LoraAdapter synthetic(std::size_t rank, std::size_t d, std::uint64_t seed, double alpha) {
    Rng rng(seed);
    LoraAdapter adapter = gen_synthetic_adapter(d, d, rank, rng);
    adapter.alpha = alpha;
    return adapter;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: test_cli <loralego binary>\n";
        return 2;
    }
    Harness h(argv[1]);

    // Fixtures: two rank-6 adapters, one rank-16, a rank-8, and a zero adapter.
    const fs::path a6 = h.work / "a6";
    const fs::path b6 = h.work / "b6";
    const fs::path c16 = h.work / "c16";
    const fs::path d8 = h.work / "d8";
    const fs::path zero = h.work / "zero";
    save_adapter(synthetic(6, 16, 1, 12.0), a6);
    save_adapter(synthetic(6, 16, 2, 12.0), b6);
    save_adapter(synthetic(16, 16, 3, 32.0), c16);
    save_adapter(synthetic(8, 16, 4, 16.0), d8);
    {
        LoraAdapter z;
        z.name = "zero";
        z.rank = 2;
        z.alpha = 2.0;
        z.layers.emplace("layer.0", LoraLayer{Matrix(2, 16), Matrix(16, 2)});
        save_adapter(z, zero);
    }

    {  // lego merge with the default-style 2r policy
        const auto r = h.run("merge --method lego --k 2r --adapters " + a6.string() + "," +
                             b6.string() + " --out " + (h.work / "m").string() +
                             " --seed 5");
        check(r.code == 0, "lego merge exits 0");
        const LoraAdapter merged = load_adapter(h.work / "m");
        check(merged.rank == 12, "k=2r on two rank-6 adapters gives rank 12");
        check(fs::exists(h.work / "m" / "merge_report.json"),
              "lego merge writes its report");
    }

    {  // averaging heterogeneous ranks must fail loudly
        const auto r = h.run("merge --method average --adapters " + a6.string() + "," +
                             c16.string() + " --out " + (h.work / "avg").string());
        check(r.code == 2, "average of rank 6 and rank 16 exits 2");
        check(r.err.find("6") != std::string::npos && r.err.find("16") != std::string::npos,
              "error message names the mismatched ranks");
    }

    {  // disabling the output factor changes the result
        h.run("merge --method lego --k 8 --adapters " + a6.string() + "," + b6.string() +
              " --out " + (h.work / "m_default").string() + " --seed 5");
        h.run("merge --method lego --k 8 --no-output-reweight --adapters " + a6.string() +
              "," + b6.string() + " --out " + (h.work / "m_noout").string() + " --seed 5");
        const LoraAdapter with = load_adapter(h.work / "m_default");
        const LoraAdapter without = load_adapter(h.work / "m_noout");
        const double diff = max_abs_diff(effective_delta(with, "layer.0"),
                                         effective_delta(without, "layer.0"));
        check(diff > 1e-9, "--no-output-reweight produces a different adapter");
    }

    {  // every other method runs
        for (const std::string method : {"task-arithmetic", "ties", "ensemble"}) {
            const auto r = h.run("merge --method " + method + " --adapters " + a6.string() +
                                 "," + b6.string() + " --out " +
                                 (h.work / ("m_" + method)).string());
            check(r.code == 0, method + " merge exits 0");
        }
        const LoraAdapter ens = load_adapter(h.work / "m_ensemble");
        check(ens.rank == 12, "ensemble of two rank-6 adapters has rank 12");
    }

    {  // prune
        auto r = h.run("prune --adapter " + d8.string() + " --keep-frac 0.5 --out " +
                       (h.work / "p4").string());
        check(r.code == 0, "prune --keep-frac 0.5 exits 0");
        check(load_adapter(h.work / "p4").rank == 4, "keep-frac 0.5 of rank 8 gives rank 4");

        r = h.run("prune --adapter " + d8.string() + " --keep-rank 8 --out " +
                  (h.work / "p8").string());
        check(r.code == 0, "prune --keep-rank 8 exits 0");
        const LoraAdapter original = load_adapter(d8);
        const LoraAdapter pruned = load_adapter(h.work / "p8");
        const Matrix ref = effective_delta(original, "layer.0");
        const double rel = frobenius_norm(subtract(effective_delta(pruned, "layer.0"), ref)) /
                           frobenius_norm(ref);
        check(rel < 1e-6, "prune at k=r preserves the delta (f32 rounding)");

        r = h.run("prune --adapter " + d8.string() + " --keep-rank 9 --out " +
                  (h.work / "p9").string());
        check(r.code == 2, "prune --keep-rank 9 on rank 8 exits 2");
    }

    {  // inspect
        auto r = h.run("inspect --adapter " + a6.string());
        check(r.code == 0, "inspect exits 0");
        std::size_t norm_rows = 0;
        std::istringstream lines(r.out);
        for (std::string line; std::getline(lines, line);) {
            if (line.find("inf_norm=") != std::string::npos) {
                ++norm_rows;
            }
        }
        check(norm_rows == 6, "rank-6 adapter shows 6 norm rows per layer");

        r = h.run("inspect --adapter " + a6.string() + " --json");
        check(r.code == 0, "inspect --json exits 0");
        const nlohmann::json parsed = nlohmann::json::parse(r.out, nullptr, false);
        check(!parsed.is_discarded(), "inspect --json emits valid JSON");
        check(parsed["rank"] == 6 && parsed["layers"].size() == 1,
              "inspect --json carries rank and layers");
        check(nlohmann::json::parse(parsed.dump()) == parsed, "inspect JSON round-trips");

        r = h.run("inspect --adapter " + zero.string() + " --json");
        const nlohmann::json z = nlohmann::json::parse(r.out);
        bool all_zero = z["layers"][0]["delta_frobenius"] == 0.0;
        for (const auto& n : z["layers"][0]["msu_inf_norms"]) {
            all_zero = all_zero && n == 0.0;
        }
        check(all_zero, "zero adapter inspects with all norms 0");

        r = h.run("inspect --adapter " + (h.work / "missing").string());
        check(r.code == 2, "inspect on a missing adapter exits 2");
    }

    {  // verify: reproducible transcript, exit 0
        const auto r1 = h.run("verify --seed 7");
        const auto r2 = h.run("verify --seed 7");
        check(r1.code == 0, "verify exits 0");
        check(r1.out == r2.out, "verify --seed 7 twice yields an identical transcript");
        check(r1.out.find("PASS permutation-invariance") != std::string::npos,
              "verify prints per-suite lines");

        const auto r3 = h.run("verify --seed 7 --adapter " + a6.string());
        check(r3.code == 0 && r3.out.find("adapter-checks") != std::string::npos,
              "verify --adapter adds the adapter suite");
    }

    {  // bench
        auto r = h.run("bench variance --p 64 --r 8 --ks 8,16,32 --out " +
                       (h.work / "rep").string());
        check(r.code == 0, "bench variance exits 0");
        const std::string csv = read_file(h.work / "rep" / "variance.csv");
        check(std::count(csv.begin(), csv.end(), '\n') == 4,
              "variance CSV has a header plus 3 rows");
        check(csv.find("var_raw") != std::string::npos &&
                  csv.find("var_scaled") != std::string::npos,
              "variance CSV carries raw and scaled columns");
        check(fs::exists(h.work / "rep" / "variance.json"), "variance sidecar exists");

        r = h.run("bench misalignment --trials 10 --d 16 --r 4 --out " +
                  (h.work / "rep").string());
        check(r.code == 0, "bench misalignment exits 0");
        const std::string mis = read_file(h.work / "rep" / "misalignment.csv");
        check(mis.rfind("trial,e_avg,e_lego", 0) == 0,
              "misalignment CSV has e_avg and e_lego columns");

        r = h.run("bench no-such-experiment --out " + (h.work / "rep").string());
        check(r.code == 2, "unknown experiment id exits 2");
        check(r.err.find("misalignment") != std::string::npos &&
                  r.err.find("pruning-curve") != std::string::npos,
              "unknown id error lists the valid ids");

        for (const std::string id : {"norm-decay", "conflict"}) {
            r = h.run("bench " + id + " --d 12 --r 4 --trials 5 --out " +
                      (h.work / "rep").string());
            check(r.code == 0, "bench " + id + " exits 0");
        }
        r = h.run("bench pruning-curve --d 12 --r 4 --fractions 0.5,1.0 --out " +
                  (h.work / "rep").string());
        check(r.code == 0, "bench pruning-curve exits 0");

        r = h.run("bench misalignment --adapters " + a6.string() + " --out " +
                  (h.work / "rep").string());
        check(r.code == 0, "bench misalignment runs on a real adapter");
        const std::string real_mis = read_file(h.work / "rep" / "misalignment.csv");
        check(real_mis.rfind("layer_index,e_avg,e_lego", 0) == 0,
              "real-adapter misalignment reports per-layer rows");

        r = h.run("bench norm-decay --adapters " + a6.string() + "," + b6.string() +
                  " --k 6 --out " + (h.work / "rep").string());
        check(r.code == 0, "bench norm-decay runs on real adapters");
    }

    {  // seed environment variable
        const fs::path out_env = h.work / "env_merge";
        const std::string cmd = "LORALEGO_SEED=11 " + h.binary + " merge --method lego --k 8 " +
                                "--adapters " + a6.string() + "," + b6.string() + " --out " +
                                out_env.string() + " >/dev/null 2>&1";
        const int raw = std::system(cmd.c_str());
        const auto direct = h.run("merge --method lego --k 8 --seed 11 --adapters " +
                                  a6.string() + "," + b6.string() + " --out " +
                                  (h.work / "env_direct").string());
        const bool env_ok = WIFEXITED(raw) && WEXITSTATUS(raw) == 0 && direct.code == 0;
        bool same = false;
        if (env_ok) {
            const LoraAdapter m1 = load_adapter(out_env);
            const LoraAdapter m2 = load_adapter(h.work / "env_direct");
            same = m1.layers.at("layer.0").a.data() == m2.layers.at("layer.0").a.data();
        }
        check(env_ok && same, "LORALEGO_SEED matches an explicit --seed");
    }

    std::cout << (g_failures == 0 ? "ALL CLI CHECKS PASSED\n"
                                  : std::to_string(g_failures) + " CLI CHECKS FAILED\n");
    return g_failures == 0 ? 0 : 1;
}
