// SPDX-License-Identifier: Apache-2.0
#include "loralego/adapter.hpp"

#include <fstream>

#include "loralego/errors.hpp"
#include "loralego/safetensors.hpp"

namespace loralego {

namespace {

constexpr const char* kWeightsFile = "adapter_model.safetensors";
constexpr const char* kConfigFile = "adapter_config.json";
constexpr const char* kSuffixA = ".lora_A.weight";
constexpr const char* kSuffixB = ".lora_B.weight";

bool strip_suffix(const std::string& name, const char* suffix, std::string& prefix) {
    const std::string s(suffix);
    if (name.size() <= s.size() || name.compare(name.size() - s.size(), s.size(), s) != 0) {
        return false;
    }
    prefix = name.substr(0, name.size() - s.size());
    return true;
}

Matrix matrix_from_entry(const TensorEntry& entry, const std::string& name) {
    if (entry.shape.size() != 2) {
        throw ValidationError(ValidationError::Kind::invalid_value,
                              "tensor \"" + name + "\" is not 2-dimensional");
    }
    Matrix m(entry.shape[0], entry.shape[1], entry.to_f64());
    if (!m.all_finite()) {
        throw ValidationError(ValidationError::Kind::non_finite,
                              "tensor \"" + name + "\" contains NaN or Inf");
    }
    return m;
}

}  // namespace

void validate_adapter(const LoraAdapter& adapter) {
    if (adapter.rank < 1) {
        throw ValidationError(ValidationError::Kind::invalid_value,
                              "adapter \"" + adapter.name + "\": rank must be >= 1");
    }
    if (!(adapter.alpha > 0.0)) {
        throw ValidationError(ValidationError::Kind::invalid_value,
                              "adapter \"" + adapter.name + "\": alpha must be positive");
    }
    for (const auto& [path, layer] : adapter.layers) {
        if (layer.a.rows() != adapter.rank || layer.b.cols() != adapter.rank) {
            throw ValidationError(ValidationError::Kind::rank_mismatch,
                                  "layer \"" + path + "\": factors have rank " +
                                      std::to_string(layer.a.rows()) + "/" +
                                      std::to_string(layer.b.cols()) + " but config says " +
                                      std::to_string(adapter.rank));
        }
        if (layer.d_in() < 1 || layer.d_out() < 1) {
            throw ValidationError(ValidationError::Kind::invalid_value,
                                  "layer \"" + path + "\": empty dimension");
        }
        if (!layer.a.all_finite() || !layer.b.all_finite()) {
            throw ValidationError(ValidationError::Kind::non_finite,
                                  "layer \"" + path + "\" contains NaN or Inf");
        }
    }
}

LoraAdapter load_adapter(const std::filesystem::path& dir, bool ignore_extra) {
    const auto config_path = dir / kConfigFile;
    std::ifstream config_in(config_path);
    if (!config_in) {
        throw IoError("cannot open " + config_path.string());
    }
    nlohmann::json config =
        nlohmann::json::parse(config_in, nullptr, /*allow_exceptions=*/false);
    if (config.is_discarded() || !config.is_object()) {
        throw ValidationError(ValidationError::Kind::invalid_value,
                              config_path.string() + " is not a JSON object");
    }
    for (const char* key : {"r", "lora_alpha", "target_modules"}) {
        if (!config.contains(key)) {
            throw ValidationError(ValidationError::Kind::missing_config_key,
                                  config_path.string() + " lacks required key \"" +
                                      key + "\"");
        }
    }
    if (!config["r"].is_number_integer() || config["r"].get<long long>() < 1) {
        throw ValidationError(ValidationError::Kind::invalid_value,
                              "config key \"r\" must be a positive integer");
    }
    if (!config["lora_alpha"].is_number()) {
        throw ValidationError(ValidationError::Kind::invalid_value,
                              "config key \"lora_alpha\" must be a number");
    }

    LoraAdapter adapter;
    adapter.name = dir.filename().string();
    if (adapter.name.empty()) {
        adapter.name = dir.parent_path().filename().string();
    }
    adapter.rank = config["r"].get<std::size_t>();
    adapter.alpha = config["lora_alpha"].get<double>();
    adapter.scaling_folded = false;
    adapter.target_modules = config["target_modules"].get<std::vector<std::string>>();
    adapter.extra_config = config;
    adapter.extra_config.erase("r");
    adapter.extra_config.erase("lora_alpha");
    adapter.extra_config.erase("target_modules");

    const TensorMap map = read_safetensors(dir / kWeightsFile);
    std::map<std::string, Matrix> a_parts;
    std::map<std::string, Matrix> b_parts;
    for (const auto& [name, entry] : map.entries) {
        std::string prefix;
        if (strip_suffix(name, kSuffixA, prefix)) {
            a_parts.emplace(prefix, matrix_from_entry(entry, name));
        } else if (strip_suffix(name, kSuffixB, prefix)) {
            b_parts.emplace(prefix, matrix_from_entry(entry, name));
        } else if (!ignore_extra) {
            throw ValidationError(ValidationError::Kind::unexpected_tensor,
                                  "tensor \"" + name + "\" matches neither " + kSuffixA +
                                      " nor " + kSuffixB);
        }
    }

    for (auto& [path, a] : a_parts) {
        auto b_it = b_parts.find(path);
        if (b_it == b_parts.end()) {
            throw ValidationError(ValidationError::Kind::unpaired_tensor,
                                  "layer \"" + path + "\" has lora_A but no lora_B");
        }
        adapter.layers.emplace(path, LoraLayer{std::move(a), std::move(b_it->second)});
        b_parts.erase(b_it);
    }
    if (!b_parts.empty()) {
        throw ValidationError(ValidationError::Kind::unpaired_tensor,
                              "layer \"" + b_parts.begin()->first +
                                  "\" has lora_B but no lora_A");
    }

    validate_adapter(adapter);
    return adapter;
}

void save_adapter(const LoraAdapter& adapter, const std::filesystem::path& dir, Dtype dtype) {
    if (dtype != Dtype::f32 && dtype != Dtype::f16) {
        throw DomainError("save_adapter: only f32 and f16 writes are supported");
    }
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }

    TensorMap map;
    for (const auto& [path, layer] : adapter.layers) {
        map.entries.emplace(path + kSuffixA,
                            TensorEntry::from_f64(layer.a.data(),
                                                  {layer.a.rows(), layer.a.cols()}, dtype));
        map.entries.emplace(path + kSuffixB,
                            TensorEntry::from_f64(layer.b.data(),
                                                  {layer.b.rows(), layer.b.cols()}, dtype));
    }
    write_safetensors(map, dir / kWeightsFile);

    nlohmann::json config = adapter.extra_config;
    config["r"] = adapter.rank;
    config["lora_alpha"] = adapter.alpha;
    config["target_modules"] = adapter.target_modules;
    std::ofstream out(dir / kConfigFile, std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + (dir / kConfigFile).string() + " for writing");
    }
    out << config.dump(2) << "\n";
    if (!out) {
        throw IoError("write failed for " + (dir / kConfigFile).string());
    }
}

}  // namespace loralego
