// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace loralego {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Shape or length mismatch between operands.
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

/// Argument outside its valid domain (empty input, k out of range, ...).
class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

/// Operation invalid in the current state (e.g. folding scale twice).
class StateError : public Error {
public:
    explicit StateError(const std::string& msg) : Error(msg) {}
};

/// Filesystem failure (open, read, write).
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

/// Malformed safetensors container.
class ParseError : public Error {
public:
    enum class Kind {
        truncated,      // file shorter than its declared contents
        bad_header,     // header length or JSON malformed
        unknown_dtype,  // dtype tag not supported
        bad_offsets,    // offsets overlap, leave gaps, or disagree with shape
    };

    ParseError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// Structurally invalid adapter or inconsistent merge inputs.
class ValidationError : public Error {
public:
    enum class Kind {
        unpaired_tensor,     // lora_A without lora_B or vice versa
        unexpected_tensor,   // tensor name matching neither lora_A nor lora_B
        rank_mismatch,       // config rank disagrees with tensor shapes, or
                             // adapters of unequal rank fed to a same-rank merge
        missing_config_key,  // adapter_config.json lacks a required key
        shape_conflict,      // same layer with different (d_in, d_out) across adapters
        layer_set_mismatch,  // adapters do not cover the same layers
        non_finite,          // NaN or Inf in tensor data
        invalid_value,       // anything else structurally wrong
    };

    ValidationError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

}  // namespace loralego
