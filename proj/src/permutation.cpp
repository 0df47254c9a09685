// SPDX-License-Identifier: Apache-2.0
#include "loralego/permutation.hpp"

#include <numeric>
#include <string>

#include "loralego/errors.hpp"

namespace loralego {

PermutationSpec::PermutationSpec(std::vector<std::size_t> mapping)
    : mapping_(std::move(mapping)) {
    std::vector<bool> seen(mapping_.size(), false);
    for (const std::size_t idx : mapping_) {
        if (idx >= mapping_.size() || seen[idx]) {
            throw DomainError("permutation mapping is not a bijection on {0.." +
                              std::to_string(mapping_.size()) + "-1}");
        }
        seen[idx] = true;
    }
}

PermutationSpec PermutationSpec::identity(std::size_t n) {
    std::vector<std::size_t> mapping(n);
    std::iota(mapping.begin(), mapping.end(), std::size_t{0});
    return PermutationSpec(std::move(mapping));
}

PermutationSpec PermutationSpec::random(std::size_t n, Rng& rng) {
    std::vector<std::size_t> mapping(n);
    std::iota(mapping.begin(), mapping.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
        std::swap(mapping[i - 1], mapping[rng.uniform_below(i)]);
    }
    return PermutationSpec(std::move(mapping));
}

PermutationSpec PermutationSpec::inverse() const {
    std::vector<std::size_t> inv(mapping_.size());
    for (std::size_t i = 0; i < mapping_.size(); ++i) {
        inv[mapping_[i]] = i;
    }
    return PermutationSpec(std::move(inv));
}

bool PermutationSpec::is_identity() const {
    for (std::size_t i = 0; i < mapping_.size(); ++i) {
        if (mapping_[i] != i) {
            return false;
        }
    }
    return true;
}

Matrix PermutationSpec::to_matrix() const {
    Matrix p(mapping_.size(), mapping_.size());
    for (std::size_t i = 0; i < mapping_.size(); ++i) {
        p(i, mapping_[i]) = 1.0;
    }
    return p;
}

PermutationSpec compose(const PermutationSpec& first, const PermutationSpec& second) {
    if (first.size() != second.size()) {
        throw DimensionError("compose: permutation sizes differ");
    }
    std::vector<std::size_t> mapping(first.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        mapping[i] = first[second[i]];
    }
    return PermutationSpec(std::move(mapping));
}

Matrix apply_row_permutation(const Matrix& m, const PermutationSpec& p) {
    if (p.size() != m.rows()) {
        throw DimensionError("apply_row_permutation: permutation length " +
                             std::to_string(p.size()) + " vs " + std::to_string(m.rows()) +
                             " rows");
    }
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto src = m.row(p[i]);
        auto dst = out.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) {
            dst[j] = src[j];
        }
    }
    return out;
}

}  // namespace loralego
