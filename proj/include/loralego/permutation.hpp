// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "loralego/matrix.hpp"
#include "loralego/rng.hpp"

namespace loralego {

/// A bijection on {0..n-1}. Realized as matrix P with P(i, mapping[i]) = 1,
/// so P satisfies PᵀP = I and P·M permutes rows by the mapping.
class PermutationSpec {
public:
    explicit PermutationSpec(std::vector<std::size_t> mapping);

    static PermutationSpec identity(std::size_t n);
    static PermutationSpec random(std::size_t n, Rng& rng);

    std::size_t size() const { return mapping_.size(); }
    std::size_t operator[](std::size_t i) const { return mapping_[i]; }
    const std::vector<std::size_t>& mapping() const { return mapping_; }

    PermutationSpec inverse() const;
    bool is_identity() const;
    Matrix to_matrix() const;

private:
    std::vector<std::size_t> mapping_;
};

/// Applying `first` and then `second` equals applying the composition.
PermutationSpec compose(const PermutationSpec& first, const PermutationSpec& second);

/// Output row i = input row p[i]. Pure data movement, no float arithmetic.
Matrix apply_row_permutation(const Matrix& m, const PermutationSpec& p);

}  // namespace loralego
