// SPDX-License-Identifier: Apache-2.0
#include "loralego/matrix.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#include "loralego/errors.hpp"

namespace loralego {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                             " does not match " + std::to_string(rows_) + "x" +
                             std::to_string(cols_));
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

std::vector<double> Matrix::col(std::size_t j) const {
    std::vector<double> out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
        out[i] = data_[i * cols_ + j];
    }
    return out;
}

bool Matrix::all_finite() const {
    for (const double v : data_) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + " times " + std::to_string(b.rows()) +
                             "x" + std::to_string(b.cols()));
    }
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    const std::size_t p = b.cols();
    Matrix out(m, p);
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    double* od = out.data().data();

    // i-k-j accumulation sums over k in index order for every output entry,
    // matching the serial reference bit for bit.
    const bool big = m * n * p >= 1u << 16;
#pragma omp parallel for schedule(static) if (big)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
        double* orow = od + static_cast<std::size_t>(i) * p;
        const double* arow = ad + static_cast<std::size_t>(i) * n;
        for (std::size_t k = 0; k < n; ++k) {
            const double aik = arow[k];
            const double* brow = bd + k * p;
            for (std::size_t j = 0; j < p; ++j) {
                orow[j] += aik * brow[j];
            }
        }
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            out(j, i) = m(i, j);
        }
    }
    return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) {
        throw DimensionError("add: shape mismatch");
    }
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data()[i] += b.data()[i];
    }
    return out;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) {
        throw DimensionError("subtract: shape mismatch");
    }
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data()[i] -= b.data()[i];
    }
    return out;
}

Matrix scale(const Matrix& m, double factor) {
    Matrix out = m;
    for (double& v : out.data()) {
        v *= factor;
    }
    return out;
}

Matrix solve_linear(Matrix a, Matrix rhs) {
    if (a.rows() != a.cols()) {
        throw DimensionError("solve_linear: matrix must be square");
    }
    if (a.rows() != rhs.rows()) {
        throw DimensionError("solve_linear: rhs row count mismatch");
    }
    const std::size_t n = a.rows();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        double best = std::fabs(a(col, col));
        for (std::size_t r = col + 1; r < n; ++r) {
            const double cand = std::fabs(a(r, col));
            if (cand > best) {
                best = cand;
                pivot = r;
            }
        }
        if (best == 0.0) {
            throw DomainError("solve_linear: singular matrix");
        }
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(a(col, j), a(pivot, j));
            }
            for (std::size_t j = 0; j < rhs.cols(); ++j) {
                std::swap(rhs(col, j), rhs(pivot, j));
            }
        }
        const double inv = 1.0 / a(col, col);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a(r, col) * inv;
            if (f == 0.0) {
                continue;
            }
            for (std::size_t j = col; j < n; ++j) {
                a(r, j) -= f * a(col, j);
            }
            for (std::size_t j = 0; j < rhs.cols(); ++j) {
                rhs(r, j) -= f * rhs(col, j);
            }
        }
    }
    Matrix x(n, rhs.cols());
    for (std::size_t r = n; r-- > 0;) {
        for (std::size_t j = 0; j < rhs.cols(); ++j) {
            double acc = rhs(r, j);
            for (std::size_t c = r + 1; c < n; ++c) {
                acc -= a(r, c) * x(c, j);
            }
            x(r, j) = acc / a(r, r);
        }
    }
    return x;
}

double inf_norm(std::span<const double> v) {
    if (v.empty()) {
        throw DomainError("inf_norm: empty vector");
    }
    double best = 0.0;
    for (const double x : v) {
        const double a = std::fabs(x);
        if (a > best) {
            best = a;
        }
    }
    return best;
}

double l2_norm(std::span<const double> v) {
    double acc = 0.0;
    for (const double x : v) {
        acc += x * x;
    }
    return std::sqrt(acc);
}

double frobenius_norm(const Matrix& m) {
    return l2_norm(std::span<const double>(m.data().data(), m.data().size()));
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) {
        throw DimensionError("max_abs_diff: shape mismatch");
    }
    double best = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = std::fabs(a.data()[i] - b.data()[i]);
        if (d > best) {
            best = d;
        }
    }
    return best;
}

}  // namespace loralego
