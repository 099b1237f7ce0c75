// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "bihmg/linalg.hpp"

namespace bihmg {

// Tensors are stored flat in row-major order (last index fastest). With this
// layout the standard Kronecker product A_1 (x) ... (x) A_d acts by applying
// A_k along mode k, the first factor on the slowest index.

inline std::int64_t shape_size(const std::vector<int>& shape)
{
    std::int64_t s = 1;
    for (int n : shape)
        s *= n;
    return s;
}

namespace detail {

inline void mode_extents(const std::vector<int>& shape, int mode, std::int64_t& left,
                         std::int64_t& right)
{
    left = 1;
    right = 1;
    for (int j = 0; j < mode; ++j)
        left *= shape[j];
    for (int j = mode + 1; j < static_cast<int>(shape.size()); ++j)
        right *= shape[j];
}

using SlabMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstSlabMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace detail

/// y = A applied along `mode` of x; shape[mode] becomes A.rows().
inline Vector mode_apply(const Matrix& a, const Vector& x, std::vector<int>& shape, int mode)
{
    std::int64_t left, right;
    detail::mode_extents(shape, mode, left, right);
    const int nin = shape[mode];
    const int nout = static_cast<int>(a.rows());
    if (a.cols() != nin)
        throw std::invalid_argument("mode_apply: factor shape mismatch");
    Vector y(left * nout * right);
    for (std::int64_t l = 0; l < left; ++l) {
        detail::ConstSlabMap xs(x.data() + l * nin * right, nin, right);
        detail::SlabMap ys(y.data() + l * nout * right, nout, right);
        ys.noalias() = a * xs;
    }
    shape[mode] = nout;
    return y;
}

inline Vector mode_apply(const CsrMatrix& a, const Vector& x, std::vector<int>& shape, int mode)
{
    std::int64_t left, right;
    detail::mode_extents(shape, mode, left, right);
    const int nin = shape[mode];
    if (a.cols != nin)
        throw std::invalid_argument("mode_apply: factor shape mismatch");
    Vector y = Vector::Zero(left * a.rows * right);
    for (std::int64_t l = 0; l < left; ++l) {
        detail::ConstSlabMap xs(x.data() + l * nin * right, nin, right);
        detail::SlabMap ys(y.data() + l * static_cast<std::int64_t>(a.rows) * right, a.rows,
                           right);
        for (int i = 0; i < a.rows; ++i)
            for (std::int64_t k = a.offsets[i]; k < a.offsets[i + 1]; ++k)
                ys.row(i) += a.values[k] * xs.row(a.indices[k]);
    }
    shape[mode] = a.rows;
    return y;
}

inline Vector mode_apply(const BandedMatrix& a, const Vector& x, std::vector<int>& shape,
                         int mode)
{
    std::int64_t left, right;
    detail::mode_extents(shape, mode, left, right);
    const int n = shape[mode];
    if (a.order() != n)
        throw std::invalid_argument("mode_apply: factor shape mismatch");
    const int bw = a.bandwidth();
    Vector y = Vector::Zero(x.size());
    for (std::int64_t l = 0; l < left; ++l) {
        detail::ConstSlabMap xs(x.data() + l * n * right, n, right);
        detail::SlabMap ys(y.data() + l * n * right, n, right);
        for (int j = 0; j < n; ++j) {
            ys.row(j) += a.band(0, j) * xs.row(j);
            const int top = std::min(bw, n - 1 - j);
            for (int r = 1; r <= top; ++r) {
                const double v = a.band(r, j);
                ys.row(j + r) += v * xs.row(j);
                ys.row(j) += v * xs.row(j + r);
            }
        }
    }
    return y;
}

/// Solves F along `mode` of x, in place.
inline void mode_solve(const BandedCholesky& f, Vector& x, const std::vector<int>& shape,
                       int mode)
{
    std::int64_t left, right;
    detail::mode_extents(shape, mode, left, right);
    const int n = f.order();
    if (shape[mode] != n)
        throw std::invalid_argument("mode_solve: factor shape mismatch");
    const BandedMatrix& lmat = f.factor();
    const int bw = lmat.bandwidth();
    for (std::int64_t l = 0; l < left; ++l) {
        detail::SlabMap xs(x.data() + l * n * right, n, right);
        for (int j = 0; j < n; ++j) {
            xs.row(j) /= lmat.band(0, j);
            const int top = std::min(bw, n - 1 - j);
            for (int r = 1; r <= top; ++r)
                xs.row(j + r) -= lmat.band(r, j) * xs.row(j);
        }
        for (int j = n - 1; j >= 0; --j) {
            const int top = std::min(bw, n - 1 - j);
            for (int r = 1; r <= top; ++r)
                xs.row(j) -= lmat.band(r, j) * xs.row(j + r);
            xs.row(j) /= lmat.band(0, j);
        }
    }
}

inline void mode_solve(const Eigen::LLT<Matrix>& f, Vector& x, const std::vector<int>& shape,
                       int mode)
{
    std::int64_t left, right;
    detail::mode_extents(shape, mode, left, right);
    const int n = static_cast<int>(f.matrixL().rows());
    if (shape[mode] != n)
        throw std::invalid_argument("mode_solve: factor shape mismatch");
    Matrix buf(n, right);
    for (std::int64_t l = 0; l < left; ++l) {
        detail::SlabMap xs(x.data() + l * n * right, n, right);
        buf = xs;
        xs = f.solve(buf);
    }
}

/// Solves a dense SPD factor jointly over a group of modes, in place.
/// The factor order must equal the product of the grouped extents, with the
/// grouped modes ordered as given (ascending) and the last one fastest.
inline void grouped_solve(const Eigen::LLT<Matrix>& f, Vector& x, const std::vector<int>& shape,
                          const std::vector<int>& modes)
{
    const int d = static_cast<int>(shape.size());
    std::vector<std::int64_t> stride(d, 1);
    for (int k = d - 2; k >= 0; --k)
        stride[k] = stride[k + 1] * shape[k + 1];

    std::vector<char> grouped(d, 0);
    for (int m : modes)
        grouped[m] = 1;

    // offsets within a fiber of the grouped modes
    std::vector<std::int64_t> goff(1, 0);
    for (int m : modes) {
        std::vector<std::int64_t> next;
        next.reserve(goff.size() * shape[m]);
        for (std::int64_t base : goff)
            for (int i = 0; i < shape[m]; ++i)
                next.push_back(base + i * stride[m]);
        goff = std::move(next);
    }
    const int g = static_cast<int>(goff.size());
    if (f.matrixL().rows() != g)
        throw std::invalid_argument("grouped_solve: factor shape mismatch");

    std::vector<int> other;
    for (int k = 0; k < d; ++k)
        if (!grouped[k])
            other.push_back(k);

    Vector buf(g);
    std::vector<int> idx(other.size(), 0);
    while (true) {
        std::int64_t base = 0;
        for (std::size_t t = 0; t < other.size(); ++t)
            base += static_cast<std::int64_t>(idx[t]) * stride[other[t]];
        for (int t = 0; t < g; ++t)
            buf[t] = x[base + goff[t]];
        buf = f.solve(buf);
        for (int t = 0; t < g; ++t)
            x[base + goff[t]] = buf[t];
        // odometer over the non-grouped modes
        int t = static_cast<int>(other.size()) - 1;
        for (; t >= 0; --t) {
            if (++idx[t] < shape[other[t]])
                break;
            idx[t] = 0;
        }
        if (t < 0)
            break;
    }
}

// ---------------------------------------------------------------------------
// Kronecker sums
// ---------------------------------------------------------------------------

/// Weighted sum of Kronecker products of symmetric banded univariate factors,
///   sum_t w_t (A_t,1 (x) ... (x) A_t,d).
/// Application never materializes the Kronecker expansion; it performs d
/// successive mode contractions per term.
class KroneckerSum {
public:
    struct Term {
        double weight;
        std::vector<BandedMatrix> factors;
    };

    KroneckerSum() = default;
    explicit KroneckerSum(std::vector<int> dims) : dims_(std::move(dims)) {}

    void add_term(double weight, std::vector<BandedMatrix> factors)
    {
        if (factors.size() != dims_.size())
            throw std::invalid_argument("KroneckerSum: wrong number of factors");
        for (std::size_t k = 0; k < factors.size(); ++k)
            if (factors[k].order() != dims_[k])
                throw std::invalid_argument("KroneckerSum: factor order mismatch");
        terms_.push_back({weight, std::move(factors)});
    }

    const std::vector<int>& dims() const { return dims_; }
    std::int64_t size() const { return shape_size(dims_); }
    const std::vector<Term>& terms() const { return terms_; }

    void apply(const Vector& x, Vector& y) const
    {
        if (x.size() != size())
            throw std::invalid_argument("KroneckerSum::apply: vector length mismatch");
        y.setZero(x.size());
        std::vector<int> shape = dims_;
        for (const Term& t : terms_) {
            Vector tmp = x;
            for (std::size_t k = 0; k < t.factors.size(); ++k)
                tmp = mode_apply(t.factors[k], tmp, shape, static_cast<int>(k));
            y += t.weight * tmp;
        }
    }

    Vector apply(const Vector& x) const
    {
        Vector y;
        apply(x, y);
        return y;
    }

    Matrix to_dense() const
    {
        const std::int64_t n = size();
        Matrix a = Matrix::Zero(n, n);
        const int d = static_cast<int>(dims_.size());
        std::vector<int> mi(d, 0), mj(d, 0);
        for (std::int64_t i = 0; i < n; ++i) {
            for (std::int64_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (const Term& t : terms_) {
                    double prod = t.weight;
                    for (int k = 0; k < d; ++k)
                        prod *= t.factors[k](mi[k], mj[k]);
                    s += prod;
                }
                a(i, j) = s;
                for (int k = d - 1; k >= 0; --k) {
                    if (++mj[k] < dims_[k])
                        break;
                    mj[k] = 0;
                }
            }
            for (int k = d - 1; k >= 0; --k) {
                if (++mi[k] < dims_[k])
                    break;
                mi[k] = 0;
            }
        }
        return a;
    }

private:
    std::vector<int> dims_;
    std::vector<Term> terms_;
};

}  // namespace bihmg
