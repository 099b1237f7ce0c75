// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "bihmg/util.hpp"

namespace bihmg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Symmetric banded matrices
// ---------------------------------------------------------------------------

/// Symmetric banded matrix of order n with b sub/super-diagonals.
/// Only the lower band is stored, column-major: entry(r, j) = A(j+r, j).
class BandedMatrix {
public:
    BandedMatrix() = default;
    BandedMatrix(int order, int bandwidth)
        : n_(order), bw_(std::min(bandwidth, order > 0 ? order - 1 : 0)),
          data_((bw_ + 1) * static_cast<std::size_t>(order), 0.0) {}

    int order() const { return n_; }
    int bandwidth() const { return bw_; }

    double operator()(int i, int j) const
    {
        if (i < j)
            std::swap(i, j);
        if (i - j > bw_)
            return 0.0;
        return data_[static_cast<std::size_t>(j) * (bw_ + 1) + (i - j)];
    }

    void add(int i, int j, double v)
    {
        if (i < j)
            std::swap(i, j);
        if (i - j > bw_)
            throw std::out_of_range("BandedMatrix::add: entry outside band");
        data_[static_cast<std::size_t>(j) * (bw_ + 1) + (i - j)] += v;
    }

    void set(int i, int j, double v)
    {
        if (i < j)
            std::swap(i, j);
        if (i - j > bw_)
            throw std::out_of_range("BandedMatrix::set: entry outside band");
        data_[static_cast<std::size_t>(j) * (bw_ + 1) + (i - j)] = v;
    }

    /// y = A x
    void apply(const Vector& x, Vector& y) const
    {
        y.setZero(n_);
        for (int j = 0; j < n_; ++j) {
            const double xj = x[j];
            y[j] += band(0, j) * xj;
            const int top = std::min(bw_, n_ - 1 - j);
            for (int r = 1; r <= top; ++r) {
                const double v = band(r, j);
                y[j + r] += v * xj;
                y[j] += v * x[j + r];
            }
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
        Matrix a = Matrix::Zero(n_, n_);
        for (int j = 0; j < n_; ++j)
            for (int r = 0; r <= std::min(bw_, n_ - 1 - j); ++r)
                a(j + r, j) = a(j, j + r) = band(r, j);
        return a;
    }

    static BandedMatrix identity(int order)
    {
        BandedMatrix a(order, 0);
        for (int j = 0; j < order; ++j)
            a.set(j, j, 1.0);
        return a;
    }

    /// Extracts the band of a dense symmetric matrix.
    static BandedMatrix from_dense(const Matrix& a, int bandwidth)
    {
        const int n = static_cast<int>(a.rows());
        BandedMatrix b(n, bandwidth);
        for (int j = 0; j < n; ++j)
            for (int r = 0; r <= std::min(b.bandwidth(), n - 1 - j); ++r)
                b.set(j + r, j, a(j + r, j));
        return b;
    }

    double band(int r, int j) const { return data_[static_cast<std::size_t>(j) * (bw_ + 1) + r]; }
    double& band(int r, int j) { return data_[static_cast<std::size_t>(j) * (bw_ + 1) + r]; }

private:
    int n_ = 0;
    int bw_ = 0;
    std::vector<double> data_;
};

/// Cholesky factor of a symmetric positive definite banded matrix, A = L L'.
class BandedCholesky {
public:
    BandedCholesky() = default;

    explicit BandedCholesky(const BandedMatrix& a) : l_(a)
    {
        const int n = l_.order();
        const int bw = l_.bandwidth();
        for (int j = 0; j < n; ++j) {
            double d = l_.band(0, j);
            for (int k = std::max(0, j - bw); k < j; ++k) {
                const double ljk = l_.band(j - k, k);
                d -= ljk * ljk;
            }
            if (!(d > 0.0))
                throw NotSpdError("banded Cholesky: non-positive pivot at index " +
                                      std::to_string(j),
                                  j);
            const double dj = std::sqrt(d);
            l_.band(0, j) = dj;
            const int top = std::min(bw, n - 1 - j);
            for (int r = 1; r <= top; ++r) {
                double s = l_.band(r, j);
                const int i = j + r;
                for (int k = std::max(0, i - bw); k < j; ++k)
                    s -= l_.band(i - k, k) * l_.band(j - k, k);
                l_.band(r, j) = s / dj;
            }
        }
    }

    int order() const { return l_.order(); }

    /// Solves A x = b in place.
    void solve_in_place(double* b, int stride = 1) const
    {
        const int n = l_.order();
        const int bw = l_.bandwidth();
        for (int j = 0; j < n; ++j) {
            const double xj = b[j * stride] / l_.band(0, j);
            b[j * stride] = xj;
            const int top = std::min(bw, n - 1 - j);
            for (int r = 1; r <= top; ++r)
                b[(j + r) * stride] -= l_.band(r, j) * xj;
        }
        for (int j = n - 1; j >= 0; --j) {
            double s = b[j * stride];
            const int top = std::min(bw, n - 1 - j);
            for (int r = 1; r <= top; ++r)
                s -= l_.band(r, j) * b[(j + r) * stride];
            b[j * stride] = s / l_.band(0, j);
        }
    }

    Vector solve(Vector b) const
    {
        solve_in_place(b.data());
        return b;
    }

    const BandedMatrix& factor() const { return l_; }

private:
    BandedMatrix l_;
};

// ---------------------------------------------------------------------------
// CSR sparse matrices
// ---------------------------------------------------------------------------

/// Compressed sparse row matrix. Column indices are sorted within each row
/// once finalize() has run; finalize also merges duplicates and drops
/// explicit zeros.
struct CsrMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<std::int64_t> offsets;  // size rows + 1
    std::vector<int> indices;
    std::vector<double> values;

    std::int64_t nnz() const { return static_cast<std::int64_t>(values.size()); }

    void apply(const Vector& x, Vector& y) const
    {
        y.resize(rows);
        for (int i = 0; i < rows; ++i) {
            double s = 0.0;
            for (std::int64_t k = offsets[i]; k < offsets[i + 1]; ++k)
                s += values[k] * x[indices[k]];
            y[i] = s;
        }
    }

    Vector apply(const Vector& x) const
    {
        Vector y;
        apply(x, y);
        return y;
    }

    /// y += A' x
    void apply_transposed_add(const Vector& x, Vector& y) const
    {
        for (int i = 0; i < rows; ++i) {
            const double xi = x[i];
            if (xi == 0.0)
                continue;
            for (std::int64_t k = offsets[i]; k < offsets[i + 1]; ++k)
                y[indices[k]] += values[k] * xi;
        }
    }

    CsrMatrix transposed() const
    {
        CsrMatrix t;
        t.rows = cols;
        t.cols = rows;
        t.offsets.assign(cols + 1, 0);
        for (int idx : indices)
            ++t.offsets[idx + 1];
        for (int j = 0; j < cols; ++j)
            t.offsets[j + 1] += t.offsets[j];
        t.indices.resize(values.size());
        t.values.resize(values.size());
        std::vector<std::int64_t> fill(t.offsets.begin(), t.offsets.end() - 1);
        for (int i = 0; i < rows; ++i)
            for (std::int64_t k = offsets[i]; k < offsets[i + 1]; ++k) {
                const std::int64_t pos = fill[indices[k]]++;
                t.indices[pos] = i;
                t.values[pos] = values[k];
            }
        return t;
    }

    Matrix to_dense() const
    {
        Matrix a = Matrix::Zero(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (std::int64_t k = offsets[i]; k < offsets[i + 1]; ++k)
                a(i, indices[k]) += values[k];
        return a;
    }

    static CsrMatrix from_dense(const Matrix& a, double drop_tol = 0.0)
    {
        CsrMatrix m;
        m.rows = static_cast<int>(a.rows());
        m.cols = static_cast<int>(a.cols());
        m.offsets.assign(m.rows + 1, 0);
        for (int i = 0; i < m.rows; ++i) {
            for (int j = 0; j < m.cols; ++j)
                if (std::abs(a(i, j)) > drop_tol) {
                    m.indices.push_back(j);
                    m.values.push_back(a(i, j));
                }
            m.offsets[i + 1] = static_cast<std::int64_t>(m.indices.size());
        }
        return m;
    }

    static CsrMatrix from_triplets(int rows, int cols,
                                   std::vector<std::tuple<int, int, double>> trip)
    {
        std::sort(trip.begin(), trip.end(), [](const auto& a, const auto& b) {
            return std::tie(std::get<0>(a), std::get<1>(a)) <
                   std::tie(std::get<0>(b), std::get<1>(b));
        });
        CsrMatrix m;
        m.rows = rows;
        m.cols = cols;
        m.offsets.assign(rows + 1, 0);
        for (std::size_t k = 0; k < trip.size();) {
            const int i = std::get<0>(trip[k]);
            const int j = std::get<1>(trip[k]);
            double v = 0.0;
            while (k < trip.size() && std::get<0>(trip[k]) == i && std::get<1>(trip[k]) == j)
                v += std::get<2>(trip[k++]);
            if (v != 0.0) {
                m.indices.push_back(j);
                m.values.push_back(v);
                ++m.offsets[i + 1];
            }
        }
        for (int i = 0; i < rows; ++i)
            m.offsets[i + 1] += m.offsets[i];
        return m;
    }

    /// Merges duplicates, sorts columns within rows and drops exact zeros.
    void finalize()
    {
        std::vector<std::int64_t> new_offsets(rows + 1, 0);
        std::vector<int> new_indices;
        std::vector<double> new_values;
        new_indices.reserve(indices.size());
        new_values.reserve(values.size());
        std::vector<std::pair<int, double>> row;
        for (int i = 0; i < rows; ++i) {
            row.clear();
            for (std::int64_t k = offsets[i]; k < offsets[i + 1]; ++k)
                row.emplace_back(indices[k], values[k]);
            std::sort(row.begin(), row.end());
            for (std::size_t k = 0; k < row.size();) {
                const int j = row[k].first;
                double v = 0.0;
                while (k < row.size() && row[k].first == j)
                    v += row[k++].second;
                if (v != 0.0) {
                    new_indices.push_back(j);
                    new_values.push_back(v);
                }
            }
            new_offsets[i + 1] = static_cast<std::int64_t>(new_indices.size());
        }
        offsets = std::move(new_offsets);
        indices = std::move(new_indices);
        values = std::move(new_values);
    }
};

// ---------------------------------------------------------------------------
// Preconditioned conjugate gradients
// ---------------------------------------------------------------------------

struct PcgResult {
    Vector x;
    int iterations = 0;
    std::vector<double> residual_history;  // 2-norms, starting with ||r0||
    bool converged = false;
};

/// PCG for SPD A with SPD preconditioner P (as operators). Stops at the
/// first iterate whose 2-norm residual is below rel_tol * ||rhs - A x0||.
/// The returned iteration count is that first passing index.
template <class ApplyA, class ApplyP>
PcgResult pcg(ApplyA&& apply_a, ApplyP&& apply_p, const Vector& rhs, const Vector& x0,
              double rel_tol, int max_iter,
              const std::function<void(const Vector&)>& on_iterate = {})
{
    PcgResult res;
    res.x = x0;
    Vector r = rhs - apply_a(x0);
    const double r0_norm = r.norm();
    res.residual_history.push_back(r0_norm);
    if (r0_norm == 0.0) {
        res.converged = true;
        return res;
    }
    Vector z = apply_p(r);
    double rho = r.dot(z);
    if (rho < 0.0)
        throw std::runtime_error("pcg: preconditioner is not positive definite, <r, Pr> < 0");
    Vector p = z;
    for (int k = 1; k <= max_iter; ++k) {
        const Vector ap = apply_a(p);
        const double denom = p.dot(ap);
        if (denom <= 0.0)
            throw std::runtime_error("pcg: system operator is not positive definite");
        const double alpha = rho / denom;
        res.x += alpha * p;
        r -= alpha * ap;
        const double rnorm = r.norm();
        res.residual_history.push_back(rnorm);
        res.iterations = k;
        if (on_iterate)
            on_iterate(res.x);
        if (rnorm <= rel_tol * r0_norm) {
            res.converged = true;
            return res;
        }
        z = apply_p(r);
        const double rho_new = r.dot(z);
        if (rho_new < 0.0)
            throw std::runtime_error("pcg: preconditioner is not positive definite, <r, Pr> < 0");
        p = z + (rho_new / rho) * p;
        rho = rho_new;
    }
    return res;  // not converged, history returned for inspection
}

}  // namespace bihmg
