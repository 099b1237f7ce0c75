// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "bihmg/bspline.hpp"
#include "bihmg/geometry.hpp"
#include "bihmg/linalg.hpp"
#include "bihmg/quadrature.hpp"
#include "bihmg/tensor.hpp"

namespace bihmg {

// ---------------------------------------------------------------------------
// Boundary constraints
// ---------------------------------------------------------------------------

enum class BoundaryVariant {
    FirstBiharmonic,   // u = u' = 0 at both ends: drop two coefficients per end
    SecondBiharmonic,  // u = 0 strongly, u'' = 0 naturally: drop one per end
};

/// Contiguous range of unconstrained univariate coefficients.
struct FreeRange {
    int offset = 0;
    int count = 0;
};

/// Indices kept after strong boundary elimination. With open knots the
/// endpoint conditions are dual to the leading/trailing coefficients, so
/// elimination is index removal.
inline FreeRange clamp_constraints(const SplineSpace& space, BoundaryVariant variant)
{
    const int removed = (variant == BoundaryVariant::FirstBiharmonic) ? 2 : 1;
    if (variant == BoundaryVariant::FirstBiharmonic && space.degree < 2)
        throw std::invalid_argument(
            "clamp_constraints: degree >= 2 required to impose value and derivative "
            "independently");
    FreeRange r;
    r.offset = removed;
    r.count = space.dim() - 2 * removed;
    if (r.count < 1)
        throw std::invalid_argument("clamp_constraints: no free coefficients at this level");
    return r;
}

// ---------------------------------------------------------------------------
// Univariate Galerkin matrices
// ---------------------------------------------------------------------------

/// Banded Galerkin matrix of the r-th derivatives, \int phi_i^(r) phi_j^(r),
/// over the full (unconstrained) space. Per-element Gauss-Legendre quadrature
/// with quad_points nodes; the default p+1 is exact for these integrands.
inline BandedMatrix assemble_univariate_matrix(const SplineSpace& space, int deriv,
                                               int quad_points = 0)
{
    const int p = space.degree;
    if (quad_points <= 0)
        quad_points = p + 1;
    BandedMatrix a(space.dim(), p);
    const QuadRule ref = gauss_legendre(quad_points);
    for (int e = 0; e < space.elements; ++e) {
        for (int q = 0; q < ref.size(); ++q) {
            const double x = (e + 0.5 * (1.0 + ref.nodes[q])) * space.h;
            const double w = 0.5 * ref.weights[q] * space.h;
            const BasisEval be = eval_basis(space, x, deriv);
            for (int i = 0; i <= p; ++i)
                for (int j = i; j <= p; ++j)
                    a.add(be.anchor + i, be.anchor + j,
                          w * be.values(deriv, i) * be.values(deriv, j));
        }
    }
    return a;
}

/// Univariate mass and bending matrices of a spline space.
struct UnivariateSystem {
    SplineSpace space;
    BandedMatrix M;  // \int phi_i phi_j
    BandedMatrix B;  // \int phi_i'' phi_j''
};

inline UnivariateSystem assemble_univariate(const SplineSpace& space)
{
    UnivariateSystem s;
    s.space = space;
    s.M = assemble_univariate_matrix(space, 0);
    s.B = assemble_univariate_matrix(space, 2);
    return s;
}

/// Restriction of a banded matrix to a contiguous index range.
inline BandedMatrix restrict_to_free(const BandedMatrix& a, const FreeRange& r)
{
    BandedMatrix out(r.count, a.bandwidth());
    for (int j = 0; j < r.count; ++j)
        for (int i = j; i <= std::min(j + a.bandwidth(), r.count - 1); ++i)
            out.set(i, j, a(i + r.offset, j + r.offset));
    return out;
}

// ---------------------------------------------------------------------------
// Parameter-domain Kronecker operators
// ---------------------------------------------------------------------------

/// Per-direction constrained building blocks of the discrete problem.
struct DirectionBlocks {
    SplineSpace space;
    FreeRange free;
    BandedMatrix M;  // mass, free dofs
    BandedMatrix B;  // second-derivative form, free dofs
    BandedMatrix K;  // first-derivative form, free dofs
};

inline DirectionBlocks make_direction_blocks(const SplineSpace& space, const FreeRange& free)
{
    DirectionBlocks b;
    b.space = space;
    b.free = free;
    b.M = restrict_to_free(assemble_univariate_matrix(space, 0), b.free);
    b.B = restrict_to_free(assemble_univariate_matrix(space, 2), b.free);
    b.K = restrict_to_free(assemble_univariate_matrix(space, 1), b.free);
    return b;
}

inline DirectionBlocks make_direction_blocks(const SplineSpace& space, BoundaryVariant variant)
{
    return make_direction_blocks(space, clamp_constraints(space, variant));
}

/// Unconstrained blocks (all coefficients free).
inline DirectionBlocks make_unconstrained_blocks(const SplineSpace& space)
{
    return make_direction_blocks(space, FreeRange{0, space.dim()});
}

/// Parameter-domain operators on the constrained tensor space:
///   Bbar = sum_k M (x) ... (x) B (x) ... (x) M      (B in slot k)
///   Mbar = M (x) ... (x) M
struct ParameterOperators {
    KroneckerSum Bbar;
    KroneckerSum Mbar;
};

inline ParameterOperators parameter_operators(const std::vector<DirectionBlocks>& dirs)
{
    const int d = static_cast<int>(dirs.size());
    std::vector<int> dims(d);
    for (int k = 0; k < d; ++k)
        dims[k] = dirs[k].free.count;
    ParameterOperators ops{KroneckerSum(dims), KroneckerSum(dims)};
    for (int k = 0; k < d; ++k) {
        std::vector<BandedMatrix> factors;
        for (int l = 0; l < d; ++l)
            factors.push_back(l == k ? dirs[l].B : dirs[l].M);
        ops.Bbar.add_term(1.0, std::move(factors));
    }
    std::vector<BandedMatrix> mass;
    for (int l = 0; l < d; ++l)
        mass.push_back(dirs[l].M);
    ops.Mbar.add_term(1.0, std::move(mass));
    return ops;
}

// ---------------------------------------------------------------------------
// Tensor-banded CSR pattern
// ---------------------------------------------------------------------------

namespace detail {

/// CSR skeleton for the tensor-product pattern where row i couples to all
/// columns j with |i_k - j_k| <= band_k in every direction. Column indices
/// come out sorted; scatter positions are computed arithmetically.
struct TensorPattern {
    std::vector<int> dims;
    std::vector<int> bands;
    std::vector<std::int64_t> strides;
    CsrMatrix matrix;

    TensorPattern(std::vector<int> dims_, std::vector<int> bands_)
        : dims(std::move(dims_)), bands(std::move(bands_))
    {
        const int d = static_cast<int>(dims.size());
        strides.assign(d, 1);
        for (int k = d - 2; k >= 0; --k)
            strides[k] = strides[k + 1] * dims[k + 1];
        const std::int64_t rows = strides[0] * dims[0];
        matrix.rows = static_cast<int>(rows);
        matrix.cols = static_cast<int>(rows);
        matrix.offsets.assign(rows + 1, 0);
        std::vector<int> idx(d, 0);
        for (std::int64_t r = 0; r < rows; ++r) {
            std::int64_t width = 1;
            for (int k = 0; k < d; ++k)
                width *= col_hi(k, idx[k]) - col_lo(k, idx[k]) + 1;
            matrix.offsets[r + 1] = matrix.offsets[r] + width;
            bump(idx);
        }
        matrix.indices.resize(matrix.offsets.back());
        matrix.values.assign(matrix.offsets.back(), 0.0);
        std::fill(idx.begin(), idx.end(), 0);
        std::vector<int> col(d, 0);
        for (std::int64_t r = 0; r < rows; ++r) {
            std::int64_t pos = matrix.offsets[r];
            for (int k = 0; k < d; ++k)
                col[k] = col_lo(k, idx[k]);
            while (true) {
                std::int64_t flat = 0;
                for (int k = 0; k < d; ++k)
                    flat += col[k] * strides[k];
                matrix.indices[pos++] = static_cast<int>(flat);
                int k = d - 1;
                for (; k >= 0; --k) {
                    if (++col[k] <= col_hi(k, idx[k]))
                        break;
                    col[k] = col_lo(k, idx[k]);
                }
                if (k < 0)
                    break;
            }
            bump(idx);
        }
    }

    int col_lo(int k, int i) const { return std::max(0, i - bands[k]); }
    int col_hi(int k, int i) const { return std::min(dims[k] - 1, i + bands[k]); }

    void bump(std::vector<int>& idx) const
    {
        for (int k = static_cast<int>(dims.size()) - 1; k >= 0; --k) {
            if (++idx[k] < dims[k])
                return;
            idx[k] = 0;
        }
    }

    /// Entry position of column multi-index `col` within row `row`.
    std::int64_t position(const std::vector<int>& row, std::int64_t row_flat,
                          const std::vector<int>& col) const
    {
        std::int64_t pos = 0;
        for (std::size_t k = 0; k < dims.size(); ++k) {
            const int lo = col_lo(static_cast<int>(k), row[k]);
            const int hi = col_hi(static_cast<int>(k), row[k]);
            pos = pos * (hi - lo + 1) + (col[k] - lo);
        }
        return matrix.offsets[row_flat] + pos;
    }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Physical-domain stiffness and load
// ---------------------------------------------------------------------------

namespace detail {

/// Univariate basis tables per (element, quadrature node): values of the
/// p+1 local functions and their first two derivatives, plus node weights.
struct DirectionTables {
    int p = 0;
    int nq = 0;
    std::vector<double> nodes;    // element-local abscissae, size m * nq
    std::vector<double> weights;  // size m * nq
    // layout: ((e * nq + q) * 3 + deriv) * (p+1) + j
    std::vector<double> basis;

    DirectionTables(const SplineSpace& s, int quad_points) : p(s.degree), nq(quad_points)
    {
        const QuadRule ref = gauss_legendre(nq);
        nodes.resize(static_cast<std::size_t>(s.elements) * nq);
        weights.resize(nodes.size());
        basis.resize(nodes.size() * 3 * (p + 1));
        for (int e = 0; e < s.elements; ++e)
            for (int q = 0; q < nq; ++q) {
                const std::size_t t = static_cast<std::size_t>(e) * nq + q;
                nodes[t] = (e + 0.5 * (1.0 + ref.nodes[q])) * s.h;
                weights[t] = 0.5 * ref.weights[q] * s.h;
                const BasisEval be = eval_basis(s, nodes[t], 2);
                for (int r = 0; r < 3; ++r)
                    for (int j = 0; j <= p; ++j)
                        basis[(t * 3 + r) * (p + 1) + j] = be.values(r, j);
            }
    }

    const double* at(int e, int q, int deriv) const
    {
        return &basis[((static_cast<std::size_t>(e) * nq + q) * 3 + deriv) * (p + 1)];
    }
};

inline std::runtime_error element_error(const std::vector<int>& elem, const std::string& what)
{
    std::ostringstream msg;
    msg << "assembly: element (";
    for (std::size_t k = 0; k < elem.size(); ++k)
        msg << (k ? ", " : "") << elem[k];
    msg << "): " << what;
    return std::runtime_error(msg.str());
}

}  // namespace detail

/// Physical bilaplacian stiffness on the constrained space,
///   B[i][j] = \int  Lap_x phi_i  Lap_x phi_j  |det J| dx^,
/// where the physical Hessian comes from the second-order chain rule. When
/// the geometry is the identity, the matrix is expanded exactly from the
/// univariate factors instead (the quadrature is exact there, so the two
/// routes agree to roundoff).
inline CsrMatrix assemble_physical(const std::vector<DirectionBlocks>& dirs,
                                   const GeometryMap& geometry, int quad_points = 0)
{
    const int d = static_cast<int>(dirs.size());
    if (!geometry.is_identity() && geometry.dim() != d)
        throw std::invalid_argument("assemble_physical: geometry dimension mismatch");

    std::vector<int> dims(d), bands(d);
    for (int k = 0; k < d; ++k) {
        dims[k] = dirs[k].free.count;
        bands[k] = dirs[k].space.degree;
    }
    detail::TensorPattern pattern(dims, bands);

    if (geometry.is_identity()) {
        // Lap u Lap v splits into pure terms B(x)M(x)... and, through
        // integration by parts on the clamped space, cross terms 2 K(x)K.
        std::vector<int> row(d, 0), col(d, 0);
        for (std::int64_t r = 0; r < pattern.matrix.rows; ++r) {
            for (std::int64_t pos = pattern.matrix.offsets[r];
                 pos < pattern.matrix.offsets[r + 1]; ++pos) {
                std::int64_t flat = pattern.matrix.indices[pos];
                for (int k = 0; k < d; ++k) {
                    col[k] = static_cast<int>(flat / pattern.strides[k]);
                    flat %= pattern.strides[k];
                }
                double v = 0.0;
                for (int k = 0; k < d; ++k) {
                    double term = 1.0;
                    for (int l = 0; l < d; ++l)
                        term *= (l == k) ? dirs[l].B(row[l], col[l]) : dirs[l].M(row[l], col[l]);
                    v += term;
                }
                for (int k = 0; k < d; ++k)
                    for (int l = k + 1; l < d; ++l) {
                        double term = 2.0;
                        for (int t = 0; t < d; ++t)
                            term *= (t == k || t == l) ? dirs[t].K(row[t], col[t])
                                                       : dirs[t].M(row[t], col[t]);
                        v += term;
                    }
                pattern.matrix.values[pos] = v;
            }
            pattern.bump(row);
        }
        pattern.matrix.finalize();
        return std::move(pattern.matrix);
    }

    if (quad_points <= 0)
        quad_points = dirs[0].space.degree + 1;
    std::vector<detail::DirectionTables> tables;
    for (int k = 0; k < d; ++k)
        tables.emplace_back(dirs[k].space, quad_points);

    int local = 1;
    for (int k = 0; k < d; ++k)
        local *= dirs[k].space.degree + 1;
    Matrix elem_matrix(local, local);
    std::vector<double> lap(local);
    Vector xhat(d), gamma(d), beta(d);
    Matrix w_metric(d, d);

    std::vector<int> elem(d, 0), q(d, 0), loc(d, 0), gi(d, 0), gj(d, 0);
    const int elements = dirs[0].space.elements;
    for (int k = 1; k < d; ++k)
        if (dirs[k].space.elements != elements)
            throw std::invalid_argument("assemble_physical: per-direction element counts differ");

    while (true) {
        elem_matrix.setZero();
        std::fill(q.begin(), q.end(), 0);
        while (true) {
            double wq = 1.0;
            for (int k = 0; k < d; ++k) {
                const std::size_t t = static_cast<std::size_t>(elem[k]) * tables[k].nq + q[k];
                xhat[k] = tables[k].nodes[t];
                wq *= tables[k].weights[t];
            }
            GeometrySample gs;
            try {
                gs = geometry.eval(xhat);
            } catch (const std::runtime_error& e) {
                throw detail::element_error(elem, e.what());
            }
            const Matrix jinv = gs.jacobian.inverse();
            w_metric.noalias() = jinv * jinv.transpose();
            for (int k = 0; k < d; ++k)
                beta[k] = (w_metric.array() * gs.hessians[k].array()).sum();
            gamma.noalias() = jinv * beta;
            wq *= gs.det;

            // physical Laplacian of each local basis function
            std::fill(loc.begin(), loc.end(), 0);
            for (int i = 0; i < local; ++i) {
                double value = 0.0;
                for (int a = 0; a < d; ++a) {
                    double da = 1.0, dda = 1.0;
                    for (int k = 0; k < d; ++k) {
                        const double* v0 = tables[k].at(elem[k], q[k], 0);
                        const double* v1 = tables[k].at(elem[k], q[k], 1);
                        const double* v2 = tables[k].at(elem[k], q[k], 2);
                        da *= (k == a) ? v1[loc[k]] : v0[loc[k]];
                        dda *= (k == a) ? v2[loc[k]] : v0[loc[k]];
                    }
                    value += w_metric(a, a) * dda - gamma[a] * da;
                    for (int b = a + 1; b < d; ++b) {
                        double dab = 1.0;
                        for (int k = 0; k < d; ++k) {
                            const double* v0 = tables[k].at(elem[k], q[k], 0);
                            const double* v1 = tables[k].at(elem[k], q[k], 1);
                            dab *= (k == a || k == b) ? v1[loc[k]] : v0[loc[k]];
                        }
                        value += 2.0 * w_metric(a, b) * dab;
                    }
                }
                lap[i] = value;
                for (int k = d - 1; k >= 0; --k) {
                    if (++loc[k] <= dirs[k].space.degree)
                        break;
                    loc[k] = 0;
                }
            }
            // column-major: writes the lower triangle, contiguous per column
            for (int i = 0; i < local; ++i) {
                const double s = wq * lap[i];
                double* colp = elem_matrix.data() + static_cast<std::ptrdiff_t>(i) * local;
                for (int j = i; j < local; ++j)
                    colp[j] += s * lap[j];
            }
            int k = d - 1;
            for (; k >= 0; --k) {
                if (++q[k] < tables[k].nq)
                    break;
                q[k] = 0;
            }
            if (k < 0)
                break;
        }

        // scatter the symmetric local matrix; both triangles get the same value
        std::fill(loc.begin(), loc.end(), 0);
        for (int i = 0; i < local; ++i) {
            bool row_free = true;
            std::int64_t row_flat = 0;
            for (int k = 0; k < d; ++k) {
                gi[k] = elem[k] + loc[k] - dirs[k].free.offset;
                if (gi[k] < 0 || gi[k] >= dims[k])
                    row_free = false;
                row_flat += static_cast<std::int64_t>(gi[k]) * pattern.strides[k];
            }
            if (row_free) {
                std::vector<int> locj(d, 0);
                for (int j = 0; j < local; ++j) {
                    bool col_free = true;
                    for (int k = 0; k < d; ++k) {
                        gj[k] = elem[k] + locj[k] - dirs[k].free.offset;
                        if (gj[k] < 0 || gj[k] >= dims[k])
                            col_free = false;
                    }
                    if (col_free) {
                        const double v = (j >= i) ? elem_matrix(j, i) : elem_matrix(i, j);
                        pattern.matrix.values[pattern.position(gi, row_flat, gj)] += v;
                    }
                    for (int k = d - 1; k >= 0; --k) {
                        if (++locj[k] <= dirs[k].space.degree)
                            break;
                        locj[k] = 0;
                    }
                }
            }
            for (int k = d - 1; k >= 0; --k) {
                if (++loc[k] <= dirs[k].space.degree)
                    break;
                loc[k] = 0;
            }
        }

        int k = d - 1;
        for (; k >= 0; --k) {
            if (++elem[k] < elements)
                break;
            elem[k] = 0;
        }
        if (k < 0)
            break;
    }
    return std::move(pattern.matrix);
}

/// Default model load, f(x) = d^2 pi^4 prod_j sin(pi x_j).
inline double model_load(const Vector& x)
{
    const double pi = 3.14159265358979323846;
    const int d = static_cast<int>(x.size());
    double v = d * d * pi * pi * pi * pi;
    for (int k = 0; k < d; ++k)
        v *= std::sin(pi * x[k]);
    return v;
}

/// Load vector f[i] = \int f(G(x^)) phi_i(x^) |det J| dx^ on the free dofs.
/// Pass an empty FreeRange-independent functional via `load` to override f.
inline Vector assemble_rhs(const std::vector<DirectionBlocks>& dirs, const GeometryMap& geometry,
                           const std::function<double(const Vector&)>& load = model_load,
                           int quad_points = 0)
{
    const int d = static_cast<int>(dirs.size());
    if (quad_points <= 0)
        quad_points = dirs[0].space.degree + 1;
    std::vector<detail::DirectionTables> tables;
    std::vector<int> dims(d);
    std::vector<std::int64_t> strides(d, 1);
    for (int k = 0; k < d; ++k) {
        tables.emplace_back(dirs[k].space, quad_points);
        dims[k] = dirs[k].free.count;
    }
    for (int k = d - 2; k >= 0; --k)
        strides[k] = strides[k + 1] * dims[k + 1];

    Vector rhs = Vector::Zero(strides[0] * dims[0]);
    std::vector<int> elem(d, 0), q(d, 0), loc(d, 0);
    const int elements = dirs[0].space.elements;
    Vector xhat(d);
    while (true) {
        std::fill(q.begin(), q.end(), 0);
        while (true) {
            double wq = 1.0;
            for (int k = 0; k < d; ++k) {
                const std::size_t t = static_cast<std::size_t>(elem[k]) * tables[k].nq + q[k];
                xhat[k] = tables[k].nodes[t];
                wq *= tables[k].weights[t];
            }
            GeometrySample gs;
            try {
                gs = geometry.eval(xhat);
            } catch (const std::runtime_error& e) {
                throw detail::element_error(elem, e.what());
            }
            const double fval = wq * gs.det * load(gs.point);
            if (fval != 0.0) {
                std::fill(loc.begin(), loc.end(), 0);
                while (true) {
                    double v = fval;
                    bool free = true;
                    std::int64_t flat = 0;
                    for (int k = 0; k < d; ++k) {
                        v *= tables[k].at(elem[k], q[k], 0)[loc[k]];
                        const int g = elem[k] + loc[k] - dirs[k].free.offset;
                        if (g < 0 || g >= dims[k]) {
                            free = false;
                            break;
                        }
                        flat += static_cast<std::int64_t>(g) * strides[k];
                    }
                    if (free)
                        rhs[flat] += v;
                    int k = d - 1;
                    for (; k >= 0; --k) {
                        if (++loc[k] <= dirs[k].space.degree)
                            break;
                        loc[k] = 0;
                    }
                    if (k < 0)
                        break;
                }
            }
            int k = d - 1;
            for (; k >= 0; --k) {
                if (++q[k] < tables[k].nq)
                    break;
                q[k] = 0;
            }
            if (k < 0)
                break;
        }
        int k = d - 1;
        for (; k >= 0; --k) {
            if (++elem[k] < elements)
                break;
            elem[k] = 0;
        }
        if (k < 0)
            break;
    }
    return rhs;
}

}  // namespace bihmg
