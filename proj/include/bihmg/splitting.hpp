// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "bihmg/assembly.hpp"
#include "bihmg/linalg.hpp"

namespace bihmg {

/// L2-orthogonal splitting of the constrained univariate space into the
/// interior part V0 (even boundary derivatives up to order p-1 vanish) and
/// its thin complement V1, both expressed in the free-dof basis.
///
/// E0 is the nullspace of the boundary-derivative functionals, chosen as
/// identity-plus-small-boundary-blocks, so only O(p) columns per end are
/// non-trivial. E1 spans M^-1 times the row space of the functionals and is
/// M-orthonormal; the complement of a nullspace within the space is the
/// M^-1-image of the row space, so the splitting is exact.
struct UnivariateSplitting {
    int n_free = 0;
    int n0 = 0;
    int n1 = 0;
    double h = 0.0;
    int degree = 0;

    CsrMatrix E0;   // n_free x n0
    CsrMatrix E0t;  // transpose
    Matrix E1;      // n_free x n1, M-orthonormal columns
    Matrix E1t;

    BandedMatrix M0;  // E0' M E0
    Matrix B0;        // E0' B E0 (dense; used by the verification eigensolves)
    Matrix M1;        // E1' M E1 (= identity by construction)
    Matrix B1;        // E1' B E1

    BandedCholesky M0_chol;
};

/// Builds the splitting from constrained univariate blocks. The constraint
/// rows are the boundary functionals u^(2l)(0), u^(2l)(1) for 2 <= 2l < p,
/// evaluated on the free basis (value and slope are already zero there).
inline UnivariateSplitting build_splitting(const DirectionBlocks& blocks)
{
    const SplineSpace& space = blocks.space;
    const int p = space.degree;
    if (p < 3)
        throw std::invalid_argument("build_splitting: degree >= 3 required");
    const int nf = blocks.free.count;
    const int per_end = (p - 1) / 2;  // constraints u^(2l) = 0 for 2 <= 2l < p
    const int n1 = 2 * per_end;
    // columns per end touched by the functionals: basis functions with index
    // <= p-1 have a nonzero derivative of order <= p-1 at the endpoint
    const int k_end = p - blocks.free.offset;
    if (nf < 2 * k_end || nf <= n1)
        throw std::invalid_argument(
            "build_splitting: space too coarse, boundary blocks overlap");

    UnivariateSplitting sp;
    sp.n_free = nf;
    sp.n1 = n1;
    sp.n0 = nf - n1;
    sp.h = space.h;
    sp.degree = p;

    // constraint rows; row scaling does not change the splitting, so each
    // functional is normalized (derivative magnitudes grow like h^-2l)
    Matrix c = Matrix::Zero(n1, nf);
    const BasisEval at0 = eval_basis(space, 0.0, p - 1);
    const BasisEval at1 = eval_basis(space, 1.0, p - 1);
    for (int l = 1; l <= per_end; ++l) {
        for (int j = 0; j <= p; ++j) {
            const int f0 = at0.anchor + j - blocks.free.offset;
            if (f0 >= 0 && f0 < nf)
                c(l - 1, f0) = at0.values(2 * l, j);
            const int f1 = at1.anchor + j - blocks.free.offset;
            if (f1 >= 0 && f1 < nf)
                c(per_end + l - 1, f1) = at1.values(2 * l, j);
        }
    }
    for (int r = 0; r < n1; ++r) {
        const double norm = c.row(r).norm();
        if (!(norm > 0.0))
            throw std::runtime_error("build_splitting: vanishing boundary functional");
        c.row(r) /= norm;
    }

    // E0: nullspace of the two small boundary blocks, identity in between
    const Matrix c_left = c.block(0, 0, per_end, k_end);
    const Matrix c_right = c.block(per_end, nf - k_end, per_end, k_end);
    Eigen::FullPivLU<Matrix> lu_left(c_left), lu_right(c_right);
    if (lu_left.rank() != per_end || lu_right.rank() != per_end)
        throw std::runtime_error("build_splitting: boundary functionals are rank deficient");

    Matrix e0 = Matrix::Zero(nf, sp.n0);
    const int nl = k_end - per_end;  // kernel() yields a zero column when nl = 0
    if (nl > 0) {
        e0.block(0, 0, k_end, nl) = lu_left.kernel();
        e0.block(nf - k_end, sp.n0 - nl, k_end, nl) = lu_right.kernel();
    }
    for (int t = k_end; t < nf - k_end; ++t)
        e0(t, nl + t - k_end) = 1.0;
    sp.E0 = CsrMatrix::from_dense(e0, 0.0);
    sp.E0t = sp.E0.transposed();

    // E1 = M^-1 C', M-orthonormalized through the Cholesky factor of the
    // Gram matrix C M^-1 C'
    const BandedCholesky m_free(blocks.M);
    Matrix x(nf, n1);
    for (int j = 0; j < n1; ++j) {
        Vector col = c.row(j).transpose();
        m_free.solve_in_place(col.data());
        x.col(j) = col;
    }
    const Matrix gram = c * x;
    Eigen::LLT<Matrix> gram_llt(gram);
    if (gram_llt.info() != Eigen::Success)
        throw std::runtime_error("build_splitting: complement Gram matrix is not SPD");
    const Matrix gram_u = gram_llt.matrixU();
    sp.E1 = gram_u.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(x);
    sp.E1t = sp.E1.transpose();

    const Matrix m_dense = blocks.M.to_dense();
    const Matrix b_dense = blocks.B.to_dense();
    const Matrix m0_dense = e0.transpose() * m_dense * e0;
    sp.B0 = e0.transpose() * b_dense * e0;
    sp.M1 = sp.E1t * m_dense * sp.E1;
    sp.B1 = sp.E1t * b_dense * sp.E1;

    const int bw = std::min(sp.n0 - 1, 2 * p);
    sp.M0 = BandedMatrix::from_dense(m0_dense, bw);
    for (int i = 0; i < sp.n0; ++i)
        for (int j = 0; j < sp.n0; ++j)
            if (std::abs(i - j) > bw && std::abs(m0_dense(i, j)) > 1e-10)
                throw std::runtime_error("build_splitting: M0 band estimate violated");
    sp.M0_chol = BandedCholesky(sp.M0);
    return sp;
}

/// Smallest dyadic level at which the splitting is well defined for this
/// degree: the two boundary blocks must act on disjoint columns.
inline int min_splitting_level(int degree, BoundaryVariant variant)
{
    const int offset = (variant == BoundaryVariant::FirstBiharmonic) ? 2 : 1;
    const int per_end = (degree - 1) / 2;
    const int k_end = degree - offset;
    // need n_free = m + degree - 2*offset >= max(2*k_end, 2*per_end + 1)
    const int need = std::max(2 * k_end, 2 * per_end + 1) - degree + 2 * offset;
    int level = 0;
    while ((1 << level) < std::max(need, 2))
        ++level;
    return level;
}

}  // namespace bihmg
