// SPDX-License-Identifier: Apache-2.0
//
// Gauss-Seidel, subspace-corrected mass and hybrid smoothers.

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "bihmg/smoothers.hpp"
#include "bihmg/util.hpp"

using namespace bihmg;

namespace {

Matrix dense_kron(const Matrix& a, const Matrix& b)
{
    Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return k;
}

Matrix operator_to_dense(int n, const std::function<Vector(const Vector&)>& op)
{
    Matrix a(n, n);
    for (int j = 0; j < n; ++j) {
        Vector e = Vector::Zero(n);
        e[j] = 1.0;
        a.col(j) = op(e);
    }
    return a;
}

struct Fixture2d {
    DirectionBlocks blocks;
    UnivariateSplitting split;
    double sigma;

    explicit Fixture2d(int p = 3, int level = 3, double sigma_scale = 144.0)
        : blocks(make_direction_blocks(make_space(p, level), BoundaryVariant::FirstBiharmonic)),
          split(build_splitting(blocks)), sigma(sigma_scale * std::pow(blocks.space.h, -4))
    {
    }

    MassSmoother smoother(double tau = 1.0) const
    {
        return MassSmoother({split, split}, {sigma, sigma}, tau);
    }
};

}  // namespace

// --- mass smoother -------------------------------------------------------------

TEST(MassSmoother, ZeroResidualGivesZeroCorrection)
{
    const Fixture2d fx;
    const MassSmoother sm = fx.smoother();
    const Vector r = Vector::Zero(fx.split.n_free * fx.split.n_free);
    EXPECT_EQ(sm.apply(r).cwiseAbs().maxCoeff(), 0.0);
}

TEST(MassSmoother, Reproduces2dLocalMatrices)
{
    // dense oracle assembled from the four explicit 2D local smoothers
    const Fixture2d fx(3, 3);
    const UnivariateSplitting& s = fx.split;
    const double sigma = fx.sigma;
    const Matrix e[2] = {s.E0.to_dense(), s.E1};
    const Matrix m[2] = {s.M0.to_dense(), s.M1};
    const Matrix b1 = s.B1;

    const Matrix l00 = 2.0 * sigma * dense_kron(m[0], m[0]);
    const Matrix l01 = dense_kron(m[0], sigma * m[1] + b1);
    const Matrix l10 = dense_kron(b1 + sigma * m[1], m[0]);
    const Matrix l11 = dense_kron(b1, m[1]) + dense_kron(m[1], b1);

    const int n = s.n_free * s.n_free;
    Matrix oracle = Matrix::Zero(n, n);
    const auto add = [&](const Matrix& ea, const Matrix& eb, const Matrix& l) {
        const Matrix emb = dense_kron(ea, eb);
        oracle += emb * l.ldlt().solve(emb.transpose());
    };
    add(e[0], e[0], l00);
    add(e[0], e[1], l01);
    add(e[1], e[0], l10);
    add(e[1], e[1], l11);

    const MassSmoother sm = fx.smoother();
    const Matrix impl =
        operator_to_dense(n, [&](const Vector& v) { return sm.apply_unscaled(v); });
    EXPECT_LT((impl - oracle).cwiseAbs().maxCoeff(), 1e-11 * oracle.cwiseAbs().maxCoeff());
}

TEST(MassSmoother, OneDimensionalDenseExpansionOracle)
{
    const DirectionBlocks blocks =
        make_direction_blocks(make_space(4, 3), BoundaryVariant::FirstBiharmonic);
    const UnivariateSplitting s = build_splitting(blocks);
    const double sigma = 144.0 * std::pow(blocks.space.h, -4);
    const MassSmoother sm({s}, {sigma}, 1.0);

    const Matrix e0 = s.E0.to_dense();
    const Matrix l0 = sigma * s.M0.to_dense();
    const Matrix l1 = s.B1;
    Matrix oracle = e0 * l0.ldlt().solve(e0.transpose());
    oracle += s.E1 * l1.ldlt().solve(s.E1.transpose());

    Rng rng(5);
    Vector r(s.n_free);
    for (int i = 0; i < r.size(); ++i)
        r[i] = rng.symmetric();
    EXPECT_LT((sm.apply(r) - oracle * r).cwiseAbs().maxCoeff(),
              1e-11 * (oracle * r).cwiseAbs().maxCoeff());
}

TEST(MassSmoother, InteriorBlockScalesWithDimension)
{
    // the all-interior local matrix is (sum_k sigma) M0 (x) ... (x) M0
    const DirectionBlocks blocks =
        make_direction_blocks(make_space(3, 2), BoundaryVariant::FirstBiharmonic);
    const UnivariateSplitting s = build_splitting(blocks);
    const double sigma = 144.0 * std::pow(blocks.space.h, -4);
    const MassSmoother sm({s, s, s}, {sigma, sigma, sigma}, 1.0);

    // restrict application to the interior subspace and compare
    Rng rng(7);
    Vector c(s.n0 * s.n0 * s.n0);
    for (int i = 0; i < c.size(); ++i)
        c[i] = rng.symmetric();
    const Matrix e0 = s.E0.to_dense();
    const Matrix m0 = s.M0.to_dense();
    const Matrix e000 = dense_kron(dense_kron(e0, e0), e0);
    const Matrix l000 = 3.0 * sigma * dense_kron(dense_kron(m0, m0), m0);

    // interior component of L^-1 (E000 M000-orthogonal part): compare
    // E000' M-weighted... simpler: full dense comparison of the summand
    const Matrix mbar3 = [&] {
        const Matrix m1d = blocks.M.to_dense();
        return dense_kron(dense_kron(m1d, m1d), m1d);
    }();
    (void)mbar3;
    const Vector r = e000 * c;  // arbitrary vector expressible in V000
    // apply only checks the total operator; build the oracle total
    Matrix oracle = e000 * l000.ldlt().solve(e000.transpose());
    const Matrix e1 = s.E1;
    const Matrix m1 = s.M1;
    const Matrix b1 = s.B1;
    for (int mask = 1; mask < 8; ++mask) {
        std::vector<const Matrix*> emb_f, fac;
        Matrix emb = Matrix::Ones(1, 1), loc = Matrix::Ones(1, 1);
        // build embedding
        for (int k = 0; k < 3; ++k)
            emb = dense_kron(emb, (mask & (1 << k)) ? e1 : e0);
        // local matrix: sum over boundary directions of B1 there, M elsewhere
        Matrix lsum = Matrix::Zero(emb.cols(), emb.cols());
        for (int j = 0; j < 3; ++j) {
            if (!(mask & (1 << j)))
                continue;
            Matrix term = Matrix::Ones(1, 1);
            for (int k = 0; k < 3; ++k) {
                const Matrix& f = (mask & (1 << k)) ? ((k == j) ? b1 : m1) : m0;
                term = dense_kron(term, f);
            }
            lsum += term;
        }
        int interiors = 0;
        for (int k = 0; k < 3; ++k)
            if (!(mask & (1 << k)))
                ++interiors;
        Matrix mass_term = Matrix::Ones(1, 1);
        for (int k = 0; k < 3; ++k)
            mass_term = dense_kron(mass_term, (mask & (1 << k)) ? m1 : m0);
        lsum += interiors * sigma * mass_term;
        oracle += emb * lsum.ldlt().solve(emb.transpose());
    }
    EXPECT_LT((sm.apply(r) - oracle * r).cwiseAbs().maxCoeff(),
              1e-10 * (oracle * r).cwiseAbs().maxCoeff());
}

TEST(MassSmoother, LocalMatricesDominateRestrictedBbar)
{
    // with the theory sigma, L_alpha >= Bbar_alpha on small instances
    for (int d : {2, 3}) {
        const DirectionBlocks blocks =
            make_direction_blocks(make_space(3, 2), BoundaryVariant::FirstBiharmonic);
        const UnivariateSplitting s = build_splitting(blocks);
        const double sigma = 144.0 * std::pow(blocks.space.h, -4);
        const Matrix e[2] = {s.E0.to_dense(), s.E1};
        const Matrix m[2] = {s.M0.to_dense(), s.M1};
        const Matrix b[2] = {s.B0, s.B1};

        const Matrix m1d = blocks.M.to_dense();
        const Matrix b1d = blocks.B.to_dense();
        Matrix mbar = Matrix::Ones(1, 1), bbar;
        std::vector<Matrix> bbar_terms;
        for (int j = 0; j < d; ++j) {
            Matrix term = Matrix::Ones(1, 1);
            for (int k = 0; k < d; ++k)
                term = dense_kron(term, (k == j) ? b1d : m1d);
            bbar_terms.push_back(term);
        }
        bbar = bbar_terms[0];
        for (int j = 1; j < d; ++j)
            bbar += bbar_terms[j];

        for (int mask = 0; mask < (1 << d); ++mask) {
            Matrix emb = Matrix::Ones(1, 1);
            Matrix lsum;
            int interiors = 0;
            for (int k = 0; k < d; ++k) {
                emb = dense_kron(emb, e[(mask >> k) & 1 ? 1 : 0]);
                if (!((mask >> k) & 1))
                    ++interiors;
            }
            lsum = Matrix::Zero(emb.cols(), emb.cols());
            for (int j = 0; j < d; ++j) {
                if (!((mask >> j) & 1))
                    continue;
                Matrix term = Matrix::Ones(1, 1);
                for (int k = 0; k < d; ++k) {
                    const int ak = (mask >> k) & 1;
                    term = dense_kron(term, (k == j) ? b[1] : m[ak]);
                }
                lsum += term;
            }
            Matrix mass_term = Matrix::Ones(1, 1);
            for (int k = 0; k < d; ++k)
                mass_term = dense_kron(mass_term, m[(mask >> k) & 1]);
            lsum += interiors * sigma * mass_term;

            const Matrix bbar_alpha = emb.transpose() * bbar * emb;
            const Eigen::SelfAdjointEigenSolver<Matrix> es(lsum - bbar_alpha);
            EXPECT_GE(es.eigenvalues().minCoeff(),
                      -1e-9 * lsum.cwiseAbs().maxCoeff())
                << "d=" << d << " mask=" << mask;
        }
    }
}

TEST(MassSmoother, SymmetricAndPositive)
{
    const Fixture2d fx(3, 3);
    const MassSmoother sm = fx.smoother();
    Rng rng(11);
    const int n = fx.split.n_free * fx.split.n_free;
    Vector x(n), y(n);
    for (int i = 0; i < n; ++i) {
        x[i] = rng.symmetric();
        y[i] = rng.symmetric();
    }
    EXPECT_NEAR(y.dot(sm.apply(x)), x.dot(sm.apply(y)),
                1e-12 * std::abs(x.dot(sm.apply(y))));
    EXPECT_GT(x.dot(sm.apply(x)), 0.0);
}

// --- Gauss-Seidel ---------------------------------------------------------------

TEST(GaussSeidel, SolvesOneByOneSystemExactly)
{
    CsrMatrix a;
    a.rows = a.cols = 1;
    a.offsets = {0, 1};
    a.indices = {0};
    a.values = {2.5};
    const GaussSeidelSmoother gs(a);
    Vector u(1);
    u[0] = 7.0;
    Vector rhs(1);
    rhs[0] = 5.0;
    gs.symmetric_step(u, rhs);
    EXPECT_DOUBLE_EQ(u[0], 2.0);
}

TEST(GaussSeidel, MatchesDenseErrorPropagation)
{
    const SplineSpace s = make_space(3, 2);
    std::vector<DirectionBlocks> dirs(2, make_direction_blocks(s, BoundaryVariant::FirstBiharmonic));
    const CsrMatrix bh = assemble_physical(dirs, GeometryMap::identity(2));
    const Matrix a = bh.to_dense();
    const int n = bh.rows;

    const Matrix d = a.diagonal().asDiagonal();
    const Matrix c = (-a).triangularView<Eigen::StrictlyLower>();
    const Matrix l = (d - c) * d.inverse() * (d - c).transpose();

    Rng rng(13);
    Vector u(n), rhs(n);
    for (int i = 0; i < n; ++i) {
        u[i] = rng.symmetric();
        rhs[i] = rng.symmetric();
    }
    Vector expected = u + l.ldlt().solve(rhs - a * u);

    const GaussSeidelSmoother gs(bh);
    Vector actual = u;
    gs.symmetric_step(actual, rhs);
    EXPECT_LT((actual - expected).cwiseAbs().maxCoeff(), 1e-12 * expected.cwiseAbs().maxCoeff());
}

TEST(GaussSeidel, DominatesSystemMatrix)
{
    // lambda_min(L - B) >= -1e-9: the symmetric GS operator bounds B from above
    for (int d : {2, 3}) {
        const SplineSpace s = make_space(3, d == 2 ? 3 : 2);
        std::vector<DirectionBlocks> dirs(d, make_direction_blocks(s, BoundaryVariant::FirstBiharmonic));
        const CsrMatrix bh = assemble_physical(dirs, GeometryMap::identity(d));
        const Matrix a = bh.to_dense();
        const Matrix dm = a.diagonal().asDiagonal();
        const Matrix c = (-a).triangularView<Eigen::StrictlyLower>();
        const Matrix l = (dm - c) * dm.inverse() * (dm - c).transpose();
        const Eigen::SelfAdjointEigenSolver<Matrix> es(l - a);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9 * a.cwiseAbs().maxCoeff());
    }
}

TEST(GaussSeidel, RejectsZeroDiagonal)
{
    CsrMatrix a;
    a.rows = a.cols = 2;
    a.offsets = {0, 1, 2};
    a.indices = {1, 0};
    a.values = {1.0, 1.0};
    EXPECT_THROW(GaussSeidelSmoother{a}, std::runtime_error);
}

// --- hybrid -----------------------------------------------------------------------

TEST(Hybrid, ZeroMassDampingReducesToSymmetricGaussSeidel)
{
    const Fixture2d fx(3, 3);
    std::vector<DirectionBlocks> dirs(2, fx.blocks);
    const CsrMatrix bh = assemble_physical(dirs, GeometryMap::identity(2));
    const HybridSmoother hybrid(bh, fx.smoother(0.0));
    const GaussSeidelSmoother gs(bh);

    Rng rng(17);
    const int n = bh.rows;
    Vector u(n), rhs(n);
    for (int i = 0; i < n; ++i) {
        u[i] = rng.symmetric();
        rhs[i] = rng.symmetric();
    }
    Vector u_hybrid = u, u_gs = u;
    hybrid.step(u_hybrid, rhs);
    gs.symmetric_step(u_gs, rhs);
    EXPECT_EQ((u_hybrid - u_gs).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Hybrid, InducedPreconditionerIsSymmetric)
{
    const Fixture2d fx(3, 2);
    std::vector<DirectionBlocks> dirs(2, fx.blocks);
    const CsrMatrix bh = assemble_physical(dirs, GeometryMap::identity(2));
    const HybridSmoother hybrid(bh, fx.smoother(0.125));
    const int n = bh.rows;
    const Matrix p = operator_to_dense(n, [&](const Vector& rhs) {
        Vector u = Vector::Zero(n);
        hybrid.step(u, rhs);
        return u;
    });
    EXPECT_LT((p - p.transpose()).cwiseAbs().maxCoeff(), 1e-12 * p.cwiseAbs().maxCoeff());
}
