// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "bihmg/assembly.hpp"
#include "bihmg/multigrid.hpp"
#include "bihmg/smoothers.hpp"
#include "bihmg/splitting.hpp"
#include "bihmg/util.hpp"

namespace bihmg {

/// Result of one numerical inequality check: measured extremal Rayleigh
/// quotients against a stated two-sided bound (NaN marks an open side).
struct InequalityReport {
    std::string statement;
    int d = 0;
    int p = 0;
    int level = 0;
    double measured_min = 0.0;
    double measured_max = 0.0;
    double bound_low = std::nan("");
    double bound_high = std::nan("");
    bool pass = false;
};

namespace detail {

inline Matrix dense_kron(const Matrix& a, const Matrix& b)
{
    Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return k;
}

inline std::string json_number(double v)
{
    if (std::isnan(v))
        return "null";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace detail

inline void write_report_line(std::ostream& out, const InequalityReport& r)
{
    out << "{\"statement\":\"" << r.statement << "\",\"params\":{\"d\":" << r.d
        << ",\"p\":" << r.p << ",\"level\":" << r.level << "},\"measured\":["
        << detail::json_number(r.measured_min) << "," << detail::json_number(r.measured_max)
        << "],\"bound\":[" << detail::json_number(r.bound_low) << ","
        << detail::json_number(r.bound_high) << "],\"pass\":" << (r.pass ? "true" : "false")
        << "}\n";
}

/// Generalized eigenvalues of (B_h, Bbar_h) on the identity geometry lie in
/// [1, d]. Dense eigensolve, desk scale only.
inline InequalityReport check_spectral_equivalence(int d, int p, int level,
                                                   double bound_scale = 1.0)
{
    InequalityReport rep;
    rep.statement = "spectral-equivalence";
    rep.d = d;
    rep.p = p;
    rep.level = level;
    std::vector<DirectionBlocks> dirs(
        d, make_direction_blocks(make_space(p, level), BoundaryVariant::FirstBiharmonic));
    const CsrMatrix bh = assemble_physical(dirs, GeometryMap::identity(d));
    const Matrix bbar = parameter_operators(dirs).Bbar.to_dense();
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(bh.to_dense(), bbar);
    rep.measured_min = es.eigenvalues().minCoeff();
    rep.measured_max = es.eigenvalues().maxCoeff();
    rep.bound_low = 1.0;
    rep.bound_high = static_cast<double>(d) * bound_scale;
    rep.pass = rep.measured_min >= rep.bound_low - 1e-8 &&
               rep.measured_max <= rep.bound_high + 1e-8;
    return rep;
}

/// lambda_max(M0^-1 B0) <= 144 h^-4 on the interior subspace.
inline InequalityReport check_inverse_inequality(int p, int level, double bound_scale = 1.0)
{
    InequalityReport rep;
    rep.statement = "inverse-inequality";
    rep.d = 1;
    rep.p = p;
    rep.level = level;
    const DirectionBlocks blocks =
        make_direction_blocks(make_space(p, level), BoundaryVariant::FirstBiharmonic);
    const UnivariateSplitting s = build_splitting(blocks);
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(s.B0, s.M0.to_dense());
    const double h4 = std::pow(s.h, 4);
    rep.measured_min = es.eigenvalues().minCoeff() * h4;
    rep.measured_max = es.eigenvalues().maxCoeff() * h4;
    rep.bound_high = 144.0 * bound_scale;
    rep.pass = rep.measured_max <= rep.bound_high * (1 + 1e-6);
    return rep;
}

/// L2 Pythagoras over the 2^d subspaces plus the measured two-sided bracket
/// of the reduced-seminorm splitting, recorded as generalized eigenvalues of
/// (sum_alpha P_alpha' Bbar P_alpha, Bbar).
struct SplittingStabilityReport {
    InequalityReport l2_identity;
    InequalityReport seminorm_bracket;
};

inline SplittingStabilityReport check_splitting_stability(int d, int p, int level,
                                                          double bound_scale = 1.0)
{
    SplittingStabilityReport out;
    std::vector<DirectionBlocks> dirs(
        d, make_direction_blocks(make_space(p, level), BoundaryVariant::FirstBiharmonic));
    const UnivariateSplitting s = build_splitting(dirs[0]);
    const Matrix e1d[2] = {s.E0.to_dense(), s.E1};
    const Matrix m1d = dirs[0].M.to_dense();

    Matrix mbar = Matrix::Ones(1, 1);
    for (int k = 0; k < d; ++k)
        mbar = detail::dense_kron(mbar, m1d);
    const Matrix bbar = parameter_operators(dirs).Bbar.to_dense();
    const std::int64_t n = mbar.rows();

    // L2 identity on random vectors
    Rng rng(1000 + 17 * p + level);
    double worst = 0.0;
    Matrix quad_sum = Matrix::Zero(n, n);
    std::vector<Matrix> projectors;
    for (int mask = 0; mask < (1 << d); ++mask) {
        Matrix emb = Matrix::Ones(1, 1);
        for (int k = 0; k < d; ++k)
            emb = detail::dense_kron(emb, e1d[(mask >> k) & 1]);
        const Matrix gram = emb.transpose() * mbar * emb;
        const Matrix proj = emb * gram.ldlt().solve(emb.transpose() * mbar);
        projectors.push_back(proj);
        quad_sum += proj.transpose() * bbar * proj;
    }
    for (int t = 0; t < 20; ++t) {
        Vector u(n);
        for (int i = 0; i < n; ++i)
            u[i] = rng.symmetric();
        const double total = u.dot(mbar * u);
        double parts = 0.0;
        for (const Matrix& proj : projectors) {
            const Vector pu = proj * u;
            parts += pu.dot(mbar * pu);
        }
        worst = std::max(worst, std::abs(parts - total) / total);
    }
    out.l2_identity.statement = "splitting-l2-identity";
    out.l2_identity.d = d;
    out.l2_identity.p = p;
    out.l2_identity.level = level;
    out.l2_identity.measured_max = worst;
    out.l2_identity.bound_high = 1e-10 * bound_scale;
    out.l2_identity.pass = worst <= out.l2_identity.bound_high;

    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(0.5 * (quad_sum + quad_sum.transpose()),
                                                        bbar);
    out.seminorm_bracket.statement = "splitting-seminorm-bracket";
    out.seminorm_bracket.d = d;
    out.seminorm_bracket.p = p;
    out.seminorm_bracket.level = level;
    out.seminorm_bracket.measured_min = es.eigenvalues().minCoeff();
    out.seminorm_bracket.measured_max = es.eigenvalues().maxCoeff();
    // recorded bracket; pass means it is a genuine two-sided equivalence
    out.seminorm_bracket.pass = out.seminorm_bracket.measured_min > 0.0 &&
                                std::isfinite(out.seminorm_bracket.measured_max);
    return out;
}

/// lambda_min(L_h - B_h) >= -1e-9 for the symmetric Gauss-Seidel operator.
inline InequalityReport check_gs_pinch(int d, int p, int level, double bound_scale = 1.0)
{
    InequalityReport rep;
    rep.statement = "gauss-seidel-pinch";
    rep.d = d;
    rep.p = p;
    rep.level = level;
    std::vector<DirectionBlocks> dirs(
        d, make_direction_blocks(make_space(p, level), BoundaryVariant::FirstBiharmonic));
    const Matrix a = assemble_physical(dirs, GeometryMap::identity(d)).to_dense();
    const Matrix dm = a.diagonal().asDiagonal();
    const Matrix c = (-a).triangularView<Eigen::StrictlyLower>();
    const Matrix l = (dm - c) * dm.inverse() * (dm - c).transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> es(l - a);
    rep.measured_min = es.eigenvalues().minCoeff() / a.cwiseAbs().maxCoeff();
    rep.measured_max = es.eigenvalues().maxCoeff() / a.cwiseAbs().maxCoeff();
    rep.bound_low = -1e-9 * bound_scale;
    rep.pass = rep.measured_min >= rep.bound_low;
    return rep;
}

/// Measured constants of c^-1 Bbar <= L_h <= c (Bbar + h^-4 Mbar) for the
/// subspace-corrected mass smoother (recorded, not bounded a priori).
inline InequalityReport check_mass_pinch(int d, int p, int level)
{
    InequalityReport rep;
    rep.statement = "mass-smoother-pinch";
    rep.d = d;
    rep.p = p;
    rep.level = level;
    SolverConfig cfg;
    cfg.dim = d;
    cfg.degree = p;
    cfg.level = level;
    cfg.level_min = level;
    cfg.geometry = GeometryMap::identity(d);
    cfg.smoother = SmootherKind::Mass;
    cfg.sigma.kind = SigmaRule::Kind::Theory;
    const MultigridHierarchy h(cfg);
    const detail::MgLevel& lev = h.level(0);
    const std::int64_t n = h.dofs();
    Matrix linv(n, n);
    for (int j = 0; j < n; ++j) {
        Vector e = Vector::Zero(n);
        e[j] = 1.0;
        linv.col(j) = lev.mass->apply_unscaled(e);
    }
    const Matrix lmat = linv.inverse();
    const Matrix lsym = 0.5 * (lmat + lmat.transpose());
    const Matrix bbar = lev.ops.Bbar.to_dense();
    const Matrix mbar = lev.ops.Mbar.to_dense();
    const double h4 = std::pow(make_space(p, level).h, -4);

    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> lower(bbar, lsym);
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> upper(lsym,
                                                           Matrix(bbar + h4 * mbar));
    rep.measured_min = lower.eigenvalues().maxCoeff();  // c of the lower bound
    rep.measured_max = upper.eigenvalues().maxCoeff();  // c of the upper bound
    rep.pass = rep.measured_min > 0.0 && rep.measured_max > 0.0 &&
               std::isfinite(rep.measured_min) && std::isfinite(rep.measured_max);
    return rep;
}

// ---------------------------------------------------------------------------
// Approximation order of the 1D H2 projection
// ---------------------------------------------------------------------------

namespace detail {

/// u(x) = x^2 (1-x)^2 sin(7x) and its derivatives up to order four.
inline double test_function(double x, int deriv)
{
    const double g[5] = {x * x * (1 - x) * (1 - x),       // g
                         2 * x - 6 * x * x + 4 * x * x * x,  // g'
                         2 - 12 * x + 12 * x * x,            // g''
                         -12 + 24 * x,                       // g'''
                         24.0};                              // g''''
    const auto s = [&](int k) {
        const double arg = 7 * x + k * 1.57079632679489662;  // sin(7x + k pi/2)
        return std::pow(7.0, k) * std::sin(arg);
    };
    static const int binom[5][5] = {
        {1, 0, 0, 0, 0}, {1, 1, 0, 0, 0}, {1, 2, 1, 0, 0}, {1, 3, 3, 1, 0}, {1, 4, 6, 4, 1}};
    double v = 0.0;
    for (int k = 0; k <= deriv; ++k)
        v += binom[deriv][k] * g[k] * s(deriv - k);
    return v;
}

}  // namespace detail

struct ProjectionOrderReport {
    int p = 0;
    std::vector<int> levels;
    std::vector<double> h2_errors;   // |u - Pi u|_H2 per level
    std::vector<double> l2_errors;   // ||u - Pi u||_L2 per level
    std::vector<double> h2_ratios;   // successive error quotients
    double u_h2 = 0.0;               // |u|_H2
    double u_h4 = 0.0;               // |u|_H4
    bool pass = false;
};

/// H2-Galerkin projection of u(x) = x^2(1-x)^2 sin(7x) onto the clamped
/// spline space; the error must contract at second order in h, with the
/// stated constants.
inline ProjectionOrderReport check_projection_order(int p, int level_lo = 3, int level_hi = 7)
{
    ProjectionOrderReport rep;
    rep.p = p;
    const int nq = 20;

    // reference seminorms of u by fine quadrature
    {
        const QuadRule ref = gauss_legendre(nq);
        const int cells = 256;
        double h2 = 0.0, h4 = 0.0;
        for (int e = 0; e < cells; ++e)
            for (int q = 0; q < nq; ++q) {
                const double x = (e + 0.5 * (1 + ref.nodes[q])) / cells;
                const double w = 0.5 * ref.weights[q] / cells;
                h2 += w * detail::test_function(x, 2) * detail::test_function(x, 2);
                h4 += w * detail::test_function(x, 4) * detail::test_function(x, 4);
            }
        rep.u_h2 = std::sqrt(h2);
        rep.u_h4 = std::sqrt(h4);
    }

    for (int level = level_lo; level <= level_hi; ++level) {
        const SplineSpace space = make_space(p, level);
        const FreeRange free = clamp_constraints(space, BoundaryVariant::FirstBiharmonic);
        const BandedMatrix b =
            restrict_to_free(assemble_univariate_matrix(space, 2), free);
        const QuadRule ref = gauss_legendre(nq);
        Vector rhs = Vector::Zero(free.count);
        for (int e = 0; e < space.elements; ++e)
            for (int q = 0; q < ref.size(); ++q) {
                const double x = (e + 0.5 * (1 + ref.nodes[q])) * space.h;
                const double w = 0.5 * ref.weights[q] * space.h;
                const BasisEval be = eval_basis(space, x, 2);
                const double u2 = detail::test_function(x, 2);
                for (int j = 0; j <= p; ++j) {
                    const int fj = be.anchor + j - free.offset;
                    if (fj >= 0 && fj < free.count)
                        rhs[fj] += w * u2 * be.values(2, j);
                }
            }
        const BandedCholesky chol(b);
        const Vector coeffs = chol.solve(rhs);

        // both error norms by direct quadrature of the pointwise difference
        Vector full = Vector::Zero(space.dim());
        for (int i = 0; i < free.count; ++i)
            full[free.offset + i] = coeffs[i];
        double l2 = 0.0, h2 = 0.0;
        for (int e = 0; e < space.elements; ++e)
            for (int q = 0; q < ref.size(); ++q) {
                const double x = (e + 0.5 * (1 + ref.nodes[q])) * space.h;
                const double w = 0.5 * ref.weights[q] * space.h;
                const double diff0 = detail::test_function(x, 0) - eval_spline(space, full, x);
                const double diff2 =
                    detail::test_function(x, 2) - eval_spline(space, full, x, 2);
                l2 += w * diff0 * diff0;
                h2 += w * diff2 * diff2;
            }
        rep.h2_errors.push_back(std::sqrt(h2));
        rep.l2_errors.push_back(std::sqrt(l2));
        rep.levels.push_back(level);
    }

    // pass means: order at least two in both norms and the stated constant
    // envelopes. For p > 3 the smooth test function superconverges (the error
    // contracts like h^(p-1)), which still satisfies the bounds.
    rep.pass = true;
    for (std::size_t i = 0; i + 1 < rep.h2_errors.size(); ++i) {
        rep.h2_ratios.push_back(rep.h2_errors[i] / rep.h2_errors[i + 1]);
        if (rep.h2_ratios.back() < 3.5)
            rep.pass = false;
    }
    for (std::size_t i = 0; i + 1 < rep.l2_errors.size(); ++i)
        if (rep.l2_errors[i] / rep.l2_errors[i + 1] < 3.5)
            rep.pass = false;
    for (std::size_t i = 0; i < rep.levels.size(); ++i) {
        const double h = 1.0 / (1 << rep.levels[i]);
        if (rep.h2_errors[i] > 2.0 * h * h * rep.u_h4)
            rep.pass = false;
        if (rep.l2_errors[i] > 2.0 * h * h * rep.u_h2)
            rep.pass = false;
    }
    return rep;
}

}  // namespace bihmg
