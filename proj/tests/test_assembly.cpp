// SPDX-License-Identifier: Apache-2.0
//
// Galerkin assembly: univariate systems, Kronecker operators, the physical
// bilaplacian stiffness and the load vector.

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "bihmg/assembly.hpp"
#include "bihmg/util.hpp"

using namespace bihmg;

namespace {

constexpr double kPi = 3.14159265358979323846;

// independent dense quadrature assembly of  sum_k int d2_k u d2_k v  (oracle)
Matrix direct_bbar_2d(const DirectionBlocks& bx, const DirectionBlocks& by)
{
    const SplineSpace& sx = bx.space;
    const SplineSpace& sy = by.space;
    const int n = bx.free.count * by.free.count;
    Matrix a = Matrix::Zero(n, n);
    const QuadRule qx = gauss_legendre(sx.degree + 1);
    const QuadRule qy = gauss_legendre(sy.degree + 1);
    for (int ex = 0; ex < sx.elements; ++ex)
        for (int ey = 0; ey < sy.elements; ++ey)
            for (int i = 0; i < qx.size(); ++i)
                for (int j = 0; j < qy.size(); ++j) {
                    const double x = (ex + 0.5 * (1 + qx.nodes[i])) * sx.h;
                    const double y = (ey + 0.5 * (1 + qy.nodes[j])) * sy.h;
                    const double w =
                        0.25 * qx.weights[i] * qy.weights[j] * sx.h * sy.h;
                    const BasisEval bex = eval_basis(sx, x, 2);
                    const BasisEval bey = eval_basis(sy, y, 2);
                    std::vector<double> dxx, dyy;
                    std::vector<int> idx;
                    for (int ax = 0; ax <= sx.degree; ++ax)
                        for (int ay = 0; ay <= sy.degree; ++ay) {
                            const int fx = bex.anchor + ax - bx.free.offset;
                            const int fy = bey.anchor + ay - by.free.offset;
                            if (fx < 0 || fx >= bx.free.count || fy < 0 || fy >= by.free.count)
                                continue;
                            idx.push_back(fx * by.free.count + fy);
                            dxx.push_back(bex.values(2, ax) * bey.values(0, ay));
                            dyy.push_back(bex.values(0, ax) * bey.values(2, ay));
                        }
                    for (std::size_t s = 0; s < idx.size(); ++s)
                        for (std::size_t t = 0; t < idx.size(); ++t)
                            a(idx[s], idx[t]) += w * (dxx[s] * dxx[t] + dyy[s] * dyy[t]);
                }
    return a;
}

// independent dense quadrature assembly of  int Lap u Lap v  on (0,1)^2
Matrix direct_bilaplacian_2d(const DirectionBlocks& bx, const DirectionBlocks& by)
{
    const SplineSpace& sx = bx.space;
    const SplineSpace& sy = by.space;
    const int n = bx.free.count * by.free.count;
    Matrix a = Matrix::Zero(n, n);
    const QuadRule qx = gauss_legendre(sx.degree + 1);
    const QuadRule qy = gauss_legendre(sy.degree + 1);
    for (int ex = 0; ex < sx.elements; ++ex)
        for (int ey = 0; ey < sy.elements; ++ey)
            for (int i = 0; i < qx.size(); ++i)
                for (int j = 0; j < qy.size(); ++j) {
                    const double x = (ex + 0.5 * (1 + qx.nodes[i])) * sx.h;
                    const double y = (ey + 0.5 * (1 + qy.nodes[j])) * sy.h;
                    const double w =
                        0.25 * qx.weights[i] * qy.weights[j] * sx.h * sy.h;
                    const BasisEval bex = eval_basis(sx, x, 2);
                    const BasisEval bey = eval_basis(sy, y, 2);
                    std::vector<double> lap;
                    std::vector<int> idx;
                    for (int ax = 0; ax <= sx.degree; ++ax)
                        for (int ay = 0; ay <= sy.degree; ++ay) {
                            const int fx = bex.anchor + ax - bx.free.offset;
                            const int fy = bey.anchor + ay - by.free.offset;
                            if (fx < 0 || fx >= bx.free.count || fy < 0 || fy >= by.free.count)
                                continue;
                            idx.push_back(fx * by.free.count + fy);
                            lap.push_back(bex.values(2, ax) * bey.values(0, ay) +
                                          bex.values(0, ax) * bey.values(2, ay));
                        }
                    for (std::size_t s = 0; s < idx.size(); ++s)
                        for (std::size_t t = 0; t < idx.size(); ++t)
                            a(idx[s], idx[t]) += w * lap[s] * lap[t];
                }
    return a;
}

GeometryMap handmade_identity_2d()
{
    // identity control net without the identity fast-path flag
    std::vector<SplineSpace> spaces{make_uniform_space(1, 1), make_uniform_space(1, 1)};
    std::vector<Vector> comps(2, Vector::Zero(4));
    comps[0] << 0, 0, 1, 1;
    comps[1] << 0, 1, 0, 1;
    return GeometryMap(std::move(spaces), std::move(comps), Vector());
}

}  // namespace

TEST(UnivariateAssembly, HatMassMatrixExact)
{
    const UnivariateSystem s = assemble_univariate(make_uniform_space(1, 1));
    EXPECT_NEAR(s.M(0, 0), 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(s.M(0, 1), 1.0 / 6.0, 1e-15);
    EXPECT_NEAR(s.M(1, 1), 1.0 / 3.0, 1e-15);
}

TEST(UnivariateAssembly, PiecewiseLinearBendingVanishes)
{
    for (int m : {1, 4, 16}) {
        const UnivariateSystem s = assemble_univariate(make_uniform_space(1, m));
        EXPECT_EQ(s.B.to_dense().cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(UnivariateAssembly, MassIntegratesToDomainLength)
{
    const UnivariateSystem s = assemble_univariate(make_space(3, 3));
    const Vector ones = Vector::Ones(s.space.dim());
    EXPECT_NEAR(ones.dot(s.M.apply(ones)), 1.0, 1e-14);
}

TEST(Constraints, CountsAndErrors)
{
    const SplineSpace s = make_space(3, 5);
    const FreeRange first = clamp_constraints(s, BoundaryVariant::FirstBiharmonic);
    EXPECT_EQ(first.offset, 2);
    EXPECT_EQ(first.count, 31);
    EXPECT_EQ(static_cast<std::int64_t>(first.count) * first.count, 961);

    const FreeRange second = clamp_constraints(s, BoundaryVariant::SecondBiharmonic);
    EXPECT_EQ(second.offset, 1);
    EXPECT_EQ(second.count, 33);

    EXPECT_THROW(clamp_constraints(make_space(1, 3), BoundaryVariant::FirstBiharmonic),
                 std::invalid_argument);
}

TEST(Constraints, EndpointDuality)
{
    const SplineSpace s = make_space(4, 3);
    const FreeRange fr = clamp_constraints(s, BoundaryVariant::FirstBiharmonic);
    Rng rng(8);
    Vector full = Vector::Zero(s.dim());
    for (int i = 0; i < fr.count; ++i)
        full[fr.offset + i] = rng.symmetric();
    for (double x : {0.0, 1.0}) {
        EXPECT_NEAR(eval_spline(s, full, x, 0), 0.0, 1e-14);
        EXPECT_NEAR(eval_spline(s, full, x, 1), 0.0, 1e-14);
    }
}

TEST(ParameterOperators, MatchesDirectQuadratureOracle2x2)
{
    // two free dofs per direction
    const SplineSpace s = make_uniform_space(2, 4);
    std::vector<DirectionBlocks> dirs{
        make_direction_blocks(s, BoundaryVariant::FirstBiharmonic),
        make_direction_blocks(s, BoundaryVariant::FirstBiharmonic)};
    ASSERT_EQ(dirs[0].free.count, 2);
    const ParameterOperators ops = parameter_operators(dirs);
    const Matrix expansion = ops.Bbar.to_dense();
    const Matrix oracle = direct_bbar_2d(dirs[0], dirs[1]);
    EXPECT_LT((expansion - oracle).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ParameterOperators, IdentityFactorsGiveIdentityOperator)
{
    KroneckerSum mbar({3, 2, 4});
    mbar.add_term(1.0, {BandedMatrix::identity(3), BandedMatrix::identity(2),
                        BandedMatrix::identity(4)});
    Rng rng(4);
    Vector x(24);
    for (int i = 0; i < 24; ++i)
        x[i] = rng.symmetric();
    EXPECT_EQ((mbar.apply(x) - x).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ParameterOperators, SymmetricApplication)
{
    const SplineSpace s = make_space(3, 2);
    std::vector<DirectionBlocks> dirs{
        make_direction_blocks(s, BoundaryVariant::FirstBiharmonic),
        make_direction_blocks(s, BoundaryVariant::FirstBiharmonic)};
    const ParameterOperators ops = parameter_operators(dirs);
    Rng rng(12);
    Vector x(ops.Bbar.size()), y(ops.Bbar.size());
    for (int i = 0; i < x.size(); ++i) {
        x[i] = rng.symmetric();
        y[i] = rng.symmetric();
    }
    EXPECT_NEAR(y.dot(ops.Bbar.apply(x)), x.dot(ops.Bbar.apply(y)), 1e-12);
}

TEST(PhysicalAssembly, IdentityMatchesDirectQuadratureOracle)
{
    const SplineSpace s = make_space(3, 2);
    std::vector<DirectionBlocks> dirs{
        make_direction_blocks(s, BoundaryVariant::FirstBiharmonic),
        make_direction_blocks(s, BoundaryVariant::FirstBiharmonic)};
    const Matrix oracle = direct_bilaplacian_2d(dirs[0], dirs[1]);

    // fast Kronecker route on the flagged identity map
    const CsrMatrix fast = assemble_physical(dirs, GeometryMap::identity(2));
    EXPECT_LT((fast.to_dense() - oracle).cwiseAbs().maxCoeff(), 1e-10);

    // generic quadrature route on a handmade identity control net
    const CsrMatrix generic = assemble_physical(dirs, handmade_identity_2d());
    EXPECT_LT((generic.to_dense() - oracle).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(PhysicalAssembly, OneDimensionalHarnessEqualsUnivariateB)
{
    const SplineSpace s = make_space(3, 3);
    std::vector<DirectionBlocks> dirs{make_direction_blocks(s, BoundaryVariant::FirstBiharmonic)};
    const CsrMatrix b = assemble_physical(dirs, GeometryMap::identity(1));
    const Matrix expected = dirs[0].B.to_dense();
    EXPECT_EQ((b.to_dense() - expected).cwiseAbs().maxCoeff(), 0.0);
}

TEST(PhysicalAssembly, AffineScalingLaw)
{
    for (int d : {2, 3}) {
        const SplineSpace s = make_space(3, 1);
        std::vector<DirectionBlocks> dirs(d, make_direction_blocks(s, BoundaryVariant::FirstBiharmonic));
        const CsrMatrix ref = assemble_physical(dirs, GeometryMap::identity(d));
        const CsrMatrix scaled = assemble_physical(dirs, GeometryMap::affine(d, 0.5, 0.0));
        ASSERT_EQ(ref.nnz(), scaled.nnz());
        const double factor = std::pow(2.0, 4 - d);
        for (std::int64_t k = 0; k < ref.nnz(); ++k)
            EXPECT_NEAR(scaled.values[k], factor * ref.values[k],
                        1e-10 * std::abs(ref.values[k]) + 1e-12);
    }
}

TEST(PhysicalAssembly, SpectralEnvelopeOnRandomVectors)
{
    const SplineSpace s = make_space(3, 2);
    for (int d : {2, 3}) {
        std::vector<DirectionBlocks> dirs(d, make_direction_blocks(s, BoundaryVariant::FirstBiharmonic));
        const ParameterOperators ops = parameter_operators(dirs);
        const CsrMatrix bh = assemble_physical(dirs, GeometryMap::identity(d));
        Rng rng(19);
        for (int t = 0; t < 50; ++t) {
            Vector x(ops.Bbar.size());
            for (int i = 0; i < x.size(); ++i)
                x[i] = rng.symmetric();
            const double reduced = x.dot(ops.Bbar.apply(x));
            const double full = x.dot(bh.apply(x));
            EXPECT_LE(reduced, full * (1 + 1e-10));
            EXPECT_LE(full, d * reduced * (1 + 1e-10));
        }
    }
}

TEST(PhysicalAssembly, BitwiseSymmetryOnMappedDomain)
{
    const SplineSpace s = make_space(3, 2);
    std::vector<DirectionBlocks> dirs(2, make_direction_blocks(s, BoundaryVariant::FirstBiharmonic));
    const CsrMatrix b = assemble_physical(dirs, builtin_domain("quarter-annulus-2d"));
    const CsrMatrix bt = b.transposed();
    ASSERT_EQ(b.nnz(), bt.nnz());
    for (std::int64_t k = 0; k < b.nnz(); ++k) {
        EXPECT_EQ(b.values[k], bt.values[k]);
        EXPECT_EQ(b.indices[k], bt.indices[k]);
    }
}

TEST(PhysicalAssembly, SpdOnMappedDomain)
{
    const SplineSpace s = make_space(3, 2);
    std::vector<DirectionBlocks> dirs(2, make_direction_blocks(s, BoundaryVariant::FirstBiharmonic));
    const CsrMatrix b = assemble_physical(dirs, builtin_domain("quarter-annulus-2d"));
    const Eigen::SelfAdjointEigenSolver<Matrix> es(b.to_dense());
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
}

TEST(PhysicalAssembly, ClampedFunctionsVanishOnPatchSides)
{
    const GeometryMap g = builtin_domain("quarter-annulus-2d");
    const SplineSpace s = make_space(3, 2);
    const FreeRange fr = clamp_constraints(s, BoundaryVariant::FirstBiharmonic);
    Rng rng(23);
    Matrix coeffs = Matrix::Zero(s.dim(), s.dim());
    for (int i = 0; i < fr.count; ++i)
        for (int j = 0; j < fr.count; ++j)
            coeffs(fr.offset + i, fr.offset + j) = rng.symmetric();

    for (int side = 0; side < 4; ++side) {
        for (int t = 0; t <= 10; ++t) {
            const double c = t / 10.0;
            Vector xhat(2);
            if (side == 0)
                xhat << 0.0, c;
            else if (side == 1)
                xhat << 1.0, c;
            else if (side == 2)
                xhat << c, 0.0;
            else
                xhat << c, 1.0;
            const BasisEval bx = eval_basis(s, xhat[0], 1);
            const BasisEval by = eval_basis(s, xhat[1], 1);
            double u = 0, ux = 0, uy = 0;
            for (int a = 0; a <= s.degree; ++a)
                for (int b = 0; b <= s.degree; ++b) {
                    const double cc = coeffs(bx.anchor + a, by.anchor + b);
                    u += cc * bx.values(0, a) * by.values(0, b);
                    ux += cc * bx.values(1, a) * by.values(0, b);
                    uy += cc * bx.values(0, a) * by.values(1, b);
                }
            const GeometrySample gs = g.eval(xhat);
            const Vector grad_phys =
                gs.jacobian.inverse().transpose() * (Vector(2) << ux, uy).finished();
            EXPECT_LT(std::abs(u), 1e-10);
            EXPECT_LT(grad_phys.norm(), 1e-10);
        }
    }
}

TEST(Rhs, ZeroLoadGivesZeroVector)
{
    const SplineSpace s = make_space(3, 2);
    std::vector<DirectionBlocks> dirs(2, make_direction_blocks(s, BoundaryVariant::FirstBiharmonic));
    const Vector f = assemble_rhs(dirs, GeometryMap::identity(2),
                                  [](const Vector&) { return 0.0; });
    EXPECT_EQ(f.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Rhs, SumMatchesAnalyticIntegral)
{
    // partition of unity: the sum over all (unconstrained) dofs integrates f
    const SplineSpace s = make_space(3, 2);
    std::vector<DirectionBlocks> dirs(2, make_unconstrained_blocks(s));
    const Vector f = assemble_rhs(dirs, GeometryMap::identity(2));
    const double expected = 16.0 * kPi * kPi;  // 4 pi^4 (2/pi)^2
    EXPECT_NEAR(f.sum(), expected, 1e-6 * expected);
}

TEST(Rhs, SymmetricUnderIndexPermutation)
{
    const SplineSpace s = make_space(3, 3);
    std::vector<DirectionBlocks> dirs(2, make_direction_blocks(s, BoundaryVariant::FirstBiharmonic));
    const Vector f = assemble_rhs(dirs, GeometryMap::identity(2));
    const int n = dirs[0].free.count;
    const double scale = f.cwiseAbs().maxCoeff();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            EXPECT_NEAR(f[i * n + j], f[j * n + i], 1e-12 * scale);          // swap
            EXPECT_NEAR(f[i * n + j], f[(n - 1 - i) * n + j], 1e-12 * scale);  // mirror
        }
}
