// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Cholesky>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "bihmg/assembly.hpp"
#include "bihmg/geometry.hpp"
#include "bihmg/linalg.hpp"
#include "bihmg/smoothers.hpp"
#include "bihmg/splitting.hpp"
#include "bihmg/tensor.hpp"
#include "bihmg/util.hpp"

namespace bihmg {

enum class SmootherKind { GaussSeidel, Mass, Hybrid };

enum class CycleType { V, W, TwoGrid };

struct CycleSpec {
    CycleType cycle = CycleType::V;
    int pre_smooth = 1;
    int post_smooth = 1;

    void validate() const
    {
        if (pre_smooth < 0 || post_smooth < 0 || pre_smooth + post_smooth < 1)
            throw std::invalid_argument("CycleSpec: need nu1, nu2 >= 0 and nu1 + nu2 >= 1");
    }
};

struct SolverConfig {
    int dim = 2;
    int degree = 3;
    int level = 5;       // finest level
    int level_min = -1;  // coarsest level; -1 selects the per-smoother default
    GeometryMap geometry = GeometryMap::identity(2);
    SmootherKind smoother = SmootherKind::GaussSeidel;
    BoundaryVariant variant = BoundaryVariant::FirstBiharmonic;
    SigmaRule sigma;
    double tau = 1.0;       // mass smoother damping
    double tau_mass = -1.0;  // hybrid mass step damping; -1 picks 0.125 (2D) / 0.09 (3D)
    int quad_points = 0;     // 0 selects p+1 per direction

    double hybrid_mass_damping() const
    {
        if (tau_mass >= 0.0)
            return tau_mass;
        return dim == 3 ? 0.09 : 0.125;
    }
};

/// Default coarsest level. The Gauss-Seidel hierarchy only needs a nonempty
/// constrained space; the mass and hybrid smoothers need the splitting, so
/// they start where the boundary blocks separate.
inline int default_coarse_level(int degree, BoundaryVariant variant, SmootherKind smoother)
{
    if (smoother == SmootherKind::GaussSeidel) {
        const int removed = (variant == BoundaryVariant::FirstBiharmonic) ? 4 : 2;
        int level = 1;
        while ((1 << level) + degree - removed < 1)
            ++level;
        return level;
    }
    return min_splitting_level(degree, variant);
}

namespace detail {

struct MgLevel {
    int level = 0;
    std::vector<DirectionBlocks> dirs;
    ParameterOperators ops;
    CsrMatrix b_phys;  // empty unless this smoother mode runs on the physical matrix
    bool has_phys = false;
    std::vector<CsrMatrix> prol, prol_t;  // univariate transfer from the coarser level
    std::optional<GaussSeidelSmoother> gs;
    std::optional<MassSmoother> mass;
    std::optional<HybridSmoother> hybrid;

    std::vector<int> dims() const
    {
        std::vector<int> out(dirs.size());
        for (std::size_t k = 0; k < dirs.size(); ++k)
            out[k] = dirs[k].free.count;
        return out;
    }
};

}  // namespace detail

/// Grid hierarchy with per-level operators, smoothers, tensorized transfers
/// and a direct factorization on the coarsest level. With the Gauss-Seidel
/// and hybrid smoothers the cycle runs on the physical matrix; with the mass
/// smoother it runs on the reduced parameter-domain operator. The fine-level
/// physical matrix is always assembled for the outer Krylov iteration.
class MultigridHierarchy {
public:
    explicit MultigridHierarchy(const SolverConfig& config) : config_(config)
    {
        const int d = config.dim;
        if (d < 1 || d > 3)
            throw std::invalid_argument("MultigridHierarchy: dim must be 1, 2 or 3");
        if (config.degree < 3)
            throw std::invalid_argument("MultigridHierarchy: solver paths require degree >= 3");
        coarse_level_ = config.level_min >= 0
                            ? config.level_min
                            : default_coarse_level(config.degree, config.variant,
                                                   config.smoother);
        if (coarse_level_ > config.level)
            throw std::invalid_argument(
                "MultigridHierarchy: coarsest level exceeds the finest level");

        const bool phys_everywhere = config.smoother != SmootherKind::Mass;
        for (int l = coarse_level_; l <= config.level; ++l) {
            auto lev = std::make_unique<detail::MgLevel>();
            lev->level = l;
            const SplineSpace space = make_space(config.degree, l);
            lev->dirs.assign(d, make_direction_blocks(space, config.variant));
            lev->ops = parameter_operators(lev->dirs);
            if (phys_everywhere || l == config.level) {
                lev->b_phys = assemble_physical(lev->dirs, config.geometry, config.quad_points);
                lev->has_phys = true;
            }
            if (l > coarse_level_) {
                const SplineSpace coarse_space = make_space(config.degree, l - 1);
                const FreeRange fr_f = clamp_constraints(space, config.variant);
                const FreeRange fr_c = clamp_constraints(coarse_space, config.variant);
                const Matrix full = refinement_matrix(coarse_space).to_dense();
                const Matrix restricted =
                    full.block(fr_f.offset, fr_c.offset, fr_f.count, fr_c.count);
                const CsrMatrix r = CsrMatrix::from_dense(restricted, 0.0);
                lev->prol.assign(d, r);
                lev->prol_t.assign(d, r.transposed());
            }
            levels_.push_back(std::move(lev));
        }

        // smoothers
        for (auto& lev : levels_) {
            switch (config.smoother) {
            case SmootherKind::GaussSeidel:
                lev->gs.emplace(lev->b_phys);
                break;
            case SmootherKind::Mass:
                lev->mass.emplace(make_mass_smoother(*lev, config.tau, false));
                break;
            case SmootherKind::Hybrid:
                lev->hybrid.emplace(lev->b_phys,
                                    make_mass_smoother(*lev, config.hybrid_mass_damping(), true));
                break;
            }
        }

        coarse_factor_ = Eigen::LLT<Matrix>(coarse_matrix_dense());
        if (coarse_factor_.info() != Eigen::Success)
            throw std::runtime_error("MultigridHierarchy: coarse matrix is not SPD");
    }

    int num_levels() const { return static_cast<int>(levels_.size()); }
    int coarse_level() const { return coarse_level_; }
    const SolverConfig& config() const { return config_; }

    std::int64_t dofs() const { return shape_size(levels_.back()->dims()); }
    std::int64_t fine_nnz() const { return levels_.back()->b_phys.nnz(); }
    const CsrMatrix& fine_matrix() const { return levels_.back()->b_phys; }

    /// Operator the cycle runs on at a level.
    Vector apply_level(int idx, const Vector& x) const
    {
        const detail::MgLevel& lev = *levels_[idx];
        if (config_.smoother == SmootherKind::Mass)
            return lev.ops.Bbar.apply(x);
        return lev.b_phys.apply(x);
    }

    Vector prolongate(int idx, const Vector& xc) const
    {
        const detail::MgLevel& lev = *levels_[idx];
        std::vector<int> shape = levels_[idx - 1]->dims();
        Vector x = xc;
        for (int k = 0; k < config_.dim; ++k)
            x = mode_apply(lev.prol[k], x, shape, k);
        return x;
    }

    Vector restrict_residual(int idx, const Vector& rf) const
    {
        const detail::MgLevel& lev = *levels_[idx];
        std::vector<int> shape = levels_[idx]->dims();
        Vector x = rf;
        for (int k = 0; k < config_.dim; ++k)
            x = mode_apply(lev.prol_t[k], x, shape, k);
        return x;
    }

    void smooth(int idx, Vector& u, const Vector& rhs) const
    {
        const detail::MgLevel& lev = *levels_[idx];
        switch (config_.smoother) {
        case SmootherKind::GaussSeidel:
            lev.gs->symmetric_step(u, rhs);
            break;
        case SmootherKind::Mass:
            u += lev.mass->apply(rhs - lev.ops.Bbar.apply(u));
            break;
        case SmootherKind::Hybrid:
            lev.hybrid->step(u, rhs);
            break;
        }
    }

    /// One multigrid cycle on `idx` (0 = coarsest): smoothing, coarse-grid
    /// correction by one (V) or two (W) recursive steps, smoothing.
    void cycle(const CycleSpec& spec, int idx, Vector& u, const Vector& rhs) const
    {
        if (idx == 0) {
            u = coarse_factor_.solve(rhs);
            return;
        }
        for (int i = 0; i < spec.pre_smooth; ++i)
            smooth(idx, u, rhs);
        const Vector residual = rhs - apply_level(idx, u);
        const Vector coarse_rhs = restrict_residual(idx, residual);
        Vector correction = Vector::Zero(coarse_rhs.size());
        const int recursions = (spec.cycle == CycleType::W && idx > 1) ? 2 : 1;
        for (int t = 0; t < recursions; ++t)
            cycle(spec, idx - 1, correction, coarse_rhs);
        u += prolongate(idx, correction);
        for (int i = 0; i < spec.post_smooth; ++i)
            smooth(idx, u, rhs);
    }

    /// One cycle applied to a residual with zero initial guess.
    Vector precondition(const CycleSpec& spec, const Vector& r) const
    {
        Vector v = Vector::Zero(r.size());
        cycle(spec, num_levels() - 1, v, r);
        return v;
    }

    const detail::MgLevel& level(int idx) const { return *levels_[idx]; }

private:
    MassSmoother make_mass_smoother(const detail::MgLevel& lev, double damping,
                                    bool hybrid) const
    {
        std::vector<UnivariateSplitting> splits;
        std::vector<double> sigmas;
        const double scale = config_.sigma.scale(config_.dim, hybrid);
        for (int k = 0; k < config_.dim; ++k) {
            splits.push_back(build_splitting(lev.dirs[k]));
            const double h = lev.dirs[k].space.h;
            sigmas.push_back(scale / (h * h * h * h));
        }
        return MassSmoother(std::move(splits), std::move(sigmas), damping);
    }

    Matrix coarse_matrix_dense() const
    {
        const detail::MgLevel& lev = *levels_.front();
        if (config_.smoother == SmootherKind::Mass)
            return lev.ops.Bbar.to_dense();
        return lev.b_phys.to_dense();
    }

    SolverConfig config_;
    int coarse_level_ = 0;
    std::vector<std::unique_ptr<detail::MgLevel>> levels_;
    Eigen::LLT<Matrix> coarse_factor_;
};

struct SolveResult {
    Vector x;
    int iterations = 0;
    bool converged = false;
    std::vector<double> residual_history;
};

/// PCG on the fine-level physical matrix, preconditioned by one multigrid
/// cycle. The initial iterate is a seeded uniform random vector in [-1,1]^N
/// (or zero when `zero_initial_guess`); the iteration stops once the 2-norm
/// residual has dropped by `rel_tol`.
inline SolveResult solve(const MultigridHierarchy& hierarchy, CycleSpec spec, const Vector& f,
                         std::uint64_t seed, double rel_tol = 1e-8, int max_iter = 2000,
                         bool zero_initial_guess = false)
{
    spec.validate();
    if (spec.cycle == CycleType::TwoGrid && hierarchy.num_levels() > 2)
        throw std::invalid_argument(
            "solve: two-grid mode requires a hierarchy built with level_min = level - 1");
    Vector x0 = Vector::Zero(f.size());
    if (!zero_initial_guess) {
        Rng rng(seed);
        for (int i = 0; i < x0.size(); ++i)
            x0[i] = rng.symmetric();
    }
    const CsrMatrix& a = hierarchy.fine_matrix();
    const PcgResult res =
        pcg([&](const Vector& v) { return a.apply(v); },
            [&](const Vector& r) { return hierarchy.precondition(spec, r); }, f, x0, rel_tol,
            max_iter);
    return SolveResult{res.x, res.iterations, res.converged, res.residual_history};
}

}  // namespace bihmg
