// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bihmg/multigrid.hpp"
#include "bihmg/verification.hpp"

namespace bihmg {

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    std::string table = "custom";  // para2d | para3d | geo2d | geo3d | custom
    int dim = 2;
    std::string geometry = "unit-square";  // built-in name or patch file path
    std::string smoother = "gs";           // gs | mass | hybrid
    int p_min = 3;
    int p_max = 10;
    int level_min = 5;   // sweep rows
    int level_max = 8;
    int level_coarse = -1;  // hierarchy coarsest level, -1 = per-smoother default
    SigmaRule sigma;
    double tau = 1.0;
    double tau_mass = -1.0;
    double tol = 1e-8;
    std::uint64_t seed = 1;
    std::string cycle = "v";  // v | w | two-grid
    int nu = 1;
    std::string out;  // output base path ("" = stdout only)
    std::string format = "csv";
    bool timing = true;
    int median_of = 1;
    double mem_budget = 8e9;  // bytes
    BoundaryVariant variant = BoundaryVariant::FirstBiharmonic;

    void validate() const
    {
        if (p_min < 3 || p_max < p_min)
            throw std::invalid_argument("config: need 3 <= p-min <= p-max");
        if (level_min < 0 || level_max < level_min)
            throw std::invalid_argument("config: need 0 <= level-min <= level-max");
        if (smoother != "gs" && smoother != "mass" && smoother != "hybrid")
            throw std::invalid_argument("config: smoother must be gs, mass or hybrid");
        if (cycle != "v" && cycle != "w" && cycle != "two-grid")
            throw std::invalid_argument("config: cycle must be v, w or two-grid");
        if (format != "csv" && format != "md")
            throw std::invalid_argument("config: format must be csv or md");
        if (median_of < 1 || median_of % 2 == 0)
            throw std::invalid_argument("config: median-of must be a positive odd count");
    }
};

/// Fills dimension, geometry and sweep ranges for the named table layouts.
inline void apply_table_preset(ExperimentConfig& cfg)
{
    if (cfg.table == "custom")
        return;
    if (cfg.table == "para2d" || cfg.table == "geo2d") {
        cfg.dim = 2;
        cfg.geometry = (cfg.table == "para2d") ? "unit-square" : "quarter-annulus-2d";
    } else if (cfg.table == "para3d" || cfg.table == "geo3d") {
        cfg.dim = 3;
        cfg.geometry = (cfg.table == "para3d") ? "unit-cube" : "quarter-annulus-3d";
        cfg.p_max = std::min(cfg.p_max, 7);
        if (cfg.level_min == 5 && cfg.level_max == 8) {
            cfg.level_min = 3;
            cfg.level_max = 6;
        }
    } else {
        throw std::invalid_argument("config: unknown table '" + cfg.table + "'");
    }
}

inline GeometryMap resolve_geometry(const ExperimentConfig& cfg)
{
    for (const char* name :
         {"unit-square", "unit-cube", "quarter-annulus-2d", "quarter-annulus-3d"})
        if (cfg.geometry == name)
            return builtin_domain(name);
    return load_geometry(cfg.geometry);
}

inline SmootherKind resolve_smoother(const std::string& name)
{
    if (name == "gs")
        return SmootherKind::GaussSeidel;
    if (name == "mass")
        return SmootherKind::Mass;
    return SmootherKind::Hybrid;
}

inline CycleSpec resolve_cycle(const ExperimentConfig& cfg)
{
    CycleSpec spec;
    spec.cycle = cfg.cycle == "w"        ? CycleType::W
                 : cfg.cycle == "two-grid" ? CycleType::TwoGrid
                                           : CycleType::V;
    spec.pre_smooth = cfg.nu;
    spec.post_smooth = cfg.nu;
    return spec;
}

// ---------------------------------------------------------------------------
// Table runs
// ---------------------------------------------------------------------------

struct CellResult {
    int p = 0;
    int level = 0;
    std::int64_t dofs = 0;
    std::int64_t nnz = 0;
    int iterations = 0;
    double seconds = 0.0;
    std::string status;  // "yes" | "no" | "skipped: <reason>"
};

struct TableResult {
    ExperimentConfig config;
    std::vector<CellResult> cells;
};

/// Memory estimate for one cell: fine matrix plus coarser levels, transfers
/// and factorization workspace.
inline double estimate_cell_bytes(int d, int p, int level)
{
    const double n_free = std::pow((1 << level) + p - 4.0, d);
    return n_free * std::pow(2.0 * p + 1.0, d) * 8.0 * 3.0;
}

inline SolverConfig make_solver_config(const ExperimentConfig& cfg, const GeometryMap& geometry,
                                       int p, int level)
{
    SolverConfig sc;
    sc.dim = cfg.dim;
    sc.degree = p;
    sc.level = level;
    sc.level_min = cfg.level_coarse;
    if (cfg.cycle == "two-grid")
        sc.level_min = level - 1;
    sc.geometry = geometry;
    sc.smoother = resolve_smoother(cfg.smoother);
    sc.variant = cfg.variant;
    sc.sigma = cfg.sigma;
    sc.tau = cfg.tau;
    sc.tau_mass = cfg.tau_mass;
    return sc;
}

inline CellResult run_cell(const ExperimentConfig& cfg, const GeometryMap& geometry, int p,
                           int level)
{
    CellResult cell;
    cell.p = p;
    cell.level = level;
    if (estimate_cell_bytes(cfg.dim, p, level) > cfg.mem_budget) {
        cell.status = "skipped: memory";
        return cell;
    }
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const MultigridHierarchy hierarchy(make_solver_config(cfg, geometry, p, level));
        std::vector<DirectionBlocks> dirs(
            cfg.dim, make_direction_blocks(make_space(p, level), cfg.variant));
        const Vector f = assemble_rhs(dirs, geometry);
        cell.dofs = hierarchy.dofs();
        cell.nnz = hierarchy.fine_nnz();

        std::vector<int> counts;
        bool all_converged = true;
        for (int run = 0; run < cfg.median_of; ++run) {
            const SolveResult res =
                solve(hierarchy, resolve_cycle(cfg), f, cfg.seed + run, cfg.tol);
            counts.push_back(res.iterations);
            all_converged = all_converged && res.converged;
        }
        std::sort(counts.begin(), counts.end());
        cell.iterations = counts[counts.size() / 2];
        cell.status = all_converged ? "yes" : "no";
    } catch (const std::exception& e) {
        cell.status = std::string("skipped: ") + e.what();
    }
    cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return cell;
}

/// Runs the configured (p, level) grid. Per-cell failures are recorded and
/// the run continues; no cell is silently missing.
inline TableResult run_table(ExperimentConfig cfg)
{
    apply_table_preset(cfg);
    cfg.validate();
    const GeometryMap geometry = resolve_geometry(cfg);
    TableResult result;
    result.config = cfg;
    for (int level = cfg.level_min; level <= cfg.level_max; ++level)
        for (int p = cfg.p_min; p <= cfg.p_max; ++p)
            result.cells.push_back(run_cell(cfg, geometry, p, level));
    return result;
}

// ---------------------------------------------------------------------------
// Output formats
// ---------------------------------------------------------------------------

inline void write_csv(std::ostream& out, const TableResult& result)
{
    out << "d,geometry,smoother,p,level,dofs,nnz,iterations,seconds,converged\n";
    char buf[64];
    for (const CellResult& c : result.cells) {
        std::snprintf(buf, sizeof(buf), "%.3f", result.config.timing ? c.seconds : 0.0);
        out << result.config.dim << ',' << result.config.geometry << ','
            << result.config.smoother << ',' << c.p << ',' << c.level << ',' << c.dofs << ','
            << c.nnz << ',' << c.iterations << ',' << buf << ',' << c.status << '\n';
    }
}

/// Markdown table mirroring the layout of the iteration-count tables:
/// one row per refinement level, one column per degree.
inline void write_markdown(std::ostream& out, const TableResult& result)
{
    const ExperimentConfig& cfg = result.config;
    out << "### " << cfg.geometry << ", smoother " << cfg.smoother << ", d=" << cfg.dim
        << "\n\n";
    out << "| level \\ p |";
    for (int p = cfg.p_min; p <= cfg.p_max; ++p)
        out << ' ' << p << " |";
    out << "\n|---|";
    for (int p = cfg.p_min; p <= cfg.p_max; ++p)
        out << "---|";
    out << "\n";
    for (int level = cfg.level_min; level <= cfg.level_max; ++level) {
        out << "| " << level << " |";
        for (int p = cfg.p_min; p <= cfg.p_max; ++p) {
            const auto it = std::find_if(result.cells.begin(), result.cells.end(),
                                         [&](const CellResult& c) {
                                             return c.p == p && c.level == level;
                                         });
            if (it == result.cells.end())
                out << " - |";
            else if (it->status == "yes")
                out << ' ' << it->iterations << " |";
            else if (it->status == "no")
                out << ' ' << it->iterations << "* |";
            else
                out << " skip |";
        }
        out << "\n";
    }
    out << "\ncells marked * did not reach the tolerance; skip = skipped cell\n";
}

inline void write_table_files(const TableResult& result)
{
    if (result.config.out.empty())
        return;
    const std::string base = result.config.out;
    if (result.config.format == "csv") {
        std::ofstream out(base);
        if (!out)
            throw std::runtime_error("cannot open '" + base + "' for writing");
        write_csv(out, result);
    } else {
        std::ofstream out(base);
        if (!out)
            throw std::runtime_error("cannot open '" + base + "' for writing");
        write_markdown(out, result);
    }
}

// ---------------------------------------------------------------------------
// Verification sweep
// ---------------------------------------------------------------------------

struct VerifySummary {
    int total = 0;
    int failed = 0;
};

/// Default desk-scale sweep of the provable statements; one JSON line per
/// report. bound_scale < 1 tightens every bound (negative control).
inline VerifySummary run_verify(std::ostream& report, double bound_scale = 1.0,
                                bool quick = false)
{
    VerifySummary summary;
    const auto emit = [&](const InequalityReport& rep) {
        ++summary.total;
        if (!rep.pass)
            ++summary.failed;
        write_report_line(report, rep);
    };

    for (int p : {3, 4, 5}) {
        for (int level : {1, 2, 3})
            emit(check_spectral_equivalence(2, p, level, bound_scale));
        for (int level : {1, 2})
            emit(check_spectral_equivalence(3, p, level, bound_scale));
    }
    for (int p = 3; p <= (quick ? 5 : 10); ++p) {
        const int lo =
            std::max(2, min_splitting_level(p, BoundaryVariant::FirstBiharmonic));
        for (int level = lo; level <= 6; ++level)
            emit(check_inverse_inequality(p, level, bound_scale));
    }
    for (int p = 3; p <= (quick ? 5 : 8); ++p) {
        const SplittingStabilityReport rep2 = check_splitting_stability(2, p, 4, bound_scale);
        emit(rep2.l2_identity);
        emit(rep2.seminorm_bracket);
        if (!quick) {
            const SplittingStabilityReport rep3 =
                check_splitting_stability(3, p, 3, bound_scale);
            emit(rep3.l2_identity);
            emit(rep3.seminorm_bracket);
        }
    }
    for (int p : {3, 4, 5}) {
        for (int level : {2, 3})
            emit(check_gs_pinch(2, p, level, bound_scale));
        for (int level : {1, 2})
            emit(check_gs_pinch(3, p, level, bound_scale));
        emit(check_mass_pinch(2, p, 3));
    }
    for (int p : {3, 4, 5}) {
        const ProjectionOrderReport rep = check_projection_order(p);
        InequalityReport line;
        line.statement = "projection-order";
        line.d = 1;
        line.p = p;
        line.level = rep.levels.front();
        line.measured_min = *std::min_element(rep.h2_ratios.begin(), rep.h2_ratios.end());
        line.measured_max = *std::max_element(rep.h2_ratios.begin(), rep.h2_ratios.end());
        line.bound_low = 3.5 * bound_scale;
        line.pass = rep.pass && line.measured_min >= line.bound_low;
        emit(line);
    }
    return summary;
}

// ---------------------------------------------------------------------------
// Single solves with solution export
// ---------------------------------------------------------------------------

struct SolveOnceResult {
    CellResult cell;
    Vector coefficients;           // free dofs
    std::vector<int> sample_dims;  // per-direction sample counts
    Vector samples;                // u at the uniform parameter grid
};

/// Solves one (p, level) instance and samples the solution on a uniform
/// parameter grid. A zero load is solved from the zero initial iterate, so
/// the iteration count is zero there.
inline SolveOnceResult solve_once(ExperimentConfig cfg, int p, int level,
                                  int samples_per_dir = 33,
                                  const std::function<double(const Vector&)>& load = model_load)
{
    apply_table_preset(cfg);
    const GeometryMap geometry = resolve_geometry(cfg);
    const MultigridHierarchy hierarchy(make_solver_config(cfg, geometry, p, level));
    std::vector<DirectionBlocks> dirs(cfg.dim,
                                      make_direction_blocks(make_space(p, level), cfg.variant));
    const Vector f = assemble_rhs(dirs, geometry, load);

    SolveOnceResult out;
    out.cell.p = p;
    out.cell.level = level;
    out.cell.dofs = hierarchy.dofs();
    out.cell.nnz = hierarchy.fine_nnz();
    const auto t0 = std::chrono::steady_clock::now();
    const SolveResult res = solve(hierarchy, resolve_cycle(cfg), f, cfg.seed, cfg.tol, 2000,
                                  /*zero_initial_guess=*/f.norm() == 0.0);
    out.cell.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.cell.iterations = res.iterations;
    out.cell.status = res.converged ? "yes" : "no";
    out.coefficients = res.x;

    // evaluate on the uniform parameter grid via per-direction collocation
    const SplineSpace space = make_space(p, level);
    const FreeRange free = clamp_constraints(space, cfg.variant);
    Matrix colloc(samples_per_dir, free.count);
    colloc.setZero();
    for (int s = 0; s < samples_per_dir; ++s) {
        const double x = static_cast<double>(s) / (samples_per_dir - 1);
        const BasisEval be = eval_basis(space, x, 0);
        for (int j = 0; j <= p; ++j) {
            const int fj = be.anchor + j - free.offset;
            if (fj >= 0 && fj < free.count)
                colloc(s, fj) = be.values(0, j);
        }
    }
    std::vector<int> shape(cfg.dim, free.count);
    Vector values = res.x;
    for (int k = 0; k < cfg.dim; ++k)
        values = mode_apply(colloc, values, shape, k);
    out.sample_dims = shape;
    out.samples = values;
    return out;
}

inline void write_solution_files(const SolveOnceResult& r, const ExperimentConfig& cfg,
                                 const std::string& base)
{
    {
        std::ofstream out(base + "_coefficients.csv");
        if (!out)
            throw std::runtime_error("cannot open coefficient output file");
        out << "index,value\n";
        char buf[40];
        for (int i = 0; i < r.coefficients.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", r.coefficients[i]);
            out << i << ',' << buf << '\n';
        }
    }
    {
        std::ofstream out(base + "_samples.csv");
        if (!out)
            throw std::runtime_error("cannot open sample output file");
        const int d = static_cast<int>(r.sample_dims.size());
        for (int k = 0; k < d; ++k)
            out << "x" << k + 1 << ',';
        out << "value\n";
        std::vector<int> idx(d, 0);
        char buf[40];
        for (std::int64_t flat = 0; flat < r.samples.size(); ++flat) {
            for (int k = 0; k < d; ++k)
                out << static_cast<double>(idx[k]) / (r.sample_dims[k] - 1) << ',';
            std::snprintf(buf, sizeof(buf), "%.17g", r.samples[flat]);
            out << buf << '\n';
            for (int k = d - 1; k >= 0; --k) {
                if (++idx[k] < r.sample_dims[k])
                    break;
                idx[k] = 0;
            }
        }
    }
    (void)cfg;
}

}  // namespace bihmg
