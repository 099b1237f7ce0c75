// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: iteration-count tables, the verification sweep and
// single solves with solution export.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "bihmg/experiments.hpp"

namespace {

void add_common_options(CLI::App* cmd, bihmg::ExperimentConfig& cfg, std::string& sigma)
{
    cmd->add_option("--d", cfg.dim, "Spatial dimension (2 or 3)")->envname("BIHMG_D");
    cmd->add_option("--geometry", cfg.geometry, "Built-in domain name or patch file path")
        ->envname("BIHMG_GEOMETRY");
    cmd->add_option("--smoother", cfg.smoother, "Smoother: gs | mass | hybrid")
        ->envname("BIHMG_SMOOTHER");
    cmd->add_option("--sigma", sigma, "Sigma rule: paper | theory | <scale>")
        ->envname("BIHMG_SIGMA");
    cmd->add_option("--tau", cfg.tau, "Mass smoother damping")->envname("BIHMG_TAU");
    cmd->add_option("--tau-mass", cfg.tau_mass,
                    "Hybrid mass-step damping (default 0.125 in 2D, 0.09 in 3D)")
        ->envname("BIHMG_TAU_MASS");
    cmd->add_option("--tol", cfg.tol, "Relative residual tolerance")->envname("BIHMG_TOL");
    cmd->add_option("--seed", cfg.seed, "Random initial iterate seed")->envname("BIHMG_SEED");
    cmd->add_option("--cycle", cfg.cycle, "Cycle: v | w | two-grid")->envname("BIHMG_CYCLE");
    cmd->add_option("--nu", cfg.nu, "Pre- and post-smoothing steps")->envname("BIHMG_NU");
    cmd->add_option("--level-coarse", cfg.level_coarse,
                    "Coarsest hierarchy level (-1 = per-smoother default)")
        ->envname("BIHMG_LEVEL_COARSE");
    cmd->add_option("--out", cfg.out, "Output path")->envname("BIHMG_OUT");
    cmd->add_flag_function(
        "--no-timing", [&cfg](std::int64_t) { cfg.timing = false; },
        "Write 0.000 in the seconds column (byte-reproducible output)");
    cmd->add_option_function<std::string>(
           "--bc",
           [&cfg](const std::string& v) {
               if (v == "first")
                   cfg.variant = bihmg::BoundaryVariant::FirstBiharmonic;
               else if (v == "second")
                   cfg.variant = bihmg::BoundaryVariant::SecondBiharmonic;
               else
                   throw CLI::ValidationError("--bc must be first or second");
           },
           "Boundary conditions: first | second")
        ->envname("BIHMG_BC");
}

void parse_sigma(const std::string& text, bihmg::SigmaRule& rule)
{
    if (text.empty() || text == "paper") {
        rule.kind = bihmg::SigmaRule::Kind::Paper;
    } else if (text == "theory") {
        rule.kind = bihmg::SigmaRule::Kind::Theory;
    } else {
        rule.kind = bihmg::SigmaRule::Kind::Explicit;
        rule.value = std::stod(text);
        if (!(rule.value > 0.0))
            throw CLI::ValidationError("--sigma scale must be positive");
    }
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Robust multigrid solvers for H2-conforming spline discretizations of the "
                 "first biharmonic problem"};
    app.require_subcommand(1);

    bihmg::ExperimentConfig cfg;
    std::string sigma_text;

    CLI::App* table = app.add_subcommand("table", "Run an iteration-count table");
    table->add_option("--table", cfg.table, "Preset: para2d | para3d | geo2d | geo3d | custom")
        ->envname("BIHMG_TABLE");
    table->add_option("--p-min", cfg.p_min, "Smallest spline degree")->envname("BIHMG_P_MIN");
    table->add_option("--p-max", cfg.p_max, "Largest spline degree")->envname("BIHMG_P_MAX");
    table->add_option("--level-min", cfg.level_min, "Coarsest refinement row")
        ->envname("BIHMG_LEVEL_MIN");
    table->add_option("--level-max", cfg.level_max, "Finest refinement row")
        ->envname("BIHMG_LEVEL_MAX");
    table->add_option("--format", cfg.format, "Output format: csv | md")
        ->envname("BIHMG_FORMAT");
    table->add_option("--median-of", cfg.median_of, "Report the median of an odd number of runs")
        ->envname("BIHMG_MEDIAN_OF");
    table->add_option("--mem-budget", cfg.mem_budget, "Cell memory budget in bytes")
        ->envname("BIHMG_MEM_BUDGET");
    add_common_options(table, cfg, sigma_text);

    CLI::App* verify = app.add_subcommand("verify", "Run the verification sweep");
    std::string verify_out;
    double bound_scale = 1.0;
    bool quick = false;
    verify->add_option("--out", verify_out, "Report file (JSON lines)")->envname("BIHMG_OUT");
    verify->add_option("--bound-scale", bound_scale,
                       "Scale every bound (tighten with values < 1; negative control)");
    verify->add_flag("--quick", quick, "Smaller sweep");

    CLI::App* solve_cmd = app.add_subcommand("solve", "Solve one instance and export samples");
    int p = 3, level = 5, samples = 33;
    solve_cmd->add_option("--p", p, "Spline degree")->envname("BIHMG_P");
    solve_cmd->add_option("--level", level, "Refinement level")->envname("BIHMG_LEVEL");
    solve_cmd->add_option("--samples", samples, "Samples per direction for the export grid");
    add_common_options(solve_cmd, cfg, sigma_text);

    CLI11_PARSE(app, argc, argv);

    try {
        if (table->parsed()) {
            parse_sigma(sigma_text, cfg.sigma);
            const bihmg::TableResult result = bihmg::run_table(cfg);
            if (cfg.format == "csv")
                bihmg::write_csv(std::cout, result);
            else
                bihmg::write_markdown(std::cout, result);
            bihmg::write_table_files(result);
            for (const bihmg::CellResult& c : result.cells)
                if (c.status != "yes" && c.status.rfind("skipped", 0) != 0)
                    return 2;
            return 0;
        }
        if (verify->parsed()) {
            bihmg::VerifySummary summary;
            if (verify_out.empty()) {
                summary = bihmg::run_verify(std::cout, bound_scale, quick);
            } else {
                std::ofstream out(verify_out);
                if (!out)
                    throw std::runtime_error("cannot open '" + verify_out + "'");
                summary = bihmg::run_verify(out, bound_scale, quick);
            }
            std::fprintf(stderr, "verify: %d checks, %d failed\n", summary.total,
                         summary.failed);
            return summary.failed == 0 ? 0 : 1;
        }
        if (solve_cmd->parsed()) {
            parse_sigma(sigma_text, cfg.sigma);
            cfg.table = "custom";
            const bihmg::SolveOnceResult result = bihmg::solve_once(cfg, p, level, samples);
            std::fprintf(stderr, "solve: %lld dofs, %d iterations, %s\n",
                         static_cast<long long>(result.cell.dofs), result.cell.iterations,
                         result.cell.status.c_str());
            if (!cfg.out.empty())
                bihmg::write_solution_files(result, cfg, cfg.out);
            return result.cell.status == "yes" ? 0 : 2;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
