// Copyright (c) crossbar-precond contributors
// SPDX-License-Identifier: Apache-2.0

// Command-line driver: builds the test problems, SPAI/ILU(0) preconditioners
// and analog devices, and writes experiment tables as CSV/JSON.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "crossbar/experiments.hpp"

namespace fs = std::filesystem;
using namespace crossbar;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kNumerical = 2, kCertification = 3 };

struct Options {
  std::vector<std::string> problems{"fd3d"};
  std::size_t k = 8;
  std::size_t m = 25;
  std::string matrix;
  std::string device_config;
  std::uint64_t seed = 0;
  std::size_t reps = 11;
  std::string out = "out";
  double spai_tol = 5.0e-2;
  double spai_budget_factor = 40.0;
  double tol = 1.0e-5;
  std::size_t max_it = 50;
  std::vector<std::string> solvers{"none", "spai-digital", "spai-hybrid"};
  std::vector<double> gammas{20.0, 40.0, 60.0};
  std::vector<unsigned> dac_bits{5, 7, 9, 11};
  std::size_t trials = 200;
  bool drop_mean = false;
  std::string solver = "spai-digital";
  std::string precond_type = "spai";
};

ExperimentSpec to_spec(const Options& o) {
  ExperimentSpec s;
  s.problems = o.problems;
  s.fd_k = o.k;
  s.fe_m = o.m;
  s.matrix_path = o.matrix;
  if (!o.device_config.empty()) s.device = load_device_config(o.device_config);
  s.spai.tol = o.spai_tol;
  s.spai.budget_factor = o.spai_budget_factor;
  s.spai.validate();
  s.solve.tol = o.tol;
  s.solve.max_it = o.max_it;
  s.solve.validate();
  s.solvers.clear();
  for (const auto& name : o.solvers) s.solvers.push_back(parse_precond_kind(name));
  if (o.reps < 1) throw std::invalid_argument("--reps must be >= 1");
  s.reps = o.reps;
  s.seed = o.seed;
  s.gammas = o.gammas;
  s.dac_bits = o.dac_bits;
  s.trials = o.trials;
  s.drop_mean = o.drop_mean;
  return s;
}

int run_table2(const ExperimentSpec& spec, const fs::path& out) {
  std::vector<Table2Row> rows;
  for (const auto& name : spec.problems) {
    const Prepared p = prepare(spec, name);
    rows.push_back(table2_row(p, spec));
    const auto& r = rows.back();
    std::printf("%-16s n=%zu kappa=%.3g nnzA/n=%.2f nnzM/n=%.1f rho(I-A)=%.3f rho(I-MdA)=%.3f "
                "m=%zu(%s) m_d=%zu m_h=%zu flops_d=%llu flops_h=%llu\n",
                r.label.c_str(), r.n, r.kappa, r.nnz_a_per_n, r.nnz_m_per_n, r.rho_i_minus_a,
                r.rho_i_minus_mda, r.m, status_cell(r.none).c_str(), r.m_d, r.m_h,
                static_cast<unsigned long long>(r.flops_d),
                static_cast<unsigned long long>(r.flops_h));
  }
  write_file_atomic(out / "table2.csv", table2_csv(rows, spec));
  write_file_atomic(out / "table2.json", table2_json(rows).dump(2) + "\n");
  return kOk;
}

int run_curves(const ExperimentSpec& spec, const fs::path& out) {
  for (const auto& name : spec.problems) {
    const Prepared p = prepare(spec, name);
    for (const auto& runs : cmd_residual_curves(p, spec, out)) {
      std::printf("%-16s %-13s median iterations %zu (%zu/%zu converged)%s\n",
                  p.problem.label.c_str(), std::string(to_string(runs.kind)).c_str(),
                  runs.median_iterations(), runs.converged_reps(), runs.reports.size(),
                  runs.error.empty() ? "" : (" error: " + runs.error).c_str());
    }
  }
  return kOk;
}

int run_flops(const ExperimentSpec& spec, const fs::path& out) {
  for (const auto& name : spec.problems) {
    const Prepared p = prepare(spec, name);
    std::vector<FlopCurve> curves;
    cmd_flops_vs_residual(p, spec, out, &curves);
    for (const auto& c : curves) {
      std::printf("%-16s %-13s %zu iterations, %llu digital FLOPs/iteration, to tol: %llu\n",
                  p.problem.label.c_str(), std::string(to_string(c.kind)).c_str(), c.iterations,
                  static_cast<unsigned long long>(c.per_iteration),
                  static_cast<unsigned long long>(c.flops_to_tol));
    }
  }
  return kOk;
}

int run_density(const ExperimentSpec& spec, const fs::path& out) {
  for (const auto& name : spec.problems) {
    const Prepared p{make_problem(spec, name), nullptr};
    for (const auto& pt : cmd_density_sweep(p, spec, out)) {
      std::printf("%-16s gamma=%g nnz(M)=%zu m_d=%zu m_h=%zu digital/it=%llu hybrid/it=%llu "
                  "break-even=%g%s\n",
                  p.problem.label.c_str(), pt.gamma, pt.nnz_m, pt.m_d, pt.m_h,
                  static_cast<unsigned long long>(pt.digital_per_it),
                  static_cast<unsigned long long>(pt.hybrid_per_it), pt.break_even_iterations,
                  pt.error.empty() ? "" : " (failed)");
    }
  }
  return kOk;
}

int run_bits(const ExperimentSpec& spec, const fs::path& out) {
  for (const auto& name : spec.problems) {
    const Prepared p = prepare(spec, name);
    for (const auto& pt : cmd_bits_sweep(p, spec, out)) {
      std::printf("%-16s dac=%s adc=%s median iterations %zu (%zu/%zu converged)\n",
                  p.problem.label.c_str(),
                  pt.dac_bits ? std::to_string(pt.dac_bits).c_str() : "off",
                  pt.adc_bits ? std::to_string(pt.adc_bits).c_str() : "off", pt.median_iterations,
                  pt.converged_reps, pt.reps);
    }
  }
  return kOk;
}

int run_bounds(const ExperimentSpec& spec, const fs::path& out) {
  int code = kOk;
  for (const auto& name : spec.problems) {
    const Prepared p = prepare(spec, name);
    const BoundsOutcome o = cmd_bounds(p, spec, out);
    const auto& r = o.report;
    std::printf("%-16s |I-MA|=%.4f |A|=%.4f margin=%.4g sigma_sufficient=%.4g sigma_entry=%.4g "
                "mean_bound=%.4g mean|E|_F=%.4g within_margin=%.3f\n",
                p.problem.label.c_str(), r.margin.norm_i_minus_ma, r.margin.norm_a,
                r.margin.margin, r.margin.sigma_sufficient, r.entry_sigma, r.bounds.mean,
                r.mean_frobenius, r.fraction_within_margin);
    std::printf("%-16s verdict: %s\n", p.problem.label.c_str(),
                std::string(to_string(o.verdict)).c_str());
    if (o.verdict != Verdict::ConvergenceSufficient) code = kCertification;
  }
  return code;
}

int run_gen(const ExperimentSpec& spec, const fs::path& out) {
  for (const auto& name : spec.problems) {
    const ProblemInstance p = make_problem(spec, name);
    fs::create_directories(out);
    std::ostringstream a;
    write_matrix_market(p.A, a, p.A.is_symmetric() ? MatrixSymmetry::Symmetric : MatrixSymmetry::General);
    write_file_atomic(out / (p.label + ".mtx"), a.str());
    std::ostringstream b;
    b << "index,value\n";
    for (std::size_t i = 0; i < p.b.size(); ++i) b << i << ',' << format_number(p.b[i]) << '\n';
    Metadata meta;
    for (const auto& [k, v] : p.meta) meta.emplace_back(k, v);
    write_metadata(b, meta);
    write_file_atomic(out / (p.label + "_rhs.csv"), b.str());
    std::printf("%-16s n=%zu nnz=%zu\n", p.label.c_str(), p.A.rows(), p.A.nnz());
  }
  return kOk;
}

int run_precond(const ExperimentSpec& spec, const fs::path& out, const std::string& type) {
  for (const auto& name : spec.problems) {
    const ProblemInstance p = make_problem(spec, name);
    nlohmann::json j{{"problem", p.label}, {"type", type}, {"n", p.A.rows()}, {"nnz_a", p.A.nnz()}};
    if (type == "spai") {
      const SpaiResult s = spai_build(p.A, spec.spai);
      std::ostringstream m;
      write_matrix_market(s.M, m);
      write_file_atomic(out / (p.label + "_spai.mtx"), m.str());
      double worst = 0.0;
      for (double r : s.column_residual) worst = std::max(worst, r);
      j.update({{"nnz_m", s.M.nnz()},
                {"column_cap", s.column_cap},
                {"capped_columns", s.capped_columns},
                {"max_column_residual", worst},
                {"build_flops", s.build_flops},
                {"warning", s.warning}});
      std::printf("%-16s nnz(M)/n=%.2f capped=%zu max residual=%.3g\n", p.label.c_str(),
                  static_cast<double>(s.M.nnz()) / static_cast<double>(p.A.rows()),
                  s.capped_columns, worst);
    } else if (type == "ilu0") {
      const Ilu0Factors f = ilu0_build(p.A);
      std::ostringstream l, u;
      write_matrix_market(f.L, l);
      write_matrix_market(f.U, u);
      write_file_atomic(out / (p.label + "_ilu0_L.mtx"), l.str());
      write_file_atomic(out / (p.label + "_ilu0_U.mtx"), u.str());
      j.update({{"nnz_l", f.L.nnz()}, {"nnz_u", f.U.nnz()}});
      std::printf("%-16s nnz(L)=%zu nnz(U)=%zu\n", p.label.c_str(), f.L.nnz(), f.U.nnz());
    } else {
      throw CLI::ValidationError("--type", "must be spai or ilu0");
    }
    write_file_atomic(out / (p.label + "_" + type + ".json"), j.dump(2) + "\n");
  }
  return kOk;
}

int run_solve(const ExperimentSpec& spec, const fs::path& out, const std::string& solver) {
  const PrecondKind kind = parse_precond_kind(solver);
  int code = kOk;
  for (const auto& name : spec.problems) {
    Prepared p{make_problem(spec, name), nullptr};
    if (kind == PrecondKind::SpaiDigital || kind == PrecondKind::SpaiHybrid) {
      p.spai = std::make_shared<const SpaiResult>(spai_build(p.problem.A, spec.spai));
    }
    const std::size_t reps = kind == PrecondKind::SpaiHybrid ? spec.reps : 1;
    const SolverRuns runs = run_solver(kind, p, spec, spec.solve, reps);
    if (!runs.error.empty()) throw NumericalError(runs.error);
    nlohmann::json j{{"problem", p.problem.label}, {"solver", solver}, {"repetitions", nlohmann::json::array()}};
    for (const auto& r : runs.reports) {
      j["repetitions"].push_back(to_json(r));
      if (r.status == SolveStatus::Diverged) code = kNumerical;
    }
    j["median_iterations"] = runs.median_iterations();
    write_file_atomic(out / ("solve_" + p.problem.label + "_" + solver + ".json"), j.dump(2) + "\n");
    if (const auto* r = runs.median_report()) {
      std::ostringstream csv;
      write_residual_csv(*r, csv);
      Metadata meta = spec_metadata(spec);
      meta.emplace_back("problem", p.problem.label);
      meta.emplace_back("solver", solver);
      write_metadata(csv, meta);
      write_file_atomic(out / ("solve_" + p.problem.label + "_" + solver + ".csv"), csv.str());
      std::printf("%-16s %-13s %s after %zu iterations, relative residual %.3e, digital FLOPs %llu, "
                  "analog MVMs %llu\n",
                  p.problem.label.c_str(), solver.c_str(), std::string(to_string(r->status)).c_str(),
                  r->iterations, r->residual_history.back(),
                  static_cast<unsigned long long>(r->counter.digital_flops),
                  static_cast<unsigned long long>(r->counter.analog_mvms));
    }
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Richardson iteration with SPAI preconditioning on simulated analog crossbars",
               "crossbar-precond"};
  app.require_subcommand(1);
  Options o;

  app.add_option("--problem", o.problems, "fd3d, fe_square or mm (comma separated)")
      ->delimiter(',')
      ->check(CLI::IsMember({"fd3d", "fe_square", "mm"}));
  app.add_option("--k", o.k, "FD points per dimension")->check(CLI::Range(2, 64));
  app.add_option("--m", o.m, "FE interior points per side")->check(CLI::Range(2, 400));
  app.add_option("--matrix", o.matrix, "MatrixMarket file for problem mm")->check(CLI::ExistingFile);
  app.add_option("--device-config", o.device_config, "key = value device file")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "experiment seed");
  app.add_option("--reps", o.reps, "repetitions of stochastic runs");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--spai-tol", o.spai_tol, "SPAI column residual tolerance");
  app.add_option("--spai-budget-factor", o.spai_budget_factor, "SPAI fill budget / nnz(A)");
  app.add_option("--tol", o.tol, "relative residual tolerance");
  app.add_option("--max-it", o.max_it, "iteration limit");
  app.add_option("--solvers", o.solvers, "solvers for curves/flops")
      ->delimiter(',')
      ->check(CLI::IsMember({"none", "spai-digital", "spai-hybrid", "ilu0"}));
  app.add_option("--gammas", o.gammas, "fill factors for density")->delimiter(',');
  app.add_option("--dac-bits", o.dac_bits, "DAC widths for bits")->delimiter(',');
  app.add_option("--trials", o.trials, "Monte-Carlo draws for bounds");
  app.add_flag("--drop-mean", o.drop_mean, "use the zero-mean limit of the norm bounds");

  const std::vector<std::pair<std::string, std::string>> commands{
      {"table2", "summary table of all solvers per problem"},
      {"curves", "residual histories per solver and repetition"},
      {"flops", "cumulative digital FLOPs against residual"},
      {"density", "SPAI fill sweep with stage-cost table"},
      {"bits", "converter resolution sweep"},
      {"bounds", "error-norm bounds and convergence certification"},
      {"gen", "write test problems as MatrixMarket"},
      {"precond", "build and export a preconditioner"},
      {"solve", "run one solver"}};
  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : commands) subs.push_back(app.add_subcommand(name, help)->fallthrough());
  subs[7]->add_option("--type", o.precond_type, "spai or ilu0")->check(CLI::IsMember({"spai", "ilu0"}));
  subs[8]->add_option("--solver", o.solver, "none, spai-digital, spai-hybrid or ilu0")
      ->check(CLI::IsMember({"none", "spai-digital", "spai-hybrid", "ilu0"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    const ExperimentSpec spec = to_spec(o);
    const fs::path out(o.out);
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "table2") return run_table2(spec, out);
    if (cmd == "curves") return run_curves(spec, out);
    if (cmd == "flops") return run_flops(spec, out);
    if (cmd == "density") return run_density(spec, out);
    if (cmd == "bits") return run_bits(spec, out);
    if (cmd == "bounds") return run_bounds(spec, out);
    if (cmd == "gen") return run_gen(spec, out);
    if (cmd == "precond") return run_precond(spec, out, o.precond_type);
    if (cmd == "solve") return run_solve(spec, out, o.solver);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  }
  return kUsage;
}
