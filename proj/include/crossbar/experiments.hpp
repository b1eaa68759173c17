// Copyright (c) crossbar-precond contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crossbar/csv.hpp"
#include "crossbar/device.hpp"
#include "crossbar/matrix_market.hpp"
#include "crossbar/noise_analysis.hpp"
#include "crossbar/preconditioner.hpp"
#include "crossbar/problems.hpp"
#include "crossbar/richardson.hpp"
#include "crossbar/spai.hpp"
#include "crossbar/spectral.hpp"

namespace crossbar {

/// Everything that determines an experiment's output.
struct ExperimentSpec {
  /// fd3d, fe_square or mm (MatrixMarket file given by matrix_path).
  std::vector<std::string> problems{"fd3d"};
  std::size_t fd_k = 8;
  std::size_t fe_m = 25;
  std::string matrix_path;
  DeviceConfig device;
  SpaiParams spai;
  SolveOptions solve;
  std::vector<PrecondKind> solvers{PrecondKind::Identity, PrecondKind::SpaiDigital,
                                   PrecondKind::SpaiHybrid};
  std::size_t reps = 11;
  std::uint64_t seed = 0;
  std::vector<double> gammas{20.0, 40.0, 60.0};
  std::vector<unsigned> dac_bits{5, 7, 9, 11};
  std::size_t bits_max_it = 100;
  std::size_t trials = 200;
  bool drop_mean = false;
};

inline ProblemInstance make_problem(const ExperimentSpec& spec, const std::string& name) {
  if (name == "fd3d") return fd_laplacian_3d(spec.fd_k);
  if (name == "fe_square") return fe_laplacian_square(spec.fe_m);
  if (name == "mm") {
    if (spec.matrix_path.empty()) throw std::invalid_argument("problem 'mm' needs --matrix");
    return matrix_market_problem(spec.matrix_path);
  }
  throw std::invalid_argument("unknown problem '" + name + "'");
}

/// Device seed of repetition `rep`; independent of every other repetition.
inline std::uint64_t repetition_seed(std::uint64_t seed, std::size_t rep) {
  return RngStream(seed).split(rep).key();
}

inline DeviceConfig repetition_device(const ExperimentSpec& spec, std::size_t rep) {
  DeviceConfig c = spec.device;
  c.seed = repetition_seed(spec.seed, rep);
  return c;
}

/// Median for integer counts; the lower middle element for even sizes.
inline std::size_t median_count(std::vector<std::size_t> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

inline double median_real(Vector v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

inline Metadata spec_metadata(const ExperimentSpec& s) {
  std::string problems, solvers, gammas, bits;
  for (const auto& p : s.problems) problems += (problems.empty() ? "" : ",") + p;
  for (auto k : s.solvers) solvers += (solvers.empty() ? "" : ",") + std::string(to_string(k));
  for (double g : s.gammas) gammas += (gammas.empty() ? "" : ",") + format_number(g);
  for (unsigned b : s.dac_bits) bits += (bits.empty() ? "" : ",") + std::to_string(b);
  const DeviceConfig& d = s.device;
  return {{"problems", problems},
          {"fd_k", std::to_string(s.fd_k)},
          {"fe_m", std::to_string(s.fe_m)},
          {"matrix", s.matrix_path.empty() ? "-" : std::filesystem::path(s.matrix_path).filename().string()},
          {"scaling", "jacobi"},
          {"sigma_write_mult", format_number(d.sigma_write_mult)},
          {"sigma_write_add", format_number(d.sigma_write_add)},
          {"sigma_in_mult", format_number(d.sigma_in_mult)},
          {"sigma_in_add", format_number(d.sigma_in_add)},
          {"sigma_out_mult", format_number(d.sigma_out_mult)},
          {"sigma_out_add", format_number(d.sigma_out_add)},
          {"dac_bits", std::to_string(d.dac_bits)},
          {"adc_bits", std::to_string(d.adc_bits)},
          {"max_rows", std::to_string(d.max_rows)},
          {"max_cols", std::to_string(d.max_cols)},
          {"input_full_scale", format_number(d.input_full_scale)},
          {"spai_tol", format_number(s.spai.tol)},
          {"spai_budget_factor", format_number(s.spai.budget_factor)},
          {"spai_max_new_per_step", std::to_string(s.spai.max_new_per_step)},
          {"spai_max_steps_per_column", std::to_string(s.spai.max_steps_per_column)},
          {"tol", format_number(s.solve.tol)},
          {"max_it", std::to_string(s.solve.max_it)},
          {"alpha", format_number(s.solve.alpha)},
          {"solvers", solvers},
          {"reps", std::to_string(s.reps)},
          {"seed", std::to_string(s.seed)},
          {"gammas", gammas},
          {"dac_bits_sweep", bits},
          {"bits_max_it", std::to_string(s.bits_max_it)},
          {"trials", std::to_string(s.trials)},
          {"drop_mean", s.drop_mean ? "1" : "0"}};
}

/// Writes through a temporary file and renames, so readers never see a
/// partial output.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

/// A problem together with its SPAI, built once and shared by all commands.
struct Prepared {
  ProblemInstance problem;
  std::shared_ptr<const SpaiResult> spai;

  std::size_t n() const { return problem.A.rows(); }
};

inline Prepared prepare(const ExperimentSpec& spec, const std::string& name) {
  Prepared p{make_problem(spec, name), nullptr};
  p.spai = std::make_shared<const SpaiResult>(spai_build(p.problem.A, spec.spai));
  return p;
}

/// Outcome of one solver over all its repetitions.
struct SolverRuns {
  PrecondKind kind = PrecondKind::Identity;
  std::vector<SolveReport> reports;
  std::string error;

  std::vector<std::size_t> iterations() const {
    std::vector<std::size_t> v;
    for (const auto& r : reports) v.push_back(r.iterations);
    return v;
  }
  std::size_t median_iterations() const { return median_count(iterations()); }
  std::size_t converged_reps() const {
    return static_cast<std::size_t>(std::count_if(reports.begin(), reports.end(), [](const auto& r) {
      return r.status == SolveStatus::Converged;
    }));
  }
  /// Repetition whose iteration count is the median (first such index).
  const SolveReport* median_report() const {
    const auto m = median_iterations();
    for (const auto& r : reports) {
      if (r.iterations == m) return &r;
    }
    return nullptr;
  }
};

inline Preconditioner make_preconditioner(PrecondKind kind, const Prepared& p,
                                          const DeviceConfig& cfg) {
  switch (kind) {
    case PrecondKind::Identity: return Preconditioner::identity(p.n());
    case PrecondKind::SpaiDigital: return Preconditioner::spai_digital(p.spai->M);
    case PrecondKind::SpaiHybrid: return Preconditioner::spai_hybrid(p.spai->M, cfg);
    case PrecondKind::Ilu0: return Preconditioner::ilu0(p.problem.A);
  }
  throw std::logic_error("unreachable preconditioner kind");
}

/// Runs `kind` `reps` times (hybrid runs use a fresh device per repetition,
/// digital runs simply repeat).
inline SolverRuns run_solver(PrecondKind kind, const Prepared& p, const ExperimentSpec& spec,
                             const SolveOptions& opts, std::size_t reps) {
  SolverRuns runs;
  runs.kind = kind;
  try {
    std::optional<Preconditioner> shared;
    for (std::size_t r = 0; r < reps; ++r) {
      if (kind == PrecondKind::SpaiHybrid) {
        Preconditioner pc = make_preconditioner(kind, p, repetition_device(spec, r));
        runs.reports.push_back(solve(p.problem.A, p.problem.b, pc, opts));
      } else {
        if (!shared) shared = make_preconditioner(kind, p, spec.device);
        runs.reports.push_back(solve(p.problem.A, p.problem.b, *shared, opts));
      }
    }
  } catch (const std::exception& e) {
    runs.error = e.what();
  }
  return runs;
}

inline std::uint64_t per_iteration_flops(PrecondKind kind, const Prepared& p) {
  const std::uint64_t n = p.n();
  const std::uint64_t base = 3 * n + 2 * p.problem.A.nnz();
  switch (kind) {
    case PrecondKind::SpaiDigital: return base + 2 * p.spai->M.nnz();
    case PrecondKind::Ilu0: {
      const Ilu0Factors f = ilu0_build(p.problem.A);
      return base + 2 * (f.L.nnz() + f.U.nnz());
    }
    default: return base;
  }
}

// ---------------------------------------------------------------- table2

struct Table2Row {
  std::string label;
  std::size_t n = 0;
  double kappa = 0.0;
  double nnz_a_per_n = 0.0;
  double nnz_m_per_n = 0.0;
  double rho_i_minus_a = 0.0;
  double rho_i_minus_mda = 0.0;
  /// Mean over repetitions of a power iteration on x -> x - analog(M) A x.
  double rho_i_minus_mha_proxy = 0.0;
  SolverRuns none, digital, hybrid;
  std::size_t m = 0, m_d = 0, m_h = 0;
  std::uint64_t flops_d = 0, flops_h = 0;
  std::uint64_t flops_d_counter = 0, flops_h_counter = 0;
  double s_ideal = 0.0, s_total = 0.0;
};

inline Table2Row table2_row(const Prepared& p, const ExperimentSpec& spec) {
  Table2Row row;
  const SparseMatrix& a = p.problem.A;
  const SparseMatrix& m = p.spai->M;
  const std::size_t n = p.n();
  row.label = p.problem.label;
  row.n = n;
  const PowerOptions popts{1e-8, 5000, spec.seed};
  row.kappa = condition_number_estimate(a, popts).value;
  row.nnz_a_per_n = static_cast<double>(a.nnz()) / static_cast<double>(n);
  row.nnz_m_per_n = static_cast<double>(m.nnz()) / static_cast<double>(n);
  row.rho_i_minus_a = spectral_radius_estimate(
                          [&](std::span<const double> x) {
                            Vector y = spmv(a, x);
                            for (std::size_t i = 0; i < n; ++i) y[i] = x[i] - y[i];
                            return y;
                          },
                          n, popts)
                          .value;
  row.rho_i_minus_mda = spectral_radius_estimate(
                            [&](std::span<const double> x) {
                              Vector y = spmv(m, spmv(a, x));
                              for (std::size_t i = 0; i < n; ++i) y[i] = x[i] - y[i];
                              return y;
                            },
                            n, popts)
                            .value;
  double proxy = 0.0;
  for (std::size_t r = 0; r < spec.reps; ++r) {
    DeviceConfig cfg = repetition_device(spec, r);
    cfg.seed = mix64(cfg.seed ^ 0x7072'6f78'79ULL);
    CrossbarDevice dev = CrossbarDevice::program(m, cfg);
    proxy += spectral_radius_estimate(
                 [&](std::span<const double> x) {
                   Vector y = dev.multiply(spmv(a, x));
                   for (std::size_t i = 0; i < n; ++i) y[i] = x[i] - y[i];
                   return y;
                 },
                 n, PowerOptions{1e-3, 100, spec.seed})
                 .value;
  }
  row.rho_i_minus_mha_proxy = spec.reps ? proxy / static_cast<double>(spec.reps) : 0.0;

  row.none = run_solver(PrecondKind::Identity, p, spec, spec.solve, 1);
  row.digital = run_solver(PrecondKind::SpaiDigital, p, spec, spec.solve, 1);
  row.hybrid = run_solver(PrecondKind::SpaiHybrid, p, spec, spec.solve, spec.reps);
  row.m = row.none.median_iterations();
  row.m_d = row.digital.median_iterations();
  row.m_h = row.hybrid.median_iterations();
  row.flops_d = flops_digital_run(row.m_d, n, a.nnz(), m.nnz(), FlopMode::Digital);
  row.flops_h = flops_digital_run(row.m_h, n, a.nnz(), m.nnz(), FlopMode::Hybrid);
  if (const auto* r = row.digital.median_report()) row.flops_d_counter = r->counter.digital_flops;
  if (const auto* r = row.hybrid.median_report()) row.flops_h_counter = r->counter.digital_flops;
  row.s_ideal = speedup_ideal(static_cast<double>(n), static_cast<double>(a.nnz()),
                              static_cast<double>(m.nnz()));
  if (row.m_h >= 1) {
    row.s_total = speedup_total(static_cast<double>(row.m_d), static_cast<double>(row.m_h),
                                static_cast<double>(n), static_cast<double>(a.nnz()),
                                static_cast<double>(m.nnz()));
  }
  return row;
}

inline std::string status_cell(const SolverRuns& runs) {
  if (!runs.error.empty()) return "error";
  const auto* r = runs.median_report();
  return r ? std::string(to_string(r->status)) : "none";
}

inline std::string table2_csv(const std::vector<Table2Row>& rows, const ExperimentSpec& spec) {
  std::ostringstream out;
  out << "problem,n,kappa,nnz_a_per_n,nnz_m_per_n,rho_i_minus_a,rho_i_minus_mda,"
         "rho_i_minus_mha_proxy,m,m_status,m_d,m_d_status,m_h_median,m_h_status,"
         "m_h_converged_reps,flops_d,flops_h,flops_d_counter,flops_h_counter,speedup_ideal,"
         "speedup_total\n";
  for (const auto& r : rows) {
    out << r.label << ',' << r.n << ',' << format_number(r.kappa) << ','
        << format_number(r.nnz_a_per_n) << ',' << format_number(r.nnz_m_per_n) << ','
        << format_number(r.rho_i_minus_a) << ',' << format_number(r.rho_i_minus_mda) << ','
        << format_number(r.rho_i_minus_mha_proxy) << ',' << r.m << ',' << status_cell(r.none)
        << ',' << r.m_d << ',' << status_cell(r.digital) << ',' << r.m_h << ','
        << status_cell(r.hybrid) << ',' << r.hybrid.converged_reps() << ',' << r.flops_d << ','
        << r.flops_h << ',' << r.flops_d_counter << ',' << r.flops_h_counter << ','
        << format_number(r.s_ideal) << ',' << format_number(r.s_total) << '\n';
  }
  Metadata meta = spec_metadata(spec);
  meta.emplace_back("rho_i_minus_mha_proxy", "mean power-iteration estimate on x - analog(M) A x");
  write_metadata(out, meta);
  return out.str();
}

inline nlohmann::json table2_json(const std::vector<Table2Row>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"problem", r.label},
                   {"n", r.n},
                   {"kappa", r.kappa},
                   {"nnz_a_per_n", r.nnz_a_per_n},
                   {"nnz_m_per_n", r.nnz_m_per_n},
                   {"rho_i_minus_a", r.rho_i_minus_a},
                   {"rho_i_minus_mda", r.rho_i_minus_mda},
                   {"rho_i_minus_mha_proxy", r.rho_i_minus_mha_proxy},
                   {"m", r.m},
                   {"m_status", status_cell(r.none)},
                   {"m_d", r.m_d},
                   {"m_d_status", status_cell(r.digital)},
                   {"m_h_median", r.m_h},
                   {"m_h_status", status_cell(r.hybrid)},
                   {"m_h_reps", r.hybrid.iterations()},
                   {"flops_d", r.flops_d},
                   {"flops_h", r.flops_h},
                   {"speedup_ideal", r.s_ideal},
                   {"speedup_total", r.s_total}});
  }
  return arr;
}

// ---------------------------------------------------------------- curves

/// Median over repetitions at each iteration index (repetitions that
/// stopped earlier drop out of later indices).
inline Vector median_history(const SolverRuns& runs) {
  std::size_t len = 0;
  for (const auto& r : runs.reports) len = std::max(len, r.residual_history.size());
  Vector out(len);
  for (std::size_t i = 0; i < len; ++i) {
    Vector at;
    for (const auto& r : runs.reports) {
      if (i < r.residual_history.size()) at.push_back(r.residual_history[i]);
    }
    out[i] = median_real(at);
  }
  return out;
}

inline std::string history_csv(const Vector& h, const Metadata& meta) {
  std::ostringstream out;
  out << "iteration,relative_residual\n";
  for (std::size_t i = 0; i < h.size(); ++i) out << i << ',' << format_number(h[i]) << '\n';
  write_metadata(out, meta);
  return out.str();
}

/// Residual history files per solver and repetition, plus a median file.
inline std::vector<SolverRuns> cmd_residual_curves(const Prepared& p, const ExperimentSpec& spec,
                                                   const std::filesystem::path& out_dir) {
  std::vector<SolverRuns> all;
  for (auto kind : spec.solvers) {
    SolverRuns runs = run_solver(kind, p, spec, spec.solve, spec.reps);
    Metadata meta = spec_metadata(spec);
    meta.emplace_back("problem", p.problem.label);
    meta.emplace_back("solver", std::string(to_string(kind)));
    if (!runs.error.empty()) meta.emplace_back("error", runs.error);
    const std::string stem = "curves_" + p.problem.label + "_" + std::string(to_string(kind));
    for (std::size_t r = 0; r < runs.reports.size(); ++r) {
      Metadata m = meta;
      m.emplace_back("repetition", std::to_string(r));
      m.emplace_back("status", std::string(to_string(runs.reports[r].status)));
      write_file_atomic(out_dir / (stem + "_rep" + std::to_string(r) + ".csv"),
                        history_csv(runs.reports[r].residual_history, m));
    }
    write_file_atomic(out_dir / (stem + "_median.csv"), history_csv(median_history(runs), meta));
    all.push_back(std::move(runs));
  }
  return all;
}

// ---------------------------------------------------------------- flops

struct FlopCurve {
  PrecondKind kind = PrecondKind::Identity;
  std::uint64_t per_iteration = 0;
  /// Representative (median-iteration) run.
  Vector residuals;
  std::size_t iterations = 0;
  SolveStatus status = SolveStatus::MaxIterations;
  /// Digital FLOPs spent when the tolerance was met; 0 if never met.
  std::uint64_t flops_to_tol = 0;
};

inline std::vector<FlopCurve> flop_curves(const Prepared& p, const ExperimentSpec& spec) {
  std::vector<FlopCurve> curves;
  for (auto kind : spec.solvers) {
    const SolverRuns runs = run_solver(kind, p, spec, spec.solve, kind == PrecondKind::SpaiHybrid ? spec.reps : 1);
    FlopCurve c;
    c.kind = kind;
    c.per_iteration = per_iteration_flops(kind, p);
    if (const auto* r = runs.median_report()) {
      c.residuals = r->residual_history;
      c.iterations = r->iterations;
      c.status = r->status;
      if (r->status == SolveStatus::Converged) c.flops_to_tol = r->counter.digital_flops;
    }
    curves.push_back(std::move(c));
  }
  return curves;
}

inline void cmd_flops_vs_residual(const Prepared& p, const ExperimentSpec& spec,
                                  const std::filesystem::path& out_dir,
                                  std::vector<FlopCurve>* result = nullptr) {
  const std::vector<FlopCurve> curves = flop_curves(p, spec);
  std::ostringstream out;
  out << "solver,iteration,cumulative_digital_flops,relative_residual\n";
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.residuals.size(); ++i) {
      out << to_string(c.kind) << ',' << i << ',' << i * c.per_iteration << ','
          << format_number(c.residuals[i]) << '\n';
    }
  }
  Metadata meta = spec_metadata(spec);
  meta.emplace_back("problem", p.problem.label);
  for (const auto& c : curves) {
    const std::string k(to_string(c.kind));
    meta.emplace_back(k + ".iterations", std::to_string(c.iterations));
    meta.emplace_back(k + ".status", std::string(to_string(c.status)));
    meta.emplace_back(k + ".flops_per_iteration", std::to_string(c.per_iteration));
    meta.emplace_back(k + ".flops_to_tol", std::to_string(c.flops_to_tol));
  }
  write_metadata(out, meta);
  write_file_atomic(out_dir / ("flops_" + p.problem.label + ".csv"), out.str());
  if (result) *result = curves;
}

// ---------------------------------------------------------------- density

/// Writing M to the array is modeled as the cost of this many digital MVMs
/// with M.
inline constexpr double kProgramCostMvms = 7.0;

struct DensityPoint {
  double gamma = 0.0;
  std::size_t nnz_m = 0;
  std::size_t budget = 0;
  std::size_t capped_columns = 0;
  double build_flops = 0.0;
  double program_cost_flops = 0.0;
  std::uint64_t digital_per_it = 0;
  std::uint64_t hybrid_per_it = 0;
  std::size_t m_d = 0;
  std::size_t m_h = 0;
  SolveStatus digital_status = SolveStatus::MaxIterations;
  std::size_t hybrid_converged_reps = 0;
  double break_even_iterations = 0.0;
  std::string error;
};

inline std::vector<DensityPoint> cmd_density_sweep(const Prepared& base, const ExperimentSpec& spec,
                                                   const std::filesystem::path& out_dir) {
  std::vector<DensityPoint> pts;
  const SparseMatrix& a = base.problem.A;
  const std::size_t n = base.n();
  for (double gamma : spec.gammas) {
    DensityPoint pt;
    pt.gamma = gamma;
    pt.budget = static_cast<std::size_t>(gamma * static_cast<double>(a.nnz()));
    std::ostringstream curve;
    curve << "solver,iteration,cumulative_digital_flops,relative_residual\n";
    try {
      SpaiParams sp = spec.spai;
      sp.budget_factor = gamma;
      Prepared p{base.problem, std::make_shared<const SpaiResult>(spai_build(a, sp))};
      const SparseMatrix& m = p.spai->M;
      pt.nnz_m = m.nnz();
      pt.capped_columns = p.spai->capped_columns;
      pt.build_flops = p.spai->build_flops;
      pt.program_cost_flops = kProgramCostMvms * 2.0 * static_cast<double>(m.nnz());
      pt.digital_per_it = per_iteration_flops(PrecondKind::SpaiDigital, p);
      pt.hybrid_per_it = per_iteration_flops(PrecondKind::SpaiHybrid, p);
      pt.break_even_iterations =
          pt.program_cost_flops / static_cast<double>(pt.digital_per_it - pt.hybrid_per_it);
      const SolverRuns d = run_solver(PrecondKind::SpaiDigital, p, spec, spec.solve, 1);
      const SolverRuns h = run_solver(PrecondKind::SpaiHybrid, p, spec, spec.solve, spec.reps);
      pt.m_d = d.median_iterations();
      pt.m_h = h.median_iterations();
      if (const auto* r = d.median_report()) pt.digital_status = r->status;
      pt.hybrid_converged_reps = h.converged_reps();
      for (const auto* runs : {&d, &h}) {
        const auto* r = runs->median_report();
        if (!r) continue;
        const auto per = runs == &d ? pt.digital_per_it : pt.hybrid_per_it;
        for (std::size_t i = 0; i < r->residual_history.size(); ++i) {
          curve << to_string(runs->kind) << ',' << i << ',' << i * per << ','
                << format_number(r->residual_history[i]) << '\n';
        }
      }
    } catch (const std::exception& e) {
      pt.error = e.what();
    }
    Metadata meta = spec_metadata(spec);
    meta.emplace_back("problem", base.problem.label);
    meta.emplace_back("gamma", format_number(gamma));
    meta.emplace_back("budget", std::to_string(pt.budget));
    meta.emplace_back("nnz_m", std::to_string(pt.nnz_m));
    if (!pt.error.empty()) meta.emplace_back("error", pt.error);
    write_metadata(curve, meta);
    write_file_atomic(out_dir / ("density_" + base.problem.label + "_gamma" + format_number(gamma) + ".csv"),
                      curve.str());
    pts.push_back(pt);
  }

  std::ostringstream table;
  table << "gamma,budget,nnz_m,nnz_m_over_nnz_a,capped_columns,build_flops,program_cost_flops,"
           "digital_flops_per_it,hybrid_flops_per_it,analog_mvms_per_it,m_d,m_h_median,"
           "hybrid_converged_reps,break_even_iterations,error\n";
  for (const auto& pt : pts) {
    table << format_number(pt.gamma) << ',' << pt.budget << ',' << pt.nnz_m << ','
          << format_number(static_cast<double>(pt.nnz_m) / static_cast<double>(a.nnz())) << ','
          << pt.capped_columns << ',' << format_number(pt.build_flops) << ','
          << format_number(pt.program_cost_flops) << ',' << pt.digital_per_it << ','
          << pt.hybrid_per_it << ",1," << pt.m_d << ',' << pt.m_h << ','
          << pt.hybrid_converged_reps << ',' << format_number(pt.break_even_iterations) << ','
          << (pt.error.empty() ? "" : "failed") << '\n';
  }
  Metadata meta = spec_metadata(spec);
  meta.emplace_back("problem", base.problem.label);
  meta.emplace_back("n", std::to_string(n));
  meta.emplace_back("nnz_a", std::to_string(a.nnz()));
  meta.emplace_back("program_cost_model", "7 digital MVMs with M");
  write_metadata(table, meta);
  write_file_atomic(out_dir / ("density_" + base.problem.label + "_stages.csv"), table.str());
  return pts;
}

// ---------------------------------------------------------------- bits

struct BitsPoint {
  unsigned dac_bits = 0;
  unsigned adc_bits = 0;
  std::size_t median_iterations = 0;
  std::size_t converged_reps = 0;
  std::size_t reps = 0;
  SolveStatus median_status = SolveStatus::MaxIterations;
  std::vector<std::size_t> iterations;
};

/// Hybrid solves with ADC bits = DAC bits + 2, then with converters off.
inline std::vector<BitsPoint> cmd_bits_sweep(const Prepared& p, const ExperimentSpec& spec,
                                             const std::filesystem::path& out_dir) {
  std::vector<unsigned> settings = spec.dac_bits;
  settings.push_back(0);
  SolveOptions opts = spec.solve;
  opts.max_it = spec.bits_max_it;
  std::vector<BitsPoint> pts;
  for (unsigned dac : settings) {
    ExperimentSpec s = spec;
    s.device.dac_bits = dac;
    s.device.adc_bits = dac == 0 ? 0 : dac + 2;
    const SolverRuns runs = run_solver(PrecondKind::SpaiHybrid, p, s, opts, spec.reps);
    BitsPoint pt;
    pt.dac_bits = dac;
    pt.adc_bits = s.device.adc_bits;
    pt.iterations = runs.iterations();
    pt.median_iterations = runs.median_iterations();
    pt.converged_reps = runs.converged_reps();
    pt.reps = runs.reports.size();
    if (const auto* r = runs.median_report()) pt.median_status = r->status;
    pts.push_back(pt);
  }
  std::ostringstream out;
  out << "dac_bits,adc_bits,median_iterations,converged_reps,reps,status\n";
  for (const auto& pt : pts) {
    out << (pt.dac_bits == 0 ? std::string("off") : std::to_string(pt.dac_bits)) << ','
        << (pt.adc_bits == 0 ? std::string("off") : std::to_string(pt.adc_bits)) << ','
        << pt.median_iterations << ',' << pt.converged_reps << ',' << pt.reps << ','
        << to_string(pt.median_status) << '\n';
  }
  Metadata meta = spec_metadata(spec);
  meta.emplace_back("problem", p.problem.label);
  meta.emplace_back("adc_rule", "dac + 2");
  write_metadata(out, meta);
  write_file_atomic(out_dir / ("bits_" + p.problem.label + ".csv"), out.str());
  return pts;
}

// ---------------------------------------------------------------- bounds

struct BoundsOutcome {
  NoiseBoundReport report;
  std::optional<DeltaMarginResult> delta;
  Verdict verdict = Verdict::NotCertified;
};

inline BoundsOutcome cmd_bounds(const Prepared& p, const ExperimentSpec& spec,
                                const std::filesystem::path& out_dir) {
  BoundsOutcome o;
  MonteCarloOptions mc;
  mc.trials = spec.trials;
  mc.drop_mean = spec.drop_mean;
  DeviceConfig cfg = spec.device;
  cfg.seed = repetition_seed(spec.seed, 0);
  o.report = monte_carlo_validate(p.problem.A, p.spai->M, cfg, mc);
  o.verdict = o.report.verdict;
  nlohmann::json j = to_json(o.report);
  j["problem"] = p.problem.label;
  if (p.n() <= kDenseInverseLimit) {
    o.delta = delta_margin(p.problem.A, p.spai->M);
    j["delta_budget"] = o.delta->budget;
    j["delta_sigma_sufficient"] = o.delta->sigma_sufficient;
    j["norm_m_minus_a_inverse"] = o.delta->norm_delta;
    j["delta_verdict"] = std::string(to_string(certify(o.delta->budget, o.report.bounds.mean)));
  }
  nlohmann::json meta = nlohmann::json::object();
  for (const auto& [k, v] : spec_metadata(spec)) meta[k] = v;
  j["spec"] = meta;
  write_file_atomic(out_dir / ("bounds_" + p.problem.label + ".json"), j.dump(2) + "\n");
  return o;
}

}  // namespace crossbar
