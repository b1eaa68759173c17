// Copyright (c) crossbar-precond contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "crossbar/device.hpp"
#include "crossbar/errors.hpp"
#include "crossbar/rng.hpp"
#include "crossbar/sparse.hpp"
#include "crossbar/spectral.hpp"

namespace crossbar {

struct MarginResult {
  double norm_i_minus_ma = 0.0;
  double norm_a = 0.0;
  /// (1 - |I - MA|) / |A|: admissible |E| for guaranteed contraction.
  double margin = 0.0;
  /// margin / n: admissible per-entry standard deviation of E.
  double sigma_sufficient = 0.0;
  bool nonpositive = false;
  bool estimates_converged = true;
};

/// Sufficient condition on |E| for the noisy preconditioned iteration to
/// contract, from operator-form norm estimates of A and I - M A.
inline MarginResult convergence_margin(const SparseMatrix& a, const SparseMatrix& m,
                                       const PowerOptions& opts = {}) {
  if (!a.square() || !m.square()) throw DimensionError("convergence_margin: matrices not square");
  detail::require_same_size(a.rows(), m.rows(), "convergence_margin");
  const std::size_t n = a.rows();
  auto t = [&](std::span<const double> x) {
    Vector y = spmv(m, spmv(a, x));
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] - y[i];
    return y;
  };
  auto tt = [&](std::span<const double> x) {
    Vector y = spmv_transpose(a, spmv_transpose(m, x));
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] - y[i];
    return y;
  };
  const Estimate e_t = spectral_norm_estimate(t, tt, n, opts);
  const Estimate e_a = spectral_norm_estimate(a, opts);
  MarginResult r;
  r.norm_i_minus_ma = e_t.value;
  r.norm_a = e_a.value;
  r.estimates_converged = e_t.converged && e_a.converged;
  r.margin = e_a.value > 0.0 ? (1.0 - e_t.value) / e_a.value : 0.0;
  r.nonpositive = !(r.margin > 0.0);
  if (r.nonpositive) r.margin = std::min(r.margin, 0.0);
  r.sigma_sufficient = n > 0 ? r.margin / static_cast<double>(n) : 0.0;
  return r;
}

struct DeltaMarginResult {
  /// 1/|A| - |M - A^{-1}|.
  double budget = 0.0;
  double sigma_sufficient = 0.0;
  double norm_a = 0.0;
  double norm_delta = 0.0;
};

inline constexpr std::size_t kDenseInverseLimit = 2000;

/// Admissible |E| when M = A^{-1} + Delta, using a dense inverse of A.
inline DeltaMarginResult delta_margin(const SparseMatrix& a, const SparseMatrix& m,
                                      const PowerOptions& opts = {}) {
  if (!a.square() || !m.square()) throw DimensionError("delta_margin: matrices not square");
  detail::require_same_size(a.rows(), m.rows(), "delta_margin");
  if (a.rows() > kDenseInverseLimit) {
    throw DimensionError("delta_margin: n = " + std::to_string(a.rows()) +
                         " exceeds dense-inverse limit " + std::to_string(kDenseInverseLimit));
  }
  const Eigen::MatrixXd dense = a.to_dense();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(dense);
  if (!lu.isInvertible()) throw NumericalError("delta_margin: A is singular");
  const Eigen::MatrixXd delta = m.to_dense() - lu.inverse();
  DeltaMarginResult r;
  r.norm_a = spectral_norm_estimate(a, opts).value;
  r.norm_delta = spectral_norm_estimate(delta, opts).value;
  r.budget = 1.0 / r.norm_a - r.norm_delta;
  r.sigma_sufficient = r.budget / static_cast<double>(a.rows());
  return r;
}

struct ErrorNormBounds {
  double mean = 0.0;
  double second_moment = 0.0;
  double variance = 0.0;
};

/// Bounds on the norm of an n x n matrix with entries of mean mu and
/// standard deviation sigma. `drop_mean` applies the many-iteration limit in
/// which the mean contribution vanishes.
inline ErrorNormBounds error_norm_bounds(double n, double mu, double sigma, bool drop_mean = false) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("error_norm_bounds: sigma must be >= 0");
  const double mu_eff = drop_mean ? 0.0 : mu;
  const double s2 = mu_eff * mu_eff + sigma * sigma;
  return {n * std::sqrt(s2), n * n * s2, n * n * sigma * sigma};
}

/// Largest per-entry standard deviation of the first-order error matrix:
/// M_ij^2 (s_wm^2 + s_im^2 + s_om^2) + (s_wa max|M|)^2 at the largest |M_ij|.
inline double effective_entry_sigma(const SparseMatrix& m, const DeviceConfig& cfg) {
  const double scale = m.max_abs();
  const double mult2 = cfg.sigma_write_mult * cfg.sigma_write_mult +
                       cfg.sigma_in_mult * cfg.sigma_in_mult +
                       cfg.sigma_out_mult * cfg.sigma_out_mult;
  const double add = cfg.sigma_write_add * scale;
  return std::sqrt(scale * scale * mult2 + add * add);
}

enum class Verdict { ConvergenceSufficient, NotCertified, MarginNonpositive };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::ConvergenceSufficient: return "CONVERGENCE-SUFFICIENT";
    case Verdict::NotCertified: return "NOT CERTIFIED";
    case Verdict::MarginNonpositive: return "MARGIN NONPOSITIVE";
  }
  return "UNKNOWN";
}

/// Certified when the expected-norm bound fits inside the margin.
inline Verdict certify(double margin, double mean_bound) {
  if (!(margin > 0.0)) return Verdict::MarginNonpositive;
  return mean_bound < margin ? Verdict::ConvergenceSufficient : Verdict::NotCertified;
}

struct MonteCarloOptions {
  std::size_t trials = 200;
  bool drop_mean = false;
  std::size_t bootstrap_resamples = 2000;
  double confidence = 0.99;
  /// Estimator settings for the spectral norm of each draw.
  PowerOptions power{1e-6, 2000, 0};
};

struct NoiseBoundReport {
  std::size_t n = 0;
  std::size_t trials = 0;
  MarginResult margin;
  double entry_mu = 0.0;
  double entry_sigma = 0.0;
  ErrorNormBounds bounds;
  Vector frobenius_norms;
  Vector spectral_norms;
  double mean_frobenius = 0.0;
  double var_frobenius = 0.0;
  /// Bootstrap quantiles at `confidence` (upper) and 1 - `confidence` (lower).
  double mean_frobenius_upper = 0.0;
  double var_frobenius_upper = 0.0;
  double mean_frobenius_lower = 0.0;
  double var_frobenius_lower = 0.0;
  /// The whole confidence interval lies below the bound.
  bool mean_bound_holds = false;
  bool var_bound_holds = false;
  /// The samples do not contradict the bound at the given confidence; the
  /// only meaningful check when the bound is tight.
  bool mean_bound_not_rejected = false;
  bool var_bound_not_rejected = false;
  bool spectral_below_frobenius = true;
  double fraction_within_margin = 0.0;
  Verdict verdict = Verdict::NotCertified;
};

namespace detail {

inline double mean_of(const Vector& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double variance_of(const Vector& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double quantile(Vector v, double q) {
  std::sort(v.begin(), v.end());
  const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) - 1;
  return v[std::min(k, v.size() - 1)];
}

}  // namespace detail

/// Samples the error matrix of an analog MVM with M, compares the norms with
/// the closed-form bounds, and counts draws inside the convergence margin.
inline NoiseBoundReport monte_carlo_validate(const SparseMatrix& a, const SparseMatrix& m,
                                             const DeviceConfig& cfg,
                                             const MonteCarloOptions& opts = {}) {
  if (opts.trials < 30) throw std::invalid_argument("monte_carlo_validate: need >= 30 trials");
  NoiseBoundReport rep;
  rep.n = m.rows();
  rep.trials = opts.trials;
  rep.margin = convergence_margin(a, m);
  rep.entry_sigma = effective_entry_sigma(m, cfg);
  rep.bounds = error_norm_bounds(static_cast<double>(rep.n), rep.entry_mu, rep.entry_sigma,
                                 opts.drop_mean);

  const RngStream root = RngStream(cfg.seed).split(2);
  rep.frobenius_norms.resize(opts.trials);
  rep.spectral_norms.resize(opts.trials);
  std::size_t inside = 0;
  for (std::size_t t = 0; t < opts.trials; ++t) {
    RngStream rng = root.split(t);
    const Eigen::MatrixXd e = sample_error_matrix(m, cfg, rng);
    const double fro = e.norm();
    PowerOptions p = opts.power;
    p.seed = mix64(cfg.seed ^ t);
    const double spec = spectral_norm_estimate(e, p).value;
    rep.frobenius_norms[t] = fro;
    rep.spectral_norms[t] = spec;
    if (spec > fro * (1.0 + 1e-12)) rep.spectral_below_frobenius = false;
    if (!rep.margin.nonpositive && spec < rep.margin.margin) ++inside;
  }
  rep.fraction_within_margin = static_cast<double>(inside) / static_cast<double>(opts.trials);
  rep.mean_frobenius = detail::mean_of(rep.frobenius_norms);
  rep.var_frobenius = detail::variance_of(rep.frobenius_norms);

  // Percentile bootstrap of the mean and the variance.
  RngStream boot = RngStream(cfg.seed).split(3);
  Vector means(opts.bootstrap_resamples), vars(opts.bootstrap_resamples);
  Vector sample(opts.trials);
  for (std::size_t b = 0; b < opts.bootstrap_resamples; ++b) {
    for (auto& s : sample) s = rep.frobenius_norms[boot.index(opts.trials)];
    means[b] = detail::mean_of(sample);
    vars[b] = detail::variance_of(sample);
  }
  rep.mean_frobenius_upper = detail::quantile(means, opts.confidence);
  rep.var_frobenius_upper = detail::quantile(vars, opts.confidence);
  rep.mean_frobenius_lower = detail::quantile(means, 1.0 - opts.confidence);
  rep.var_frobenius_lower = detail::quantile(vars, 1.0 - opts.confidence);
  rep.mean_bound_holds = rep.mean_frobenius_upper <= rep.bounds.mean;
  rep.var_bound_holds = rep.var_frobenius_upper <= rep.bounds.variance;
  rep.mean_bound_not_rejected = rep.mean_frobenius_lower <= rep.bounds.mean;
  rep.var_bound_not_rejected = rep.var_frobenius_lower <= rep.bounds.variance;
  rep.verdict = certify(rep.margin.margin, rep.bounds.mean);
  return rep;
}

inline nlohmann::json to_json(const NoiseBoundReport& r) {
  return nlohmann::json{
      {"n", r.n},
      {"trials", r.trials},
      {"norm_i_minus_ma", r.margin.norm_i_minus_ma},
      {"norm_a", r.margin.norm_a},
      {"margin", r.margin.margin},
      {"sigma_sufficient", r.margin.sigma_sufficient},
      {"entry_mu", r.entry_mu},
      {"entry_sigma", r.entry_sigma},
      {"mean_bound", r.bounds.mean},
      {"second_moment_bound", r.bounds.second_moment},
      {"var_bound", r.bounds.variance},
      {"mean_frobenius", r.mean_frobenius},
      {"mean_frobenius_upper99", r.mean_frobenius_upper},
      {"var_frobenius", r.var_frobenius},
      {"var_frobenius_upper99", r.var_frobenius_upper},
      {"mean_frobenius_lower01", r.mean_frobenius_lower},
      {"var_frobenius_lower01", r.var_frobenius_lower},
      {"mean_bound_holds", r.mean_bound_holds},
      {"var_bound_holds", r.var_bound_holds},
      {"mean_bound_not_rejected", r.mean_bound_not_rejected},
      {"var_bound_not_rejected", r.var_bound_not_rejected},
      {"spectral_below_frobenius", r.spectral_below_frobenius},
      {"fraction_within_margin", r.fraction_within_margin},
      {"verdict", std::string(to_string(r.verdict))},
      {"frobenius_norms", r.frobenius_norms},
      {"spectral_norms", r.spectral_norms}};
}

}  // namespace crossbar
