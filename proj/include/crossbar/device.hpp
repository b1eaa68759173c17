// Copyright (c) crossbar-precond contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "crossbar/errors.hpp"
#include "crossbar/rng.hpp"
#include "crossbar/sparse.hpp"

namespace crossbar {

/// Noise magnitudes, converter resolutions and array limits of a simulated
/// crossbar. Additive sigmas are relative to the unit full scale of their
/// stage; a bit width of 0 disables that converter.
struct DeviceConfig {
  double sigma_write_mult = 5.0e-3;
  double sigma_write_add = 5.0e-3;
  double sigma_in_mult = 1.0e-2;
  double sigma_in_add = 1.0e-2;
  double sigma_out_mult = 1.0e-2;
  double sigma_out_add = 1.0e-2;
  unsigned dac_bits = 7;
  unsigned adc_bits = 9;
  std::size_t max_rows = 4000;
  std::size_t max_cols = 4000;
  std::uint64_t seed = 0;
  /// Fixed DAC input range. 0 normalizes every input by its own max-norm.
  double input_full_scale = 0.0;

  static DeviceConfig noiseless() {
    DeviceConfig c;
    c.sigma_write_mult = c.sigma_write_add = 0.0;
    c.sigma_in_mult = c.sigma_in_add = 0.0;
    c.sigma_out_mult = c.sigma_out_add = 0.0;
    c.dac_bits = c.adc_bits = 0;
    return c;
  }

  void validate() const {
    for (double s : {sigma_write_mult, sigma_write_add, sigma_in_mult, sigma_in_add,
                     sigma_out_mult, sigma_out_add}) {
      if (!(s >= 0.0) || !std::isfinite(s)) throw FormatError("device config: sigmas must be >= 0");
    }
    if (dac_bits > 52 || adc_bits > 52) throw FormatError("device config: bit width above 52");
    if (max_rows == 0 || max_cols == 0) throw FormatError("device config: zero array size");
    if (!(input_full_scale >= 0.0) || !std::isfinite(input_full_scale)) {
      throw FormatError("device config: input_full_scale must be >= 0");
    }
  }

  friend bool operator==(const DeviceConfig&, const DeviceConfig&) = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_value(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T v{};
  if (!(in >> v) || !(in >> std::ws).eof()) {
    throw FormatError("device config: bad value for '" + key + "': " + text);
  }
  return v;
}

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Parses `key = value` lines; `#` starts a comment. Keys not mentioned keep
/// their defaults.
inline DeviceConfig parse_device_config(std::istream& in) {
  DeviceConfig c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("device config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (key == "sigma_write_mult") c.sigma_write_mult = detail::parse_value<double>(key, val);
    else if (key == "sigma_write_add") c.sigma_write_add = detail::parse_value<double>(key, val);
    else if (key == "sigma_in_mult") c.sigma_in_mult = detail::parse_value<double>(key, val);
    else if (key == "sigma_in_add") c.sigma_in_add = detail::parse_value<double>(key, val);
    else if (key == "sigma_out_mult") c.sigma_out_mult = detail::parse_value<double>(key, val);
    else if (key == "sigma_out_add") c.sigma_out_add = detail::parse_value<double>(key, val);
    else if (key == "dac_bits") c.dac_bits = detail::parse_value<unsigned>(key, val);
    else if (key == "adc_bits") c.adc_bits = detail::parse_value<unsigned>(key, val);
    else if (key == "max_rows") c.max_rows = detail::parse_value<std::size_t>(key, val);
    else if (key == "max_cols") c.max_cols = detail::parse_value<std::size_t>(key, val);
    else if (key == "seed") c.seed = detail::parse_value<std::uint64_t>(key, val);
    else if (key == "input_full_scale") c.input_full_scale = detail::parse_value<double>(key, val);
    else throw FormatError("device config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

inline DeviceConfig load_device_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("device config: cannot open " + path.string());
  return parse_device_config(in);
}

inline void write_device_config(const DeviceConfig& c, std::ostream& out) {
  out << "sigma_write_mult = " << detail::format_real(c.sigma_write_mult) << '\n'
      << "sigma_write_add = " << detail::format_real(c.sigma_write_add) << '\n'
      << "sigma_in_mult = " << detail::format_real(c.sigma_in_mult) << '\n'
      << "sigma_in_add = " << detail::format_real(c.sigma_in_add) << '\n'
      << "sigma_out_mult = " << detail::format_real(c.sigma_out_mult) << '\n'
      << "sigma_out_add = " << detail::format_real(c.sigma_out_add) << '\n'
      << "dac_bits = " << c.dac_bits << '\n'
      << "adc_bits = " << c.adc_bits << '\n'
      << "max_rows = " << c.max_rows << '\n'
      << "max_cols = " << c.max_cols << '\n'
      << "seed = " << c.seed << '\n'
      << "input_full_scale = " << detail::format_real(c.input_full_scale) << '\n';
}

/// Uniform mid-tread quantizer with 2^bits - 1 levels on [-bound, bound],
/// clipping outside. bits == 0 passes the value through.
inline double quantize(double x, unsigned bits, double bound = 1.0) {
  if (bits == 0) return x;
  const double levels = std::ldexp(1.0, static_cast<int>(bits) - 1) - 1.0;
  if (levels == 0.0) return 0.0;
  const double u = std::clamp(x / bound, -1.0, 1.0);
  return std::round(u * levels) / levels * bound;
}

/// Per-call diagnostics of one analog MVM.
struct MvmTrace {
  double input_scale = 0.0;
  double output_bound = 0.0;
  std::size_t dac_clipped = 0;
  std::size_t adc_clipped = 0;
  /// Filled only when `record_noise` is set before the call.
  bool record_noise = false;
  Vector input_mult_noise;
  Vector output_mult_noise;
};

/// A crossbar holding one programmed matrix.
///
/// Write noise is drawn once in `program` and persists; input and output
/// noise are redrawn on every `multiply` from the device's call stream.
class CrossbarDevice {
 public:
  static CrossbarDevice program(const SparseMatrix& m, const DeviceConfig& cfg) {
    cfg.validate();
    if (m.rows() > cfg.max_rows || m.cols() > cfg.max_cols) {
      throw DimensionError("crossbar: " + std::to_string(m.rows()) + "x" +
                           std::to_string(m.cols()) + " exceeds array size " +
                           std::to_string(cfg.max_rows) + "x" + std::to_string(cfg.max_cols));
    }
    const double scale = m.max_abs();
    if (scale == 0.0) throw NumericalError("crossbar: cannot program an all-zero matrix");

    CrossbarDevice d;
    d.config_ = cfg;
    d.scale_ = scale;
    d.rows_ = m.rows();
    d.cols_ = m.cols();
    d.weights_ = m.to_dense() / scale;
    RngStream write = RngStream(cfg.seed).split(0);
    if (cfg.sigma_write_mult > 0.0) {
      for (Eigen::Index i = 0; i < d.weights_.rows(); ++i) {
        for (Eigen::Index j = 0; j < d.weights_.cols(); ++j) {
          d.weights_(i, j) *= 1.0 + cfg.sigma_write_mult * write.normal();
        }
      }
    }
    if (cfg.sigma_write_add > 0.0) {
      for (Eigen::Index i = 0; i < d.weights_.rows(); ++i) {
        for (Eigen::Index j = 0; j < d.weights_.cols(); ++j) {
          d.weights_(i, j) += cfg.sigma_write_add * write.normal();
        }
      }
    }
    d.calls_ = RngStream(cfg.seed).split(1);
    const double row_sum = d.weights_.cwiseAbs().rowwise().sum().maxCoeff();
    d.output_bound_ = row_sum * (1.0 + 4.0 * cfg.sigma_in_mult + 4.0 * cfg.sigma_in_add) *
                          (1.0 + 4.0 * cfg.sigma_out_mult) +
                      4.0 * cfg.sigma_out_add;
    if (d.output_bound_ == 0.0) d.output_bound_ = 1.0;
    return d;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double scale() const noexcept { return scale_; }
  double output_bound() const noexcept { return output_bound_; }
  const DeviceConfig& config() const noexcept { return config_; }
  /// Programmed conductances in normalized units (true matrix / scale).
  const Eigen::MatrixXd& weights() const noexcept { return weights_; }

  /// Approximates M r. Charges one analog MVM and no digital FLOPs.
  Vector multiply(std::span<const double> r, FlopCounter* counter = nullptr,
                  MvmTrace* trace = nullptr) {
    detail::require_same_size(r.size(), cols_, "analog_mvm");
    const DeviceConfig& c = config_;
    double in_scale = c.input_full_scale > 0.0 ? c.input_full_scale : norm_inf(r);
    if (in_scale == 0.0) in_scale = 1.0;

    Eigen::VectorXd x(static_cast<Eigen::Index>(cols_));
    std::size_t dac_clipped = 0;
    for (std::size_t j = 0; j < cols_; ++j) {
      const double u = r[j] / in_scale;
      if (c.dac_bits > 0 && std::abs(u) > 1.0) ++dac_clipped;
      x[static_cast<Eigen::Index>(j)] = quantize(u, c.dac_bits);
    }
    const bool record = trace && trace->record_noise;
    if (record) {
      trace->input_mult_noise.assign(cols_, 0.0);
      trace->output_mult_noise.assign(rows_, 0.0);
    }
    if (c.sigma_in_mult > 0.0) {
      for (std::size_t j = 0; j < cols_; ++j) {
        const double xi = c.sigma_in_mult * calls_.normal();
        if (record) trace->input_mult_noise[j] = xi;
        x[static_cast<Eigen::Index>(j)] *= 1.0 + xi;
      }
    }
    if (c.sigma_in_add > 0.0) {
      for (std::size_t j = 0; j < cols_; ++j) x[static_cast<Eigen::Index>(j)] += c.sigma_in_add * calls_.normal();
    }

    Eigen::VectorXd y = weights_ * x;

    if (c.sigma_out_mult > 0.0) {
      for (std::size_t i = 0; i < rows_; ++i) {
        const double xi = c.sigma_out_mult * calls_.normal();
        if (record) trace->output_mult_noise[i] = xi;
        y[static_cast<Eigen::Index>(i)] *= 1.0 + xi;
      }
    }
    if (c.sigma_out_add > 0.0) {
      for (std::size_t i = 0; i < rows_; ++i) y[static_cast<Eigen::Index>(i)] += c.sigma_out_add * calls_.normal();
    }

    Vector out(rows_);
    std::size_t adc_clipped = 0;
    const double rescale = scale_ * in_scale;
    for (std::size_t i = 0; i < rows_; ++i) {
      const double v = y[static_cast<Eigen::Index>(i)];
      if (c.adc_bits > 0 && std::abs(v) > output_bound_) ++adc_clipped;
      out[i] = quantize(v, c.adc_bits, output_bound_) * rescale;
    }
    if (counter) ++counter->analog_mvms;
    if (trace) {
      trace->input_scale = in_scale;
      trace->output_bound = output_bound_;
      trace->dac_clipped = dac_clipped;
      trace->adc_clipped = adc_clipped;
    }
    return out;
  }

 private:
  CrossbarDevice() = default;

  DeviceConfig config_;
  double scale_ = 1.0;
  double output_bound_ = 1.0;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Eigen::MatrixXd weights_;
  RngStream calls_;
};

inline Vector analog_mvm(CrossbarDevice& device, std::span<const double> r,
                         FlopCounter* counter = nullptr) {
  return device.multiply(r, counter);
}

/// One draw of the first-order error matrix of an analog MVM with M:
/// E_ij = M_ij (w_ij + in_j + out_i) + s_wa * max|M| * z_ij.
inline Eigen::MatrixXd sample_error_matrix(const SparseMatrix& m, const DeviceConfig& cfg,
                                           RngStream& rng) {
  const auto rows = static_cast<Eigen::Index>(m.rows());
  const auto cols = static_cast<Eigen::Index>(m.cols());
  Eigen::VectorXd in_noise = Eigen::VectorXd::Zero(cols);
  Eigen::VectorXd out_noise = Eigen::VectorXd::Zero(rows);
  if (cfg.sigma_in_mult > 0.0) {
    for (Eigen::Index j = 0; j < cols; ++j) in_noise[j] = cfg.sigma_in_mult * rng.normal();
  }
  if (cfg.sigma_out_mult > 0.0) {
    for (Eigen::Index i = 0; i < rows; ++i) out_noise[i] = cfg.sigma_out_mult * rng.normal();
  }
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(rows, cols);
  const double add = cfg.sigma_write_add * m.max_abs();
  if (add > 0.0) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) e(i, j) = add * rng.normal();
    }
  }
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto c = m.row_cols(i);
    const auto v = m.row_values(i);
    for (std::size_t k = 0; k < c.size(); ++k) {
      const auto ii = static_cast<Eigen::Index>(i);
      const auto jj = static_cast<Eigen::Index>(c[k]);
      const double w = cfg.sigma_write_mult > 0.0 ? cfg.sigma_write_mult * rng.normal() : 0.0;
      e(ii, jj) += v[k] * (w + in_noise[jj] + out_noise[ii]);
    }
  }
  return e;
}

}  // namespace crossbar
