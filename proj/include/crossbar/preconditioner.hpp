// Copyright (c) crossbar-precond contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "crossbar/device.hpp"
#include "crossbar/errors.hpp"
#include "crossbar/ilu0.hpp"
#include "crossbar/sparse.hpp"

namespace crossbar {

enum class PrecondKind { Identity, SpaiDigital, SpaiHybrid, Ilu0 };

inline std::string_view to_string(PrecondKind k) {
  switch (k) {
    case PrecondKind::Identity: return "none";
    case PrecondKind::SpaiDigital: return "spai-digital";
    case PrecondKind::SpaiHybrid: return "spai-hybrid";
    case PrecondKind::Ilu0: return "ilu0";
  }
  return "unknown";
}

inline PrecondKind parse_precond_kind(std::string_view s) {
  if (s == "none") return PrecondKind::Identity;
  if (s == "spai-digital") return PrecondKind::SpaiDigital;
  if (s == "spai-hybrid") return PrecondKind::SpaiHybrid;
  if (s == "ilu0") return PrecondKind::Ilu0;
  throw std::invalid_argument("unknown preconditioner '" + std::string(s) + "'");
}

/// How the residual is mapped to a correction inside Richardson iteration.
class Preconditioner {
 public:
  static Preconditioner identity(std::size_t n) {
    Preconditioner p;
    p.kind_ = PrecondKind::Identity;
    p.n_ = n;
    return p;
  }

  static Preconditioner spai_digital(SparseMatrix m) {
    if (!m.square()) throw DimensionError("preconditioner: M is not square");
    Preconditioner p;
    p.kind_ = PrecondKind::SpaiDigital;
    p.n_ = m.rows();
    p.m_ = std::move(m);
    return p;
  }

  /// Programs M onto a crossbar; the device matrix is the same M.
  static Preconditioner spai_hybrid(SparseMatrix m, const DeviceConfig& cfg) {
    if (!m.square()) throw DimensionError("preconditioner: M is not square");
    Preconditioner p;
    p.kind_ = PrecondKind::SpaiHybrid;
    p.n_ = m.rows();
    p.device_ = CrossbarDevice::program(m, cfg);
    p.m_ = std::move(m);
    return p;
  }

  static Preconditioner ilu0(const SparseMatrix& a) {
    Preconditioner p;
    p.kind_ = PrecondKind::Ilu0;
    p.n_ = a.rows();
    p.ilu_ = ilu0_build(a);
    return p;
  }

  PrecondKind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return n_; }
  const SparseMatrix& matrix() const noexcept { return m_; }
  const CrossbarDevice* device() const noexcept { return device_ ? &*device_ : nullptr; }
  const Ilu0Factors* factors() const noexcept { return ilu_ ? &*ilu_ : nullptr; }

  /// Nonzeros whose multiply-adds are charged digitally per application.
  std::size_t digital_nnz() const noexcept {
    switch (kind_) {
      case PrecondKind::SpaiDigital: return m_.nnz();
      case PrecondKind::Ilu0: return ilu_->L.nnz() + ilu_->U.nnz();
      default: return 0;
    }
  }

  Vector apply(std::span<const double> r, FlopCounter* counter = nullptr) {
    detail::require_same_size(r.size(), n_, "preconditioner apply");
    switch (kind_) {
      case PrecondKind::Identity: return Vector(r.begin(), r.end());
      case PrecondKind::SpaiDigital: return spmv(m_, r, counter);
      case PrecondKind::SpaiHybrid: return device_->multiply(r, counter);
      case PrecondKind::Ilu0: return ilu0_solve(*ilu_, r, counter);
    }
    throw std::logic_error("unreachable preconditioner kind");
  }

 private:
  Preconditioner() = default;

  PrecondKind kind_ = PrecondKind::Identity;
  std::size_t n_ = 0;
  SparseMatrix m_;
  std::optional<CrossbarDevice> device_;
  std::optional<Ilu0Factors> ilu_;
};

}  // namespace crossbar
