#pragma once

#include <limits>

#include "iongate/fock.hpp"
#include "iongate/types.hpp"

#include <nlohmann/json_fwd.hpp>

namespace iongate {

struct ProtocolSpec;

struct NoiseModel {
  double heating_rate = 0.0;  // quanta/s
  double coherence_time_ms = std::numeric_limits<double>::infinity();
  double step_us = 1.0;       // channel Trotterization step
  // dephasing exponent exp(−γ_φ t (n−m)² · factor); 0.5 is the number-operator
  // dissipator convention, the plain-rate reading uses 1.0
  double dephasing_factor = 0.5;

  enum class DephaseMode { EndOfBlock, PerStep };
  DephaseMode dephase_mode = DephaseMode::EndOfBlock;

  enum class HeatingKind { KrausPair, TwoJump };
  HeatingKind heating_kind = HeatingKind::KrausPair;

  double gamma_phi_per_s() const {
    return std::isinf(coherence_time_ms) ? 0.0 : 1.0 / (coherence_time_ms * 1e-3);
  }
  double quanta_per_step() const { return heating_rate * step_us * 1e-6; }

  void validate() const {
    if (heating_rate < 0) throw std::invalid_argument("NoiseModel: heating_rate < 0");
    if (!(coherence_time_ms > 0)) throw std::invalid_argument("NoiseModel: T_coh <= 0");
    if (!(step_us > 0)) throw std::invalid_argument("NoiseModel: step <= 0");
    if (quanta_per_step() >= 0.1)
      throw std::invalid_argument("NoiseModel: heating_rate*step too large for the Kraus pair");
  }

  nlohmann::ordered_json to_json() const;
  static NoiseModel from_json(const nlohmann::json& j);
};

/// One heating step. KrausPair mode applies K0 = √(1−ṅΔt)·𝟙, K1 = √(ṅΔt)·a†
/// and renormalizes the trace (the pair is not exactly trace preserving on
/// excited states); TwoJump adds the matching a-dissipator.
Matrix heating_step(const Matrix& rho, const NoiseModel& model);

/// Fock-basis dephasing: ρ_nm → ρ_nm exp(−γ_φ·elapsed·(n−m)²·factor).
/// Acts on the motional index; joint qubit⊗oscillator matrices are handled
/// blockwise. Diagonal untouched, trace exactly preserved.
Matrix dephasing_step(const Matrix& rho, const NoiseModel& model, double elapsed_us);

/// Protocol run with channels interleaved: unitary sub-steps of length Δt
/// alternate with heating, dephasing per dephase_mode.
JointState noisy_evolution(const ProtocolSpec& spec, const JointState& input,
                           const NoiseModel& model);

}  // namespace iongate
