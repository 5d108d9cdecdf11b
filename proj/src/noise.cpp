#include "iongate/noise.hpp"

#include <cmath>

#include "iongate/protocol.hpp"
#include "json_util.hpp"

#include <nlohmann/json.hpp>

namespace iongate {

using nlohmann::json;
using nlohmann::ordered_json;

Matrix heating_step(const Matrix& rho, const NoiseModel& model) {
  model.validate();
  const double p = model.quanta_per_step();
  if (p == 0.0) return rho;

  auto step_block = [&](const Matrix& blk) {
    const int d = static_cast<int>(blk.rows());
    // K1 ρ K1† with K1 = √p a†: (a† ρ a)_{mn} = √(m n) ρ_{m−1,n−1}
    Matrix out = (1.0 - p) * blk;
    for (int m = 1; m < d; ++m)
      for (int n = 1; n < d; ++n)
        out(m, n) += p * std::sqrt(static_cast<double>(m) * n) * blk(m - 1, n - 1);
    if (model.heating_kind == NoiseModel::HeatingKind::TwoJump) {
      // matching downward jump K2 = √p a and its anticommutator correction
      for (int m = 0; m + 1 < d; ++m)
        for (int n = 0; n + 1 < d; ++n)
          out(m, n) += p * std::sqrt(static_cast<double>(m + 1) * (n + 1)) * blk(m + 1, n + 1);
      for (int m = 0; m < d; ++m)
        for (int n = 0; n < d; ++n) out(m, n) -= 0.5 * p * (m + n) * blk(m, n);
    }
    return out;
  };

  Matrix out = step_block(rho);
  const double tr = out.trace().real();
  out /= tr;
  return out;
}

Matrix dephasing_step(const Matrix& rho, const NoiseModel& model, double elapsed_us) {
  if (elapsed_us < 0) throw std::invalid_argument("dephasing_step: negative elapsed time");
  const double gamma = model.gamma_phi_per_s();
  if (gamma == 0.0 || elapsed_us == 0.0) return rho;
  const double scale = gamma * elapsed_us * 1e-6 * model.dephasing_factor;
  const int n = static_cast<int>(rho.rows());
  Matrix out = rho;
  for (int m = 0; m < n; ++m)
    for (int k = 0; k < n; ++k) {
      const int diff = m - k;
      if (diff != 0) out(m, k) *= std::exp(-scale * diff * diff);
    }
  return out;
}

namespace {

Matrix dephase_joint(const Matrix& rho, const NoiseModel& model, double elapsed_us, int d) {
  if (rho.rows() == d) return dephasing_step(rho, model, elapsed_us);
  // joint: decay indexed by motional quantum numbers only
  const double gamma = model.gamma_phi_per_s();
  if (gamma == 0.0 || elapsed_us == 0.0) return rho;
  const double scale = gamma * elapsed_us * 1e-6 * model.dephasing_factor;
  Matrix out = rho;
  for (int qi = 0; qi < 2; ++qi)
    for (int qj = 0; qj < 2; ++qj)
      for (int m = 0; m < d; ++m)
        for (int n = 0; n < d; ++n) {
          const int diff = m - n;
          if (diff != 0)
            out(qi * d + m, qj * d + n) *= std::exp(-scale * diff * diff);
        }
  return out;
}

Matrix heat_joint(const Matrix& rho, const NoiseModel& model, int d) {
  if (rho.rows() == d) return heating_step(rho, model);
  const double p = model.quanta_per_step();
  if (p == 0.0) return rho;
  Matrix out = (1.0 - p) * rho;
  auto raise = [&](int qi, int qj) {
    for (int m = 1; m < d; ++m)
      for (int n = 1; n < d; ++n)
        out(qi * d + m, qj * d + n) +=
            p * std::sqrt(static_cast<double>(m) * n) * rho(qi * d + m - 1, qj * d + n - 1);
  };
  auto lower = [&](int qi, int qj) {
    for (int m = 0; m + 1 < d; ++m)
      for (int n = 0; n + 1 < d; ++n)
        out(qi * d + m, qj * d + n) +=
            p * std::sqrt(static_cast<double>(m + 1) * (n + 1)) *
            rho(qi * d + m + 1, qj * d + n + 1);
  };
  for (int qi = 0; qi < 2; ++qi)
    for (int qj = 0; qj < 2; ++qj) {
      raise(qi, qj);
      if (model.heating_kind == NoiseModel::HeatingKind::TwoJump) {
        lower(qi, qj);
        for (int m = 0; m < d; ++m)
          for (int n = 0; n < d; ++n)
            out(qi * d + m, qj * d + n) -= 0.5 * p * (m + n) * rho(qi * d + m, qj * d + n);
      }
    }
  const double tr = out.trace().real();
  return out / tr;
}

}  // namespace

JointState noisy_evolution(const ProtocolSpec& spec, const JointState& input,
                           const NoiseModel& model) {
  model.validate();
  JointState joint_in = input;
  if (!input.has_qubit())
    joint_in = input.tensor_qubit(spec.qubit_init == QubitInit::PlusY ? qubit_plus_y()
                                                                      : qubit_minus_y());
  const int d = spec.hilbert.dim_fock;
  Matrix rho = joint_in.to_density();

  ProtocolEngine engine(spec);
  const bool heat = model.heating_rate > 0.0;
  const bool dephase = model.gamma_phi_per_s() > 0.0;

  for (const GateBlock* b : engine.blocks()) {
    const double duration = b->time_cost();
    if (duration == 0.0) {
      Matrix u = engine.block_unitary_joint(*b);
      rho = u * rho * u.adjoint();
      continue;
    }
    if (!heat) {
      Matrix u = engine.block_unitary_joint(*b);
      rho = u * rho * u.adjoint();
    } else {
      // Trotter split: full Δt sub-steps plus the remainder, heating after each
      const int full_steps = static_cast<int>(std::floor(duration / model.step_us));
      const double remainder = duration - full_steps * model.step_us;
      GateBlock sub = *b;
      if (full_steps > 0) {
        sub.duration = model.step_us;
        Matrix u_step = engine.block_unitary_joint(sub);
        for (int s = 0; s < full_steps; ++s) {
          rho = u_step * rho * u_step.adjoint();
          rho = heat_joint(rho, model, d);
          if (dephase && model.dephase_mode == NoiseModel::DephaseMode::PerStep)
            rho = dephase_joint(rho, model, model.step_us, d);
        }
      }
      if (remainder > 1e-12) {
        sub.duration = remainder;
        Matrix u_rem = engine.block_unitary_joint(sub);
        rho = u_rem * rho * u_rem.adjoint();
        NoiseModel rem_model = model;
        rem_model.step_us = remainder;
        rho = heat_joint(rho, rem_model, d);
        if (dephase && model.dephase_mode == NoiseModel::DephaseMode::PerStep)
          rho = dephase_joint(rho, model, remainder, d);
      }
    }
    if (dephase && model.dephase_mode == NoiseModel::DephaseMode::EndOfBlock)
      rho = dephase_joint(rho, model, duration, d);
  }
  rho = 0.5 * (rho + rho.adjoint());
  rho /= rho.trace().real();
  return JointState::density(std::move(rho), spec.hilbert, true);
}

ordered_json NoiseModel::to_json() const {
  ordered_json j;
  j["heating_rate"] = heating_rate;
  if (!std::isinf(coherence_time_ms)) j["coherence_time_ms"] = coherence_time_ms;
  j["step_us"] = step_us;
  j["dephasing_factor"] = dephasing_factor;
  j["dephase_mode"] = dephase_mode == DephaseMode::EndOfBlock ? "end-of-block" : "per-step";
  j["heating_kind"] = heating_kind == HeatingKind::KrausPair ? "kraus-pair" : "two-jump";
  return j;
}

NoiseModel NoiseModel::from_json(const json& j) {
  check_keys(j,
             {"heating_rate", "coherence_time_ms", "step_us", "dephasing_factor",
              "dephase_mode", "heating_kind"},
             "noise");
  NoiseModel m;
  m.heating_rate = get_or<double>(j, "heating_rate", 0.0);
  m.coherence_time_ms =
      get_or<double>(j, "coherence_time_ms", std::numeric_limits<double>::infinity());
  m.step_us = get_or<double>(j, "step_us", 1.0);
  m.dephasing_factor = get_or<double>(j, "dephasing_factor", 0.5);
  const std::string dm = get_or<std::string>(j, "dephase_mode", "end-of-block");
  if (dm == "end-of-block")
    m.dephase_mode = DephaseMode::EndOfBlock;
  else if (dm == "per-step")
    m.dephase_mode = DephaseMode::PerStep;
  else
    throw std::invalid_argument("noise: dephase_mode must be end-of-block or per-step");
  const std::string hk = get_or<std::string>(j, "heating_kind", "kraus-pair");
  if (hk == "kraus-pair")
    m.heating_kind = HeatingKind::KrausPair;
  else if (hk == "two-jump")
    m.heating_kind = HeatingKind::TwoJump;
  else
    throw std::invalid_argument("noise: heating_kind must be kraus-pair or two-jump");
  m.validate();
  return m;
}

}  // namespace iongate
