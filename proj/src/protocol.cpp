#include "iongate/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "iongate/noise.hpp"
#include "json_util.hpp"

#include <nlohmann/json.hpp>

namespace iongate {

using nlohmann::json;
using nlohmann::ordered_json;

GateBlock GateBlock::displace(Complex beta) {
  GateBlock b;
  b.kind = BlockKind::Displace;
  b.label = "D";
  b.beta = beta;
  return b;
}

GateBlock GateBlock::squeeze(double r) {
  GateBlock b;
  b.kind = BlockKind::Squeeze;
  b.label = "S";
  b.r = r;
  return b;
}

GateBlock GateBlock::rotate(double theta) {
  GateBlock b;
  b.kind = BlockKind::Rotate;
  b.label = "R";
  b.theta = theta;
  return b;
}

GateBlock GateBlock::pulse(int k, double t, double phi, std::string label) {
  GateBlock b;
  b.kind = BlockKind::Pulse;
  b.k = k;
  b.duration = std::abs(t);
  b.phi = t < 0 ? phi + M_PI : phi;
  b.label = label.empty() ? "U" + std::to_string(k) : std::move(label);
  return b;
}

GateBlock GateBlock::simultaneous(std::vector<int> ks, double t, std::string label) {
  GateBlock b;
  b.kind = BlockKind::SimultaneousPulse;
  b.ks = std::move(ks);
  b.duration = t;
  b.label = label.empty() ? "SIM" : std::move(label);
  return b;
}

double GateBlock::time_cost() const {
  switch (kind) {
    case BlockKind::Pulse:
    case BlockKind::SimultaneousPulse:
      return duration;
    default:
      return 0.0;  // laser-free operations
  }
}

double ProtocolSpec::total_time() const {
  double t = 0.0;
  for (const GateBlock* b : all_blocks()) t += b->time_cost();
  return t;
}

std::vector<const GateBlock*> ProtocolSpec::all_blocks() const {
  std::vector<const GateBlock*> out;
  for (const auto& b : pre_ops) out.push_back(&b);
  for (const auto& round : rounds)
    for (const auto& b : round) out.push_back(&b);
  for (const auto& b : post_ops) out.push_back(&b);
  return out;
}

double ProtocolSpec::omega_for(int k) const {
  auto it = omegas.find(k);
  if (it == omegas.end())
    throw std::invalid_argument("ProtocolSpec: no Rabi frequency configured for sideband " +
                                std::to_string(k));
  return it->second;
}

namespace {

std::map<int, double> default_cubic_omegas() { return {{1, 0.3}, {2, 0.3}, {3, 0.3}}; }
std::map<int, double> default_quartic_omegas() { return {{2, 0.2}, {4, 0.8}}; }

}  // namespace

ProtocolSpec build_cubic_protocol(const std::vector<CubicRoundTimes>& round_times,
                                  const SystemParams& params, const HamiltonianMode& mode,
                                  const HilbertConfig& cfg, std::map<int, double> omegas,
                                  double pre_squeeze, DisplacementImpl disp) {
  params.validate();
  mode.validate();
  cfg.validate();
  if (round_times.empty())
    throw std::invalid_argument("build_cubic_protocol: need at least one round");
  ProtocolSpec spec;
  spec.hilbert = cfg;
  spec.params = params;
  spec.mode = mode;
  spec.omegas = omegas.empty() ? default_cubic_omegas() : std::move(omegas);
  spec.pre_squeeze = pre_squeeze;
  spec.target = TargetGate{3, 1.0, TargetBasis::P};

  if (pre_squeeze != 0.0) {
    spec.pre_ops.push_back(GateBlock::squeeze(pre_squeeze));
    spec.post_ops.push_back(GateBlock::squeeze(-pre_squeeze));
  }

  int l = 1;
  for (const auto& rt : round_times) {
    if (rt.t1 < 0 && disp == DisplacementImpl::FirstSideband)
      throw std::invalid_argument("build_cubic_protocol: negative t1");
    std::vector<GateBlock> blocks;
    const std::string tag = " (round " + std::to_string(l) + ")";
    if (disp == DisplacementImpl::Ideal) {
      blocks.push_back(GateBlock::displace(Complex(rt.beta, 0.0)));
    } else {
      // β = −ηΩ₁ t/4 at leading order; invert for the pulse duration and
      // flip the drive when the sign calls for it.
      const double t1 = -4.0 * rt.beta / (params.eta * spec.omega_for(1));
      blocks.push_back(GateBlock::pulse(1, t1, canonical_phase(1), "U1"));
    }
    blocks.back().label += tag;
    blocks.push_back(GateBlock::pulse(3, rt.t3, canonical_phase(3), "U3" + tag));
    // U1' counteracts the round's displacement on the phase-flipped drive.
    blocks.push_back(GateBlock::pulse(1, rt.t1p, canonical_phase(1) + M_PI, "U1'" + tag));
    blocks.push_back(GateBlock::pulse(2, rt.t2, canonical_phase(2), "U2" + tag));
    spec.rounds.push_back(std::move(blocks));
    ++l;
  }

  spec.recipe.variant = ProtocolRecipe::Variant::Cubic;
  spec.recipe.cubic_rounds = round_times;
  spec.recipe.displacement = disp;
  return spec;
}

ProtocolSpec build_quartic_protocol(double t2, double phi2, double t4, double phi4,
                                    double theta, double r_pre, double r_post,
                                    const SystemParams& params, const HilbertConfig& cfg,
                                    std::map<int, double> omegas) {
  params.validate();
  cfg.validate();
  ProtocolSpec spec;
  spec.hilbert = cfg;
  spec.params = params;
  spec.mode = HamiltonianMode::full();
  spec.omegas = omegas.empty() ? default_quartic_omegas() : std::move(omegas);
  spec.target = TargetGate{4, 0.25, TargetBasis::X};

  std::vector<GateBlock> blocks;
  blocks.push_back(GateBlock::squeeze(r_pre));
  blocks.push_back(GateBlock::pulse(2, t2, phi2, "U2"));
  blocks.push_back(GateBlock::pulse(4, t4, phi4, "U4"));
  blocks.push_back(GateBlock::rotate(theta));
  blocks.push_back(GateBlock::squeeze(r_post));
  spec.rounds.push_back(std::move(blocks));

  spec.recipe.variant = ProtocolRecipe::Variant::Quartic;
  spec.recipe.quartic = {t2, phi2, t4, phi4, theta, r_pre, r_post};
  return spec;
}

ProtocolSpec build_simultaneous_variant(double t, const SystemParams& params,
                                        const HilbertConfig& cfg, double t2, double beta,
                                        std::map<int, double> omegas) {
  params.validate();
  cfg.validate();
  if (t < 0) throw std::invalid_argument("build_simultaneous_variant: negative duration");
  ProtocolSpec spec;
  spec.hilbert = cfg;
  spec.params = params;
  spec.mode = HamiltonianMode::full();
  spec.omegas = omegas.empty() ? default_cubic_omegas() : std::move(omegas);
  spec.target = TargetGate{3, 1.0, TargetBasis::P};

  std::vector<GateBlock> blocks;
  if (beta != 0.0) blocks.push_back(GateBlock::displace(Complex(beta, 0.0)));
  blocks.push_back(GateBlock::simultaneous({1, 3}, t));
  if (t2 != 0.0) blocks.push_back(GateBlock::pulse(2, t2, canonical_phase(2), "U2"));
  spec.rounds.push_back(std::move(blocks));

  spec.recipe.variant = ProtocolRecipe::Variant::Simultaneous;
  spec.recipe.simultaneous = {t, t2, beta};
  return spec;
}

Matrix ideal_gate(const TargetGate& target, const HilbertConfig& cfg) {
  target.validate();
  cfg.validate();
  OperatorSet ops = make_operators(cfg);
  const Matrix& q = target.basis == TargetBasis::X ? ops.x_quad : ops.p_quad;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(q);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("ideal_gate: quadrature eigendecomposition failed");
  const RealVector& lam = solver.eigenvalues();
  Vector phases(lam.size());
  for (int i = 0; i < lam.size(); ++i)
    phases(i) = std::exp(kI * (target.zeta * std::pow(lam(i), target.j)));
  return solver.eigenvectors() * phases.asDiagonal() * solver.eigenvectors().adjoint();
}

JointState ideal_target_state(const TargetGate& target, const JointState& input) {
  if (input.has_qubit())
    throw std::invalid_argument("ideal_target_state: expects a motional state");
  const Matrix u = ideal_gate(target, input.hilbert());
  if (input.kind() == StateKind::PureVector) {
    Vector out = u * input.vec();
    out /= out.norm();
    JointState s = JointState::pure(std::move(out), input.hilbert(), false);
    s.check_leakage("ideal_gate(j=" + std::to_string(target.j) + ")");
    return s;
  }
  Matrix rho = u * input.rho() * u.adjoint();
  rho /= rho.trace().real();
  JointState s = JointState::density(std::move(rho), input.hilbert(), false);
  s.check_leakage("ideal_gate(j=" + std::to_string(target.j) + ")");
  return s;
}

// --- engine ---------------------------------------------------------------

std::string ProtocolEngine::block_key(const GateBlock& b) const {
  std::ostringstream os;
  if (b.kind == BlockKind::Pulse) {
    os << "k" << b.k << ":phi" << b.phi;
  } else {
    os << "sim";
    for (int k : b.ks) os << "-" << k;
  }
  return os.str();
}

ProtocolEngine::ProtocolEngine(const ProtocolSpec& spec) : spec_(spec) {
  spec_.hilbert.validate();
  spec_.params.validate();
  spec_.mode.validate();
  const int d = spec_.hilbert.dim_fock;
  Matrix a = Matrix::Zero(d, d);
  for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  disp_gen_ = HermitianGenerator(Complex(0, -1) * (a.adjoint() - a));
  Matrix a2 = a * a;
  sq_gen_ = HermitianGenerator(Complex(0, -0.5) * (a2 - a2.adjoint()));

  for (const GateBlock* b : spec_.all_blocks()) {
    if (b->kind != BlockKind::Pulse && b->kind != BlockKind::SimultaneousPulse) continue;
    const std::string key = block_key(*b);
    if (pulse_gens_.count(key)) continue;
    Matrix h;
    if (b->kind == BlockKind::Pulse) {
      TwoToneDrive drive{b->k, spec_.omega_for(b->k), b->phi};
      h = rotating_hamiltonian_osc(drive, spec_.params, spec_.mode, spec_.hilbert);
    } else {
      h = Matrix::Zero(d, d);
      for (int k : b->ks) {
        TwoToneDrive drive{k, spec_.omega_for(k), canonical_phase(k)};
        h += rotating_hamiltonian_osc(drive, spec_.params, spec_.mode, spec_.hilbert);
      }
    }
    pulse_gens_.emplace(key, HermitianGenerator(h));
  }
}

const HermitianGenerator* ProtocolEngine::block_generator(const GateBlock& b,
                                                          double* t_eff) const {
  switch (b.kind) {
    case BlockKind::Pulse:
    case BlockKind::SimultaneousPulse: {
      *t_eff = b.duration * qubit_sign();
      return &pulse_gens_.at(block_key(b));
    }
    case BlockKind::Squeeze:
      *t_eff = b.r;
      return &sq_gen_;
    case BlockKind::Displace:
    case BlockKind::Rotate:
      return nullptr;
  }
  return nullptr;
}

namespace {

Vector apply_rotation_phase(double theta, const Vector& psi) {
  Vector out(psi.size());
  for (int n = 0; n < psi.size(); ++n) out(n) = psi(n) * std::exp(kI * (theta * n));
  return out;
}

}  // namespace

Vector ProtocolEngine::apply_motional(const Vector& psi, bool check_leakage) const {
  const HilbertConfig& cfg = spec_.hilbert;
  if (psi.size() != cfg.dim_fock)
    throw std::invalid_argument("ProtocolEngine: motional state dimension mismatch");
  Vector cur = psi;
  for (const GateBlock* b : spec_.all_blocks()) {
    switch (b->kind) {
      case BlockKind::Displace: {
        // D(β) = R(arg β) · exp(i|β|·disp_gen) · R(−arg β)
        const double mag = std::abs(b->beta);
        if (mag != 0.0) {
          const double th = std::arg(b->beta);
          if (th != 0.0) cur = apply_rotation_phase(-th, cur);
          cur = disp_gen_.apply(mag, cur);
          if (th != 0.0) cur = apply_rotation_phase(th, cur);
        }
        break;
      }
      case BlockKind::Rotate:
        cur = apply_rotation_phase(b->theta, cur);
        break;
      default: {
        double t = 0.0;
        const HermitianGenerator* gen = block_generator(*b, &t);
        if (gen && t != 0.0) cur = gen->apply(t, cur);
        break;
      }
    }
    if (check_leakage) {
      const int lo = cfg.interior();
      const double pop = cur.segment(lo, cfg.dim_fock - lo).squaredNorm();
      if (pop > cfg.leakage_tol) throw LeakageError("block " + b->label, pop, cfg.leakage_tol);
    }
  }
  return cur;
}

Vector ProtocolEngine::apply_joint(const Vector& psi, bool check_leakage) const {
  const int d = spec_.hilbert.dim_fock;
  if (psi.size() != 2 * d)
    throw std::invalid_argument("ProtocolEngine: joint state dimension mismatch");
  // Split into σ_y branches: every pulse is σ_y ⊗ M, so the branches evolve
  // independently under ±M and ideal blocks act on both alike.
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  Vector plus = inv_sqrt2 * (psi.segment(0, d) - kI * psi.segment(d, d));
  Vector minus = inv_sqrt2 * (psi.segment(0, d) + kI * psi.segment(d, d));

  auto run_branch = [&](Vector v, double sy) {
    for (const GateBlock* b : spec_.all_blocks()) {
      switch (b->kind) {
        case BlockKind::Displace: {
          const double mag = std::abs(b->beta);
          if (mag != 0.0) {
            const double th = std::arg(b->beta);
            if (th != 0.0) v = apply_rotation_phase(-th, v);
            v = disp_gen_.apply(mag, v);
            if (th != 0.0) v = apply_rotation_phase(th, v);
          }
          break;
        }
        case BlockKind::Rotate:
          v = apply_rotation_phase(b->theta, v);
          break;
        case BlockKind::Squeeze:
          if (b->r != 0.0) v = sq_gen_.apply(b->r, v);
          break;
        default: {
          const auto& gen = pulse_gens_.at(block_key(*b));
          if (b->duration != 0.0) v = gen.apply(sy * b->duration, v);
          break;
        }
      }
    }
    return v;
  };
  plus = run_branch(std::move(plus), +1.0);
  minus = run_branch(std::move(minus), -1.0);

  Vector out(2 * d);
  out.segment(0, d) = inv_sqrt2 * (plus + minus);
  out.segment(d, d) = kI * inv_sqrt2 * (plus - minus);
  if (check_leakage) {
    const int lo = spec_.hilbert.interior();
    double pop = out.segment(lo, d - lo).squaredNorm() +
                 out.segment(d + lo, d - lo).squaredNorm();
    if (pop > spec_.hilbert.leakage_tol)
      throw LeakageError("joint protocol output", pop, spec_.hilbert.leakage_tol);
  }
  return out;
}

Matrix ProtocolEngine::block_unitary_motional(const GateBlock& b) const {
  const HilbertConfig& cfg = spec_.hilbert;
  switch (b.kind) {
    case BlockKind::Displace:
      return displacement(b.beta, cfg);
    case BlockKind::Rotate:
      return rotation(b.theta, cfg);
    case BlockKind::Squeeze:
      return sq_gen_.unitary(b.r);
    default: {
      double t = 0.0;
      const HermitianGenerator* gen = block_generator(b, &t);
      return gen->unitary(t);
    }
  }
}

Matrix ProtocolEngine::block_unitary_joint(const GateBlock& b) const {
  const int d = spec_.hilbert.dim_fock;
  Matrix joint = Matrix::Zero(2 * d, 2 * d);
  if (b.kind == BlockKind::Pulse || b.kind == BlockKind::SimultaneousPulse) {
    // exp(i t σ_y ⊗ M) assembled from the ±M branch unitaries.
    const auto& gen = pulse_gens_.at(block_key(b));
    Matrix up = gen.unitary(b.duration, +1.0);
    Matrix dn = gen.unitary(b.duration, -1.0);
    Matrix half_sum = 0.5 * (up + dn);
    Matrix half_diff = 0.5 * (up - dn);
    joint.block(0, 0, d, d) = half_sum;
    joint.block(d, d, d, d) = half_sum;
    joint.block(0, d, d, d) = -kI * half_diff;
    joint.block(d, 0, d, d) = kI * half_diff;
    return joint;
  }
  Matrix u = block_unitary_motional(b);
  joint.block(0, 0, d, d) = u;
  joint.block(d, d, d, d) = u;
  return joint;
}

JointState apply_protocol(const ProtocolSpec& spec, const JointState& input,
                          const NoiseModel* noise) {
  JointState joint_in = input;
  if (!input.has_qubit()) {
    joint_in = input.tensor_qubit(spec.qubit_init == QubitInit::PlusY ? qubit_plus_y()
                                                                      : qubit_minus_y());
  }
  if (!(joint_in.hilbert() == spec.hilbert))
    throw std::invalid_argument("apply_protocol: state Hilbert config differs from spec");
  if (noise != nullptr) return noisy_evolution(spec, joint_in, *noise);

  ProtocolEngine engine(spec);
  if (joint_in.kind() == StateKind::PureVector) {
    Vector out = engine.apply_joint(joint_in.vec());
    out /= out.norm();
    return JointState::pure(std::move(out), spec.hilbert, true);
  }
  // density path: product of block unitaries
  Matrix rho = joint_in.rho();
  for (const GateBlock* b : engine.blocks()) {
    Matrix u = engine.block_unitary_joint(*b);
    rho = u * rho * u.adjoint();
  }
  rho /= rho.trace().real();
  JointState out = JointState::density(std::move(rho), spec.hilbert, true);
  out.check_leakage("protocol output");
  return out;
}

// --- serialization ---------------------------------------------------------

ordered_json ProtocolSpec::to_json() const {
  ordered_json j;
  j["schema_version"] = 1;
  switch (recipe.variant) {
    case ProtocolRecipe::Variant::Cubic: j["variant"] = "cubic"; break;
    case ProtocolRecipe::Variant::Quartic: j["variant"] = "quartic"; break;
    case ProtocolRecipe::Variant::Simultaneous: j["variant"] = "simultaneous"; break;
    default:
      throw std::logic_error("ProtocolSpec::to_json: custom block lists are not serializable");
  }
  j["eta"] = params.eta;
  j["nu"] = params.nu;
  ordered_json om;
  for (const auto& [k, w] : omegas) om[std::to_string(k)] = w;
  j["omegas"] = std::move(om);
  j["mode"] = mode.kind == HamiltonianMode::Kind::FullSideband ? "full" : "ld";
  if (mode.kind == HamiltonianMode::Kind::LdSeries) j["ld_order"] = mode.order;
  if (mode.carrier_prefactor) j["carrier_prefactor"] = *mode.carrier_prefactor;
  j["dim"] = hilbert.dim_fock;
  j["leakage_buffer"] = hilbert.leakage_buffer;
  j["leakage_tol"] = hilbert.leakage_tol;
  j["qubit_init"] = qubit_init == QubitInit::PlusY ? "plus_y" : "minus_y";
  if (recipe.variant == ProtocolRecipe::Variant::Cubic) {
    j["displacement"] = recipe.displacement == DisplacementImpl::Ideal ? "ideal" : "pulse";
    ordered_json rounds_json = ordered_json::array();
    for (const auto& rt : recipe.cubic_rounds) {
      ordered_json r;
      r["t1"] = rt.t1;
      r["t3"] = rt.t3;
      r["t1p"] = rt.t1p;
      r["t2"] = rt.t2;
      r["beta"] = rt.beta;
      rounds_json.push_back(std::move(r));
    }
    j["rounds"] = std::move(rounds_json);
    j["pre_squeeze"] = pre_squeeze;
  } else if (recipe.variant == ProtocolRecipe::Variant::Quartic) {
    const auto& q = recipe.quartic;
    j["quartic"] = {{"t2", q.t2},       {"phi2", q.phi2},   {"t4", q.t4},
                    {"phi4", q.phi4},   {"theta", q.theta}, {"r_pre", q.r_pre},
                    {"r_post", q.r_post}};
  } else {
    const auto& s = recipe.simultaneous;
    j["simultaneous"] = {{"t", s.t}, {"t2", s.t2}, {"beta", s.beta}};
  }
  j["target"] = {{"j", target.j},
                 {"zeta", target.zeta},
                 {"basis", target.basis == TargetBasis::X ? "X" : "P"}};
  return j;
}

ProtocolSpec ProtocolSpec::from_json(const json& j) {
  check_keys(j,
             {"schema_version", "variant", "eta", "nu", "omegas", "mode", "ld_order",
              "carrier_prefactor", "dim", "leakage_buffer", "leakage_tol", "qubit_init",
              "displacement", "rounds", "pre_squeeze", "quartic", "simultaneous", "target",
              "noise"},
             "protocol");
  const int version = get_or<int>(j, "schema_version", 1);
  if (version != 1)
    throw std::invalid_argument("protocol: unsupported schema_version " +
                                std::to_string(version));

  HilbertConfig cfg;
  cfg.dim_fock = get_or<int>(j, "dim", 120);
  cfg.leakage_buffer = get_or<int>(j, "leakage_buffer", 20);
  cfg.leakage_tol = get_or<double>(j, "leakage_tol", 1e-6);

  SystemParams params;
  params.eta = get_or<double>(j, "eta", 0.3);
  params.nu = get_or<double>(j, "nu", 10.0);

  HamiltonianMode mode;
  const std::string mode_str = get_or<std::string>(j, "mode", "full");
  if (mode_str == "full") {
    mode = HamiltonianMode::full();
  } else if (mode_str == "ld") {
    mode = HamiltonianMode::ld(get_or<int>(j, "ld_order", 1));
  } else {
    throw std::invalid_argument("protocol: mode must be \"full\" or \"ld\"");
  }
  if (j.contains("carrier_prefactor")) mode.carrier_prefactor = j["carrier_prefactor"].get<bool>();

  std::map<int, double> omegas;
  if (j.contains("omegas")) {
    for (auto it = j["omegas"].begin(); it != j["omegas"].end(); ++it)
      omegas[std::stoi(it.key())] = it.value().get<double>();
  }

  TargetGate target;
  if (j.contains("target")) {
    const auto& t = j["target"];
    check_keys(t, {"j", "zeta", "basis"}, "protocol.target");
    target.j = get_or<int>(t, "j", 3);
    target.zeta = get_or<double>(t, "zeta", 1.0);
    const std::string basis = get_or<std::string>(t, "basis", "P");
    if (basis == "X")
      target.basis = TargetBasis::X;
    else if (basis == "P")
      target.basis = TargetBasis::P;
    else
      throw std::invalid_argument("protocol.target: basis must be \"X\" or \"P\"");
  }

  const std::string variant = get_or<std::string>(j, "variant", "cubic");
  ProtocolSpec spec;
  if (variant == "cubic") {
    if (!j.contains("rounds"))
      throw std::invalid_argument("protocol: cubic variant requires \"rounds\"");
    std::vector<CubicRoundTimes> rounds;
    for (const auto& r : j["rounds"]) {
      check_keys(r, {"t1", "t3", "t1p", "t2", "beta"}, "protocol.rounds[]");
      CubicRoundTimes rt;
      rt.t1 = get_or<double>(r, "t1", 0.0);
      rt.t3 = get_or<double>(r, "t3", 0.0);
      rt.t1p = get_or<double>(r, "t1p", 0.0);
      rt.t2 = get_or<double>(r, "t2", 0.0);
      rt.beta = get_or<double>(r, "beta", 0.0);
      rounds.push_back(rt);
    }
    const std::string disp_str = get_or<std::string>(j, "displacement", "ideal");
    DisplacementImpl disp =
        disp_str == "pulse" ? DisplacementImpl::FirstSideband : DisplacementImpl::Ideal;
    spec = build_cubic_protocol(rounds, params, mode, cfg, omegas,
                                get_or<double>(j, "pre_squeeze", 0.0), disp);
  } else if (variant == "quartic") {
    if (!j.contains("quartic"))
      throw std::invalid_argument("protocol: quartic variant requires \"quartic\"");
    const auto& q = j["quartic"];
    check_keys(q, {"t2", "phi2", "t4", "phi4", "theta", "r_pre", "r_post"},
               "protocol.quartic");
    spec = build_quartic_protocol(
        get_or<double>(q, "t2", 0.0), get_or<double>(q, "phi2", 0.0),
        get_or<double>(q, "t4", 0.0), get_or<double>(q, "phi4", 0.0),
        get_or<double>(q, "theta", 0.0), get_or<double>(q, "r_pre", 0.0),
        get_or<double>(q, "r_post", 0.0), params, cfg, omegas);
    spec.mode = mode;
  } else if (variant == "simultaneous") {
    if (!j.contains("simultaneous"))
      throw std::invalid_argument("protocol: simultaneous variant requires \"simultaneous\"");
    const auto& s = j["simultaneous"];
    check_keys(s, {"t", "t2", "beta"}, "protocol.simultaneous");
    spec = build_simultaneous_variant(get_or<double>(s, "t", 0.0), params, cfg,
                                      get_or<double>(s, "t2", 0.0),
                                      get_or<double>(s, "beta", 0.0), omegas);
  } else {
    throw std::invalid_argument("protocol: unknown variant \"" + variant + "\"");
  }
  spec.target = target;
  const std::string qi = get_or<std::string>(j, "qubit_init", "plus_y");
  if (qi == "plus_y")
    spec.qubit_init = QubitInit::PlusY;
  else if (qi == "minus_y")
    spec.qubit_init = QubitInit::MinusY;
  else
    throw std::invalid_argument("protocol: qubit_init must be plus_y or minus_y");
  return spec;
}

// --- residual analysis ------------------------------------------------------

ResidualReport residual_report(const JointState& generated, const TargetGate& target,
                               const JointState& input) {
  if (!(generated.hilbert() == input.hilbert()))
    throw std::invalid_argument("residual_report: Hilbert configs differ");
  if (generated.has_qubit() || input.has_qubit())
    throw std::invalid_argument("residual_report: expects motional states");
  if (generated.kind() != StateKind::PureVector || input.kind() != StateKind::PureVector)
    throw std::invalid_argument("residual_report: expects pure states");

  const HilbertConfig& cfg = generated.hilbert();
  OperatorSet ops = make_operators(cfg);
  const Matrix& q = target.basis == TargetBasis::X ? ops.x_quad : ops.p_quad;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(q);
  const RealVector& qs = solver.eigenvalues();
  const Matrix& v = solver.eigenvectors();

  const Matrix u_t = ideal_gate(target, cfg);
  Vector resid = u_t.adjoint() * generated.vec();
  Vector a = v.adjoint() * resid;
  Vector b = v.adjoint() * input.vec();

  // phase samples where the input has support
  const int d = cfg.dim_fock;
  RealVector w(d);
  for (int i = 0; i < d; ++i) w(i) = std::norm(b(i));
  const double wmax = w.maxCoeff();
  std::vector<int> sel;
  for (int i = 0; i < d; ++i)
    if (w(i) > 1e-6 * wmax) sel.push_back(i);
  if (sel.size() < 8)
    throw std::runtime_error("residual_report: too few support points for the fit");

  // unwrap outward from the heaviest sample
  const int m = static_cast<int>(sel.size());
  std::vector<double> theta(m);
  int i0 = 0;
  for (int i = 0; i < m; ++i)
    if (w(sel[i]) > w(sel[i0])) i0 = i;
  for (int i = 0; i < m; ++i) theta[i] = std::arg(a(sel[i]) / b(sel[i]));
  for (int i = i0 + 1; i < m; ++i) {
    while (theta[i] - theta[i - 1] > M_PI) theta[i] -= 2.0 * M_PI;
    while (theta[i] - theta[i - 1] < -M_PI) theta[i] += 2.0 * M_PI;
  }
  for (int i = i0 - 1; i >= 0; --i) {
    while (theta[i] - theta[i + 1] > M_PI) theta[i] -= 2.0 * M_PI;
    while (theta[i] - theta[i + 1] < -M_PI) theta[i] += 2.0 * M_PI;
  }

  constexpr int kOrder = 6;
  double scale = 0.0;
  for (int i = 0; i < m; ++i) scale = std::max(scale, std::abs(qs(sel[i])));
  if (scale == 0.0) scale = 1.0;

  RealMatrix design(m, kOrder + 1);
  RealVector rhs(m);
  for (int i = 0; i < m; ++i) {
    const double sw = std::sqrt(w(sel[i]));
    double u = 1.0;
    for (int p = 0; p <= kOrder; ++p) {
      design(i, p) = sw * u;
      u *= qs(sel[i]) / scale;
    }
    rhs(i) = sw * theta[i];
  }
  Eigen::JacobiSVD<RealMatrix> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double cond = svd.singularValues()(0) /
                      svd.singularValues()(svd.singularValues().size() - 1);
  if (!std::isfinite(cond) || cond > 1e12)
    throw std::runtime_error("residual_report: ill-conditioned fit, condition number " +
                             std::to_string(cond));
  RealVector coef_scaled = svd.solve(rhs);

  ResidualReport rep;
  rep.condition_number = cond;
  rep.coefficients.resize(kOrder + 1);
  for (int p = 0; p <= kOrder; ++p)
    rep.coefficients[p] = coef_scaled(p) / std::pow(scale, p);

  RealVector fit = design * coef_scaled;
  rep.rms_phase_residual = std::sqrt((fit - rhs).squaredNorm() / m);

  // dominant nonlinear residual by weighted RMS contribution, skipping the
  // target's own order
  double best = -1.0;
  for (int p = 2; p <= kOrder; ++p) {
    if (p == target.j) continue;
    double acc = 0.0, wtot = 0.0;
    for (int i = 0; i < m; ++i) {
      const double c = rep.coefficients[p] * std::pow(qs(sel[i]), p);
      acc += w(sel[i]) * c * c;
      wtot += w(sel[i]);
    }
    const double rms = std::sqrt(acc / wtot);
    if (rms > best) {
      best = rms;
      rep.dominant_order = p;
    }
  }
  return rep;
}

}  // namespace iongate
