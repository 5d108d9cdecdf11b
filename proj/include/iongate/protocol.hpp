#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "iongate/fock.hpp"
#include "iongate/sideband.hpp"
#include "iongate/types.hpp"

#include <nlohmann/json_fwd.hpp>

namespace iongate {

enum class BlockKind { Displace, Squeeze, Rotate, Pulse, SimultaneousPulse };

struct GateBlock {
  BlockKind kind = BlockKind::Pulse;
  std::string label;        // diagnostic name: "U1", "U3", "U1'", "U2", "D", ...
  double duration = 0.0;    // μs, pulse blocks only
  double phi = 0.0;         // drive phase, pulse blocks only
  int k = 0;                // sideband order, single pulse
  std::vector<int> ks;      // sideband orders, simultaneous pulse
  Complex beta{0.0, 0.0};   // Displace
  double r = 0.0;           // Squeeze
  double theta = 0.0;       // Rotate

  static GateBlock displace(Complex beta);
  static GateBlock squeeze(double r);
  static GateBlock rotate(double theta);
  /// Sideband pulse; negative duration means the phase-flipped drive
  /// (φ → φ+π) applied for |t|, which negates the effective Hamiltonian.
  static GateBlock pulse(int k, double t, double phi, std::string label = {});
  static GateBlock simultaneous(std::vector<int> ks, double t, std::string label = {});

  double time_cost() const;  // μs contributed to total_time
};

enum class QubitInit { PlusY, MinusY };

enum class TargetBasis { X, P };

struct TargetGate {
  int j = 3;             // gate order (3 = cubic, 4 = quartic)
  double zeta = 1.0;     // nonlinearity strength
  TargetBasis basis = TargetBasis::P;

  void validate() const {
    if (j != 3 && j != 4) throw std::invalid_argument("TargetGate: order must be 3 or 4");
    if (!std::isfinite(zeta)) throw std::invalid_argument("TargetGate: zeta must be finite");
  }
};

/// Per-round cubic-protocol timings. Signed t2 (and t3/t1p) selects the
/// phase-flipped drive for that pulse.
struct CubicRoundTimes {
  double t1 = 0.0;    // first-sideband displacement pulse; 0 with ideal D(β)
  double t3 = 0.0;
  double t1p = 0.0;
  double t2 = 0.0;
  double beta = 0.0;  // ideal displacement amplitude (used when t1 == 0)
};

enum class DisplacementImpl { Ideal, FirstSideband };

/// Builder inputs kept alongside the compiled blocks so specs serialize back
/// to the same document they were built from.
struct ProtocolRecipe {
  enum class Variant { Cubic, Quartic, Simultaneous, Custom };
  Variant variant = Variant::Custom;
  std::vector<CubicRoundTimes> cubic_rounds;
  DisplacementImpl displacement = DisplacementImpl::Ideal;
  struct Quartic {
    double t2 = 0, phi2 = 0, t4 = 0, phi4 = 0, theta = 0, r_pre = 0, r_post = 0;
  } quartic;
  struct Simultaneous {
    double t = 0, t2 = 0, beta = 0;
  } simultaneous;
};

struct ProtocolSpec {
  HilbertConfig hilbert;
  SystemParams params;
  HamiltonianMode mode;
  std::map<int, double> omegas;  // Rabi frequency per sideband order
  QubitInit qubit_init = QubitInit::PlusY;
  std::vector<GateBlock> pre_ops;                // e.g. S(r_pre)
  std::vector<std::vector<GateBlock>> rounds;    // blocks in application order
  std::vector<GateBlock> post_ops;               // e.g. S(−r_pre)
  double pre_squeeze = 0.0;
  TargetGate target;
  ProtocolRecipe recipe;

  double total_time() const;
  std::vector<const GateBlock*> all_blocks() const;
  double omega_for(int k) const;

  nlohmann::ordered_json to_json() const;
  static ProtocolSpec from_json(const nlohmann::json& j);
};

/// N-round cubic gate: each round applies U1 (or D(β)), U3, U1', U2 in that
/// order. U1' runs on the phase-flipped first-sideband drive so its linear
/// part undoes the displacement while its cubic part adds to U3.
ProtocolSpec build_cubic_protocol(const std::vector<CubicRoundTimes>& rounds,
                                  const SystemParams& params, const HamiltonianMode& mode,
                                  const HilbertConfig& cfg,
                                  std::map<int, double> omegas = {},
                                  double pre_squeeze = 0.0,
                                  DisplacementImpl disp = DisplacementImpl::Ideal);

/// Single-round quartic sequence S(r_post)·R(θ)·U4(t4,φ4)·U2(t2,φ2)·S(r_pre),
/// rightmost applied first.
ProtocolSpec build_quartic_protocol(double t2, double phi2, double t4, double phi4,
                                    double theta, double r_pre, double r_post,
                                    const SystemParams& params, const HilbertConfig& cfg,
                                    std::map<int, double> omegas = {});

/// Single pulse under H1 + H3 with the canonical phases, plus the U2 closure.
ProtocolSpec build_simultaneous_variant(double t, const SystemParams& params,
                                        const HilbertConfig& cfg, double t2 = 0.0,
                                        double beta = 0.0,
                                        std::map<int, double> omegas = {});

/// exp(i ζ Q^j) for Q = X or P, diagonal in that quadrature's eigenbasis.
Matrix ideal_gate(const TargetGate& target, const HilbertConfig& cfg);

/// Target state: ideal gate applied to a motional input, with leakage check.
JointState ideal_target_state(const TargetGate& target, const JointState& input);

struct NoiseModel;  // noise.hpp

/// Precomputes every generator a spec needs; immutable afterwards and safe to
/// share across concurrent apply() calls.
class ProtocolEngine {
 public:
  explicit ProtocolEngine(const ProtocolSpec& spec);

  const ProtocolSpec& spec() const { return spec_; }

  /// Effective oscillator-only evolution for a σ_y eigenstate qubit. This is
  /// exact for noiseless runs because every pulse Hamiltonian is σ_y ⊗ M.
  Vector apply_motional(const Vector& psi, bool check_leakage = true) const;

  /// Full joint evolution of a pure state.
  Vector apply_joint(const Vector& psi, bool check_leakage = true) const;

  /// Joint unitary of one block (used by the density/noise path).
  Matrix block_unitary_joint(const GateBlock& b) const;
  /// Oscillator-effective unitary of one block.
  Matrix block_unitary_motional(const GateBlock& b) const;
  /// Oscillator-effective Hermitian generator and evolution time of a block,
  /// or nullptr when the block is an instantaneous ideal operation.
  const HermitianGenerator* block_generator(const GateBlock& b, double* t_eff) const;

  std::vector<const GateBlock*> blocks() const { return spec_.all_blocks(); }

 private:
  double qubit_sign() const { return spec_.qubit_init == QubitInit::PlusY ? 1.0 : -1.0; }

  ProtocolSpec spec_;
  std::map<std::string, HermitianGenerator> pulse_gens_;  // keyed by block signature
  HermitianGenerator disp_gen_;   // −i(a† − a); D(|β|) = exp(i|β|·gen)
  HermitianGenerator sq_gen_;     // −i(a² − a†²)/2; S(r) = exp(i r·gen)
  std::string block_key(const GateBlock& b) const;
};

/// apply_protocol per the module contract: tensors in the configured qubit
/// state when the input is motional-only, runs all blocks (with the noise
/// channel interleaved when given), and returns the joint output state.
JointState apply_protocol(const ProtocolSpec& spec, const JointState& input,
                          const NoiseModel* noise = nullptr);

struct ResidualReport {
  std::vector<double> coefficients;  // phase-profile polynomial, index = power
  double condition_number = 0.0;
  int dominant_order = 0;            // among orders >= 2, by RMS contribution
  double rms_phase_residual = 0.0;   // fit residual, rad
  double quadratic() const { return coefficients.size() > 2 ? coefficients[2] : 0.0; }
  double quintic() const { return coefficients.size() > 5 ? coefficients[5] : 0.0; }
};

/// Fits the residual phase profile arg(⟨q|U_tgt† |gen⟩ / ⟨q|in⟩) along the
/// target quadrature with a polynomial up to order 6.
ResidualReport residual_report(const JointState& generated, const TargetGate& target,
                               const JointState& input);

}  // namespace iongate
