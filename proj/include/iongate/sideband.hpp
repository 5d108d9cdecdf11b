#pragma once

#include "iongate/fock.hpp"
#include "iongate/types.hpp"

namespace iongate {

struct SystemParams {
  double eta = 0.3;  // Lamb-Dicke parameter
  double nu = 10.0;  // trap frequency, MHz (rad/μs with Ω·t dimensionless)

  void validate() const {
    if (!(eta > 0.0 && eta < 1.0))
      throw std::invalid_argument("SystemParams: eta must be in (0,1)");
    if (!(nu > 0.0)) throw std::invalid_argument("SystemParams: nu must be positive");
  }
};

/// Red+blue two-tone drive resonant with the k-th sideband.
struct TwoToneDrive {
  int k = 1;
  double omega = 0.3;  // Rabi frequency, MHz
  double phi = 0.0;    // drive phase, rad

  double detuning(const SystemParams& p) const { return k * p.nu; }

  void validate() const {
    if (k < 1) throw std::invalid_argument("TwoToneDrive: k must be >= 1");
    if (!(omega > 0.0)) throw std::invalid_argument("TwoToneDrive: omega must be positive");
  }
};

/// Canonical drive phases: φ1 = 0, φ3 = π select the relative sign that turns
/// the native momentum-like dynamics into the target phase gate; φ2 = π/2
/// aligns the second sideband with the X/P squeezing axes.
double canonical_phase(int k);

struct HamiltonianMode {
  enum class Kind { LdSeries, FullSideband };
  Kind kind = Kind::FullSideband;
  int order = 1;  // number of series terms retained in LdSeries mode
  // exp(−η²/2) carrier factor: exact in the full expansion, absent from the
  // truncated-series forms. Optional override for sensitivity studies.
  std::optional<bool> carrier_prefactor;

  bool prefactor_enabled() const {
    if (carrier_prefactor) return *carrier_prefactor;
    return kind == Kind::FullSideband;
  }

  static HamiltonianMode full() { return {}; }
  static HamiltonianMode ld(int order) {
    HamiltonianMode m;
    m.kind = Kind::LdSeries;
    m.order = order;
    return m;
  }

  void validate() const {
    if (kind == Kind::LdSeries && (order < 1 || order > 4))
      throw std::invalid_argument("HamiltonianMode: ld-series order must be in [1,4]");
  }
};

/// D_k(η) = Σ_n (iη)^{2n+k} / (n! (n+k)!) a†^{n+k} a^n, summed until terms
/// vanish within the truncation. max_terms < 0 keeps the whole series.
Matrix sideband_operator(int k, double eta, const HilbertConfig& cfg, int max_terms = -1);

/// Oscillator part of the rotating-frame Hamiltonian (σ_y eigenvalue +1):
/// h_k = (Ω_k/4)(−1)^{k+1} [e^{−iφ} D_k + e^{iφ} D_k†] (× e^{−η²/2} in full mode).
Matrix rotating_hamiltonian_osc(const TwoToneDrive& drive, const SystemParams& params,
                                const HamiltonianMode& mode, const HilbertConfig& cfg);

/// Full qubit⊗oscillator rotating-frame Hamiltonian, σ_y ⊗ h_k.
Matrix rotating_hamiltonian(const TwoToneDrive& drive, const SystemParams& params,
                            const HamiltonianMode& mode, const HilbertConfig& cfg);

/// σ_y ⊗ M for an oscillator operator M (qubit slow index).
Matrix sigma_y_tensor(const Matrix& osc_op);

struct DirectPropagatorOptions {
  int initial_steps = 0;      // 0 → auto from duration and ν
  double refine_tol = 1e-6;   // step-halving convergence target
  int max_refinements = 12;
};

/// Propagator T·exp(+i ∫ H(t) dt) of the time-dependent two-tone interaction
/// Hamiltonian, by piecewise-constant slicing with an exact per-slice
/// exponential. Converges by step doubling; throws if the refinement stalls.
Matrix direct_propagator(const TwoToneDrive& drive, const SystemParams& params,
                         double duration, const HilbertConfig& cfg,
                         const DirectPropagatorOptions& opts = {});

/// Same evolution applied to a joint pure state (cheaper for long pulses).
Vector direct_propagate(const TwoToneDrive& drive, const SystemParams& params,
                        double duration, const HilbertConfig& cfg, const Vector& psi,
                        const DirectPropagatorOptions& opts = {});

}  // namespace iongate
