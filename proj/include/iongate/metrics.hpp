#pragma once

#include <vector>

#include "iongate/fock.hpp"
#include "iongate/protocol.hpp"
#include "iongate/types.hpp"

namespace iongate {

/// Uhlmann-Jozsa fidelity F = (Tr√(√σ ρ √σ))², with the cheap forms when one
/// side is pure. Accepts motional or joint states of matching dimension.
double fidelity(const JointState& rho, const JointState& sigma);
double fidelity(const Matrix& rho, const Matrix& sigma);

struct WignerGridSpec {
  double extent = 8.0;   // symmetric half-width in q and p
  int points = 301;      // per axis
  bool auto_extend = true;
  double boundary_tol = 1e-6;
  int max_extensions = 4;
};

struct WignerGrid {
  RealVector q_axis;
  RealVector p_axis;
  RealMatrix values;  // values(iq, ip) = W(q_axis[iq], p_axis[ip])
  double dq = 0, dp = 0;
  double normalization_defect = 0;  // |ΣW·dq·dp − 1|
};

/// W(q,p) = (1/π)·Tr[ρ D(2α)Π], α=(q+ip)/√2; ∫∫W dq dp = 1, vacuum peak 1/π.
WignerGrid wigner(const JointState& state, const WignerGridSpec& spec = {});
WignerGrid wigner(const Matrix& rho_motional, const WignerGridSpec& spec = {});

double negativity_volume(const WignerGrid& grid);

struct LineCutSpec {
  bool axis_p0 = false;  // cut along p = 0
  double slope = 0.0;    // p = slope·q + intercept otherwise
  double intercept = 0.0;
  double q_from = -8.0;
  double q_to = 8.0;
  int samples = 401;
};

struct LineCut {
  LineCutSpec spec;
  std::vector<double> position;  // q along the line
  std::vector<double> w;         // interpolated Wigner values
};

/// Samples W along a straight line by bilinear interpolation on a grid that
/// is auto-extended to cover the requested range.
LineCut wigner_cut(const JointState& state, const LineCutSpec& cut,
                   const WignerGridSpec& grid_spec = {});
LineCut wigner_cut(const WignerGrid& grid, const LineCutSpec& cut);

/// Var(O) with O = X − jξP^{j−1} for a P-basis gate and O = P + jξX^{j−1}
/// for an X-basis gate; computed from precomputed operator moments.
double nonlinear_variance(const JointState& state, int j, double xi, TargetBasis basis);

struct VarianceScan {
  int j = 3;
  std::vector<double> xi_values;
  std::vector<double> variances;
  double xi_min = 0.0;   // signed argmin of the scan
  double v_min = 0.0;
  double zeta_eff = 0.0; // |xi_min|, the realized nonlinearity strength
};

struct VarianceScanOptions {
  double lo = -2.5, hi = 2.5;
  int coarse_points = 101;
  double tol = 1e-4;
  int max_widenings = 4;
};

/// Coarse ξ grid followed by golden-section refinement of the bracket.
VarianceScan minimize_variance(const JointState& state, int j, TargetBasis basis,
                               const VarianceScanOptions& opts = {});

/// Minimum Var(X − 3ξP²) reachable by any Gaussian state: 3/2^{5/3}·(3ξ)^{2/3}.
double qng_threshold(double xi);

/// Coherent-state (classical) nonlinear variance near ξ ≈ 1: 5 + 36·Im(α)².
double classical_threshold(Complex alpha);

/// |⟨m|ρ_a − ρ_b|n⟩| restricted to the first n_max_display levels.
RealMatrix density_diff_map(const Matrix& rho_a, const Matrix& rho_b, int n_max_display);

/// Least-squares γ in ξ_min = ζ₃(1 + γη²|α|²) from (|α|, ξ_min) samples.
double effective_cubicity_fit(const std::vector<std::pair<double, double>>& samples,
                              double eta, double zeta3);

}  // namespace iongate
