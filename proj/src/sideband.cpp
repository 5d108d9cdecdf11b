#include "iongate/sideband.hpp"

#include <cmath>

namespace iongate {

double canonical_phase(int k) {
  switch (k) {
    case 1: return 0.0;
    case 2: return M_PI / 2.0;
    case 3: return M_PI;
    case 4: return M_PI / 2.0;
    default: return 0.0;
  }
}

Matrix sideband_operator(int k, double eta, const HilbertConfig& cfg, int max_terms) {
  cfg.validate();
  if (k < 0) throw std::invalid_argument("sideband_operator: k must be >= 0");
  const int d = cfg.dim_fock;
  if (k >= d) throw std::invalid_argument("sideband_operator: k >= dim_fock");

  Matrix out = Matrix::Zero(d, d);
  const Complex ieta = kI * eta;
  // Element ⟨m+k | D_k | m⟩ = Σ_n t_n with
  //   t_0 = (iη)^k / k! · √((m+k)!/m!),
  //   t_{n+1}/t_n = −η² (m−n) / ((n+1)(n+k+1)).
  for (int m = 0; m + k < d; ++m) {
    Complex t = std::pow(ieta, k);
    for (int j = 1; j <= k; ++j) t *= std::sqrt(static_cast<double>(m + j)) / j;
    Complex sum = t;
    const int n_max = (max_terms < 0) ? m : std::min(m, max_terms - 1);
    for (int n = 0; n < n_max; ++n) {
      t *= -eta * eta * static_cast<double>(m - n) /
           (static_cast<double>(n + 1) * static_cast<double>(n + k + 1));
      sum += t;
      if (std::abs(t) < 1e-18 * (1.0 + std::abs(sum))) break;
    }
    out(m + k, m) = sum;
  }
  return out;
}

Matrix rotating_hamiltonian_osc(const TwoToneDrive& drive, const SystemParams& params,
                                const HamiltonianMode& mode, const HilbertConfig& cfg) {
  drive.validate();
  params.validate();
  mode.validate();
  const int terms = (mode.kind == HamiltonianMode::Kind::LdSeries) ? mode.order : -1;
  Matrix dk = sideband_operator(drive.k, params.eta, cfg, terms);
  const Complex ph = std::exp(-kI * drive.phi);
  Matrix m = ph * dk + std::conj(ph) * dk.adjoint();
  double pref = drive.omega / 4.0;
  if (drive.k % 2 == 0) pref = -pref;  // (−1)^{k+1} symmetry factor
  if (mode.prefactor_enabled()) pref *= std::exp(-0.5 * params.eta * params.eta);
  Matrix h = pref * m;
  const double defect = (h - h.adjoint()).cwiseAbs().maxCoeff();
  if (defect > 1e-12 * (1.0 + h.cwiseAbs().maxCoeff()))
    throw std::runtime_error("rotating_hamiltonian: non-Hermitian assembly");
  return h;
}

Matrix sigma_y_tensor(const Matrix& osc_op) {
  const int d = static_cast<int>(osc_op.rows());
  Matrix out = Matrix::Zero(2 * d, 2 * d);
  out.block(0, d, d, d) = Complex(0, -1) * osc_op;
  out.block(d, 0, d, d) = Complex(0, 1) * osc_op;
  return out;
}

Matrix rotating_hamiltonian(const TwoToneDrive& drive, const SystemParams& params,
                            const HamiltonianMode& mode, const HilbertConfig& cfg) {
  return sigma_y_tensor(rotating_hamiltonian_osc(drive, params, mode, cfg));
}

namespace {

// Displacement matrix D(β) from the analytic Fock-basis elements
//   ⟨m+k|D(β)|m⟩ = e^{−|β|²/2} β^k √(m!/(m+k)!) L_m^{(k)}(|β|²) (upper wedge
// analogous with −β*), evaluated by the same stable series recursion as the
// sideband operators.
Matrix displacement_analytic(Complex beta, int d) {
  Matrix out = Matrix::Zero(d, d);
  const double b2 = std::norm(beta);
  const double gauss = std::exp(-0.5 * b2);
  // ⟨m+k|D(β)|m⟩ = e^{−|β|²/2} √(m!(m+k)!) Σ_n β^{n+k}(−β*)^n /(n!(n+k)!(m−n)!)
  // with the same term recursion as the sideband series; the upper wedge
  // follows from D(β)† = D(−β).
  auto fill_wedge = [&](Complex b, bool lower) {
    for (int k = 0; k < d; ++k) {
      if (!lower && k == 0) continue;  // diagonal written once
      Complex t0 = 1.0;
      for (int j = 1; j <= k; ++j) t0 *= b / static_cast<double>(j);
      for (int m = 0; m + k < d; ++m) {
        Complex t = t0;
        for (int j = 1; j <= k; ++j) t *= std::sqrt(static_cast<double>(m + j));
        Complex sum = t;
        for (int n = 0; n < m; ++n) {
          t *= -b2 * static_cast<double>(m - n) /
               (static_cast<double>(n + 1) * static_cast<double>(n + k + 1));
          sum += t;
          if (std::abs(t) < 1e-18 * (1.0 + std::abs(sum))) break;
        }
        if (lower)
          out(m + k, m) = gauss * sum;
        else
          out(m, m + k) = gauss * std::conj(sum);
      }
    }
  };
  fill_wedge(beta, true);
  fill_wedge(-beta, false);
  return out;
}

// f(t) = (Ω/4)(e^{i(δt+φ)} + (−1)^k e^{−i(δt+φ)})
Complex drive_field(const TwoToneDrive& drive, const SystemParams& params, double t) {
  const double delta = drive.detuning(params);
  const Complex up = std::exp(kI * (delta * t + drive.phi));
  const Complex dn = std::exp(-kI * (delta * t + drive.phi));
  const double sym = (drive.k % 2 == 0) ? 1.0 : -1.0;
  return 0.25 * drive.omega * (up + sym * dn);
}

// One slice of T·exp(+i∫H dt) with H(t) = σ⁺⊗B + σ⁻⊗B†, B = −i f(t) D(iη e^{iνt}).
// Because B = c·V with V unitary, H² = |c|² 𝟙 and the slice exponential is
// exp(iΔt H) = cos(|c|Δt) 𝟙 + i sin(|c|Δt)/|c| H, applied blockwise.
struct SlicePropagator {
  const TwoToneDrive& drive;
  const SystemParams& params;
  int d;

  void apply(double t_mid, double dt, Vector& psi) const {
    const Complex f = drive_field(drive, params, t_mid);
    const double mag = std::abs(f);
    const Complex disp_arg = kI * params.eta * std::exp(kI * (params.nu * t_mid));
    Matrix v = displacement_analytic(disp_arg, d);
    // B = −i f V; blocks: g-segment ψ_g, e-segment ψ_e
    //   ψ' = cos(|f|dt) ψ + i sin(|f|dt)/|f| [B† ψ_e ; B ψ_g]
    auto psi_g = psi.segment(0, d);
    auto psi_e = psi.segment(d, d);
    if (mag < 1e-300) return;
    const double c = std::cos(mag * dt);
    const Complex s = kI * std::sin(mag * dt) / mag;
    Vector bg = (-kI * f) * (v * psi_g);            // B ψ_g
    Vector be = (kI * std::conj(f)) * (v.adjoint() * psi_e);  // B† ψ_e
    Vector out(2 * d);
    out.segment(0, d) = c * psi_g + s * be;
    out.segment(d, d) = c * psi_e + s * bg;
    psi = std::move(out);
  }
};

Vector propagate_steps(const TwoToneDrive& drive, const SystemParams& params,
                       double duration, const HilbertConfig& cfg, const Vector& psi0,
                       int steps) {
  const int d = cfg.dim_fock;
  SlicePropagator slicer{drive, params, d};
  Vector psi = psi0;
  const double dt = duration / steps;
  for (int i = 0; i < steps; ++i) slicer.apply((i + 0.5) * dt, dt, psi);
  return psi;
}

int auto_steps(const TwoToneDrive& drive, const SystemParams& params, double duration) {
  // resolve the fastest phase, (k+2)ν, with ~40 slices per period
  const double w = (drive.k + 2) * params.nu;
  int n = static_cast<int>(std::ceil(duration * w * 40.0 / (2.0 * M_PI)));
  return std::max(n, 16);
}

}  // namespace

Vector direct_propagate(const TwoToneDrive& drive, const SystemParams& params,
                        double duration, const HilbertConfig& cfg, const Vector& psi,
                        const DirectPropagatorOptions& opts) {
  drive.validate();
  params.validate();
  if (duration < 0) throw std::invalid_argument("direct_propagate: negative duration");
  if (psi.size() != 2 * cfg.dim_fock)
    throw std::invalid_argument("direct_propagate: state must be qubit⊗oscillator");
  if (duration == 0.0) return psi;
  int steps = opts.initial_steps > 0 ? opts.initial_steps : auto_steps(drive, params, duration);
  Vector prev = propagate_steps(drive, params, duration, cfg, psi, steps);
  for (int r = 0; r < opts.max_refinements; ++r) {
    steps *= 2;
    Vector next = propagate_steps(drive, params, duration, cfg, psi, steps);
    const double gap = (next - prev).norm();
    if (gap < opts.refine_tol) return next;
    prev = std::move(next);
  }
  throw std::runtime_error("direct_propagate: step refinement did not converge");
}

Matrix direct_propagator(const TwoToneDrive& drive, const SystemParams& params,
                         double duration, const HilbertConfig& cfg,
                         const DirectPropagatorOptions& opts) {
  drive.validate();
  params.validate();
  if (duration < 0) throw std::invalid_argument("direct_propagator: negative duration");
  const int n = 2 * cfg.dim_fock;
  if (duration == 0.0) return Matrix::Identity(n, n);

  auto run = [&](int steps) {
    Matrix u(n, n);
    for (int col = 0; col < n; ++col) {
      Vector e = Vector::Zero(n);
      e(col) = 1.0;
      u.col(col) = propagate_steps(drive, params, duration, cfg, e, steps);
    }
    return u;
  };
  int steps = opts.initial_steps > 0 ? opts.initial_steps : auto_steps(drive, params, duration);
  Matrix prev = run(steps);
  for (int r = 0; r < opts.max_refinements; ++r) {
    steps *= 2;
    Matrix next = run(steps);
    const double gap = (next - prev).norm() / std::sqrt(static_cast<double>(n));
    if (gap < opts.refine_tol) return next;
    prev = std::move(next);
  }
  throw std::runtime_error("direct_propagator: step refinement did not converge");
}

}  // namespace iongate
