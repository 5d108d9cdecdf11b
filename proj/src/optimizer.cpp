#include "iongate/optimizer.hpp"

#include <cmath>
#include <random>

#include "parallel.hpp"

namespace iongate {

// --- differential evolution --------------------------------------------------

DEResult differential_evolution(
    const std::function<double(const RealVector&)>& loss, const SearchSpace& space,
    const DEConfig& config,
    const std::function<void(int, const DEResult&, const RealMatrix&, const RealVector&)>&
        checkpoint,
    const RealMatrix* initial_population) {
  space.validate();
  config.validate();
  const int dim = space.dim();
  const int np = config.population;
  std::mt19937_64 rng(config.rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto reflect = [&](double v, double lo, double hi) {
    // reflect at the bounds, repeat until inside (span-periodic fallback)
    const double span = hi - lo;
    while (v < lo || v > hi) {
      if (v < lo) v = lo + (lo - v);
      if (v > hi) v = hi - (v - hi);
      if (!std::isfinite(v)) return lo + 0.5 * span;
    }
    return v;
  };

  RealMatrix pop(np, dim);
  for (int i = 0; i < np; ++i)
    for (int d = 0; d < dim; ++d)
      pop(i, d) = space.params[d].lo + unit(rng) * (space.params[d].hi - space.params[d].lo);
  if (initial_population != nullptr) {
    const int rows = std::min<int>(np, static_cast<int>(initial_population->rows()));
    for (int i = 0; i < rows; ++i)
      for (int d = 0; d < dim; ++d)
        pop(i, d) = reflect((*initial_population)(i, d), space.params[d].lo,
                            space.params[d].hi);
  }

  RealVector losses(np);
  parallel_for(np, [&](int i) { losses(i) = loss(pop.row(i).transpose()); });

  DEResult res;
  res.best_loss = losses.minCoeff();
  for (int i = 0; i < np; ++i)
    if (losses(i) == res.best_loss) {
      res.best = pop.row(i).transpose();
      break;
    }

  int stable = 0;
  std::uniform_int_distribution<int> pick(0, np - 1);
  RealMatrix trials(np, dim);
  for (int gen = 0; gen < config.max_iters; ++gen) {
    const double f =
        config.mutation_lo + unit(rng) * (config.mutation_hi - config.mutation_lo);
    // candidate construction is serial so the stream of random draws is
    // independent of evaluation scheduling
    for (int i = 0; i < np; ++i) {
      int r1, r2, r3;
      do r1 = pick(rng); while (r1 == i);
      do r2 = pick(rng); while (r2 == i || r2 == r1);
      do r3 = pick(rng); while (r3 == i || r3 == r1 || r3 == r2);
      const int jrand = std::uniform_int_distribution<int>(0, dim - 1)(rng);
      for (int d = 0; d < dim; ++d) {
        if (d == jrand || unit(rng) < config.crossover) {
          const double v = pop(r1, d) + f * (pop(r2, d) - pop(r3, d));
          trials(i, d) = reflect(v, space.params[d].lo, space.params[d].hi);
        } else {
          trials(i, d) = pop(i, d);
        }
      }
    }
    RealVector trial_losses(np);
    parallel_for(np, [&](int i) { trial_losses(i) = loss(trials.row(i).transpose()); });
    const double prev_best = res.best_loss;
    for (int i = 0; i < np; ++i) {
      if (trial_losses(i) <= losses(i)) {
        losses(i) = trial_losses(i);
        pop.row(i) = trials.row(i);
        if (trial_losses(i) < res.best_loss) {
          res.best_loss = trial_losses(i);
          res.best = trials.row(i).transpose();
        }
      }
    }
    res.history.push_back(res.best_loss);
    res.generations = gen + 1;
    if (checkpoint) checkpoint(gen, res, pop, losses);
    if (std::abs(prev_best - res.best_loss) < config.tol) {
      if (++stable >= config.patience) {
        res.converged = true;
        return res;
      }
    } else {
      stable = 0;
    }
  }
  res.budget_exhausted = true;
  return res;
}

// --- objective ----------------------------------------------------------------

JointState InputSpec::make(const HilbertConfig& cfg) const {
  switch (kind) {
    case Kind::Vacuum: return vacuum_state(cfg);
    case Kind::Coherent: return coherent_state(alpha, cfg);
    case Kind::Thermal: return thermal_state(nbar, cfg);
    case Kind::Fock: return fock_state(n, cfg);
  }
  throw std::logic_error("InputSpec: bad kind");
}

double Objective::r_to_t2(double r) const {
  auto it = omegas.find(2);
  const double omega2 = it == omegas.end() ? 0.3 : it->second;
  return 4.0 * r / (omega2 * params.eta * params.eta);
}

SearchSpace Objective::default_space() const {
  SearchSpace s;
  auto add = [&](const std::string& name, double lo, double hi) {
    s.params.push_back({name, lo, hi});
  };
  switch (templ) {
    case ProtocolTemplate::Cubic:
    case ProtocolTemplate::CubicPreSqueeze:
      for (int l = 1; l <= n_rounds; ++l) {
        const std::string sfx = "_" + std::to_string(l);
        add("t1p" + sfx, 0.0, 300.0);
        add("t3" + sfx, 0.0, 300.0);
        add("r" + sfx, -2.0, 2.0);
        add("beta" + sfx, -5.0, 2.0);
      }
      if (templ == ProtocolTemplate::CubicPreSqueeze) add("r_pre", -2.0, 2.0);
      break;
    case ProtocolTemplate::Quartic:
      add("t2", 0.0, 300.0);
      add("phi2", 0.0, 2.0 * M_PI);
      add("t4", 0.0, 300.0);
      add("phi4", 0.0, 2.0 * M_PI);
      add("theta", 0.0, 2.0 * M_PI);
      add("r_pre", -2.0, 2.0);
      add("r_post", -2.0, 2.0);
      break;
    case ProtocolTemplate::Simultaneous:
      add("t", 0.0, 300.0);
      add("r", -2.0, 2.0);
      add("beta", -5.0, 2.0);
      break;
  }
  return s;
}

ProtocolSpec Objective::to_protocol(const RealVector& x) const {
  switch (templ) {
    case ProtocolTemplate::Cubic:
    case ProtocolTemplate::CubicPreSqueeze: {
      const bool pre = templ == ProtocolTemplate::CubicPreSqueeze;
      if (x.size() != 4 * n_rounds + (pre ? 1 : 0))
        throw std::invalid_argument("Objective: parameter vector size mismatch");
      std::vector<CubicRoundTimes> rounds(n_rounds);
      for (int l = 0; l < n_rounds; ++l) {
        rounds[l].t1p = x(4 * l + 0);
        rounds[l].t3 = x(4 * l + 1);
        rounds[l].t2 = r_to_t2(x(4 * l + 2));
        rounds[l].beta = x(4 * l + 3);
      }
      return build_cubic_protocol(rounds, params, mode, hilbert, omegas,
                                  pre ? x(4 * n_rounds) : 0.0, displacement,
                                  u2_as_ideal_squeeze ? SqueezeImpl::Ideal
                                                      : SqueezeImpl::Pulse);
    }
    case ProtocolTemplate::Quartic: {
      if (x.size() != 7) throw std::invalid_argument("Objective: need 7 quartic parameters");
      return build_quartic_protocol(x(0), x(1), x(2), x(3), x(4), x(5), x(6), params,
                                    hilbert, omegas);
    }
    case ProtocolTemplate::Simultaneous: {
      if (x.size() != 3)
        throw std::invalid_argument("Objective: need 3 simultaneous parameters");
      return build_simultaneous_variant(x(0), params, hilbert, r_to_t2(x(1)), x(2), omegas);
    }
  }
  throw std::logic_error("Objective: bad template");
}

namespace {

Vector rotate_phases(double theta, const Vector& psi) {
  Vector out(psi.size());
  for (int n = 0; n < psi.size(); ++n) out(n) = psi(n) * std::exp(kI * (theta * n));
  return out;
}

}  // namespace

ObjectiveEvaluator::ObjectiveEvaluator(const Objective& obj) : obj_(obj) {
  obj_.hilbert.validate();
  obj_.params.validate();
  if (obj_.omegas.empty()) {
    obj_.omegas = obj_.templ == ProtocolTemplate::Quartic
                      ? std::map<int, double>{{2, 0.2}, {4, 0.8}}
                      : std::map<int, double>{{1, 0.3}, {2, 0.3}, {3, 0.3}};
  }
  const HilbertConfig& cfg = obj_.hilbert;
  const int d = cfg.dim_fock;

  auto gen_for = [&](int k, double phi) {
    TwoToneDrive drive{k, obj_.omegas.at(k), phi};
    return HermitianGenerator(rotating_hamiltonian_osc(drive, obj_.params, obj_.mode, cfg));
  };
  switch (obj_.templ) {
    case ProtocolTemplate::Cubic:
    case ProtocolTemplate::CubicPreSqueeze:
      if (obj_.displacement == DisplacementImpl::FirstSideband)
        gen_u1_ = gen_for(1, canonical_phase(1));
      gen_u1p_ = gen_for(1, canonical_phase(1) + M_PI);
      gen_u3_ = gen_for(3, canonical_phase(3));
      if (!obj_.u2_as_ideal_squeeze) gen_u2_ = gen_for(2, canonical_phase(2));
      break;
    case ProtocolTemplate::Quartic:
      gen_u2_ = gen_for(2, 0.0);  // free phases realized by number rotations
      gen_u4_ = gen_for(4, 0.0);
      break;
    case ProtocolTemplate::Simultaneous: {
      TwoToneDrive d1{1, obj_.omegas.at(1), canonical_phase(1)};
      TwoToneDrive d3{3, obj_.omegas.at(3), canonical_phase(3)};
      Matrix h = rotating_hamiltonian_osc(d1, obj_.params, obj_.mode, cfg) +
                 rotating_hamiltonian_osc(d3, obj_.params, obj_.mode, cfg);
      gen_sim_ = HermitianGenerator(h);
      gen_u2_ = gen_for(2, canonical_phase(2));
      break;
    }
  }
  Matrix a = Matrix::Zero(d, d);
  for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  disp_gen_ = HermitianGenerator(Complex(0, -1) * (a.adjoint() - a));
  Matrix a2 = a * a;
  sq_gen_ = HermitianGenerator(Complex(0, -0.5) * (a2 - a2.adjoint()));

  const Matrix u_t = ideal_gate(obj_.target, cfg);
  double wsum = 0.0;
  for (const auto& in : obj_.inputs) wsum += in.weight;
  for (const auto& in : obj_.inputs) {
    JointState st = in.make(cfg);
    weights_.push_back(in.weight / wsum);
    if (st.kind() == StateKind::PureVector) {
      Vector t = u_t * st.vec();
      t /= t.norm();
      JointState tgt = JointState::pure(std::move(t), cfg, false);
      tgt.check_leakage("objective target");
      targets_.push_back(std::move(tgt));
    } else {
      Matrix rho = u_t * st.rho() * u_t.adjoint();
      rho /= rho.trace().real();
      targets_.push_back(JointState::density(std::move(rho), cfg, false));
    }
    inputs_.push_back(std::move(st));
  }
}

Vector ObjectiveEvaluator::run_pure(const RealVector& x, const Vector& input) const {
  const HilbertConfig& cfg = obj_.hilbert;
  const int interior = cfg.interior();
  Vector psi = input;
  auto check = [&](const char* where) {
    const double pop = psi.segment(interior, cfg.dim_fock - interior).squaredNorm();
    if (pop > cfg.leakage_tol) throw LeakageError(where, pop, cfg.leakage_tol);
  };
  switch (obj_.templ) {
    case ProtocolTemplate::Cubic:
    case ProtocolTemplate::CubicPreSqueeze: {
      const bool pre = obj_.templ == ProtocolTemplate::CubicPreSqueeze;
      const double r_pre = pre ? x(4 * obj_.n_rounds) : 0.0;
      if (r_pre != 0.0) psi = sq_gen_.apply(r_pre, psi);
      for (int l = 0; l < obj_.n_rounds; ++l) {
        const double t1p = x(4 * l + 0);
        const double t3 = x(4 * l + 1);
        const double r = x(4 * l + 2);
        const double beta = x(4 * l + 3);
        if (obj_.displacement == DisplacementImpl::Ideal) {
          if (beta != 0.0) psi = disp_gen_.apply(beta, psi);
        } else {
          const double t1 = -4.0 * beta / (obj_.params.eta * obj_.omegas.at(1));
          if (t1 != 0.0) psi = gen_u1_.apply(t1, psi);
        }
        if (t3 != 0.0) psi = gen_u3_.apply(t3, psi);
        if (t1p != 0.0) psi = gen_u1p_.apply(t1p, psi);
        if (r != 0.0) {
          if (obj_.u2_as_ideal_squeeze)
            psi = sq_gen_.apply(r, psi);
          else
            psi = gen_u2_.apply(obj_.r_to_t2(r), psi);
        }
        check("cubic round");
      }
      if (r_pre != 0.0) psi = sq_gen_.apply(-r_pre, psi);
      break;
    }
    case ProtocolTemplate::Quartic: {
      const double t2 = x(0), phi2 = x(1), t4 = x(2), phi4 = x(3), theta = x(4);
      const double r_pre = x(5), r_post = x(6);
      if (r_pre != 0.0) psi = sq_gen_.apply(r_pre, psi);
      if (t2 != 0.0) {
        psi = rotate_phases(phi2 / 2.0, psi);
        psi = gen_u2_.apply(t2, psi);
        psi = rotate_phases(-phi2 / 2.0, psi);
      }
      check("quartic U2");
      if (t4 != 0.0) {
        psi = rotate_phases(phi4 / 4.0, psi);
        psi = gen_u4_.apply(t4, psi);
        psi = rotate_phases(-phi4 / 4.0, psi);
      }
      if (theta != 0.0) psi = rotate_phases(theta, psi);
      if (r_post != 0.0) psi = sq_gen_.apply(r_post, psi);
      check("quartic tail");
      break;
    }
    case ProtocolTemplate::Simultaneous: {
      const double t = x(0), r = x(1), beta = x(2);
      if (beta != 0.0) psi = disp_gen_.apply(beta, psi);
      if (t != 0.0) psi = gen_sim_.apply(t, psi);
      if (r != 0.0) psi = gen_u2_.apply(obj_.r_to_t2(r), psi);
      check("simultaneous");
      break;
    }
  }
  return psi;
}

Matrix ObjectiveEvaluator::run_density(const RealVector& x, const Matrix& input) const {
  // density inputs (thermal objectives) evolve by the same blocks as the pure
  // path, assembled as unitaries
  const HilbertConfig& cfg = obj_.hilbert;
  const int d = cfg.dim_fock;
  Matrix rho = input;
  auto apply_u = [&](const Matrix& u) { rho = u * rho * u.adjoint(); };
  switch (obj_.templ) {
    case ProtocolTemplate::Cubic:
    case ProtocolTemplate::CubicPreSqueeze: {
      const bool pre = obj_.templ == ProtocolTemplate::CubicPreSqueeze;
      const double r_pre = pre ? x(4 * obj_.n_rounds) : 0.0;
      if (r_pre != 0.0) apply_u(sq_gen_.unitary(r_pre));
      for (int l = 0; l < obj_.n_rounds; ++l) {
        const double beta = x(4 * l + 3);
        if (obj_.displacement == DisplacementImpl::Ideal) {
          if (beta != 0.0) apply_u(disp_gen_.unitary(beta));
        } else {
          const double t1 = -4.0 * beta / (obj_.params.eta * obj_.omegas.at(1));
          if (t1 != 0.0) apply_u(gen_u1_.unitary(t1));
        }
        if (x(4 * l + 1) != 0.0) apply_u(gen_u3_.unitary(x(4 * l + 1)));
        if (x(4 * l + 0) != 0.0) apply_u(gen_u1p_.unitary(x(4 * l + 0)));
        const double r = x(4 * l + 2);
        if (r != 0.0) {
          if (obj_.u2_as_ideal_squeeze)
            apply_u(sq_gen_.unitary(r));
          else
            apply_u(gen_u2_.unitary(obj_.r_to_t2(r)));
        }
      }
      if (r_pre != 0.0) apply_u(sq_gen_.unitary(-r_pre));
      break;
    }
    default:
      throw std::logic_error("ObjectiveEvaluator: density path supports cubic templates");
  }
  double pop = 0.0;
  for (int n = cfg.interior(); n < d; ++n) pop += std::real(rho(n, n));
  if (pop > cfg.leakage_tol) throw LeakageError("density protocol", pop, cfg.leakage_tol);
  return rho;
}

double ObjectiveEvaluator::loss(const RealVector& x) const {
  try {
    double acc = 0.0;
    for (size_t i = 0; i < inputs_.size(); ++i) {
      double f = 0.0;
      if (inputs_[i].kind() == StateKind::PureVector && !obj_.noise) {
        Vector out = run_pure(x, inputs_[i].vec());
        const Complex ov = targets_[i].vec().adjoint() * out;
        f = std::norm(ov) / out.squaredNorm();
      } else if (!obj_.noise) {
        Matrix out = run_density(x, inputs_[i].to_density());
        out /= out.trace().real();
        f = fidelity(out, targets_[i].to_density());
      } else {
        ProtocolSpec spec = obj_.to_protocol(x);
        JointState out = apply_protocol(spec, inputs_[i], &*obj_.noise);
        f = fidelity(JointState::density(out.motional_density(), obj_.hilbert, false),
                     targets_[i]);
      }
      acc += weights_[i] * f;
    }
    return -acc;
  } catch (const LeakageError&) {
    leak_count_.fetch_add(1, std::memory_order_relaxed);
    return 1.0;
  }
}

double evaluate(const RealVector& x, const Objective& obj, const SearchSpace& space) {
  (void)space;
  ObjectiveEvaluator ev(obj);
  return ev.loss(x);
}

PerturbationStats perturbation_study(const RealVector& params, double magnitude, int trials,
                                     const Objective& obj, uint64_t seed) {
  if (magnitude < 0) throw std::invalid_argument("perturbation_study: magnitude < 0");
  if (trials < 1) throw std::invalid_argument("perturbation_study: trials < 1");
  ObjectiveEvaluator ev(obj);
  PerturbationStats st;
  st.magnitude = magnitude;
  st.trials = trials;
  st.unperturbed_f = -ev.loss(params);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-magnitude, magnitude);
  RealMatrix perturbed(trials, params.size());
  for (int t = 0; t < trials; ++t)
    for (int d = 0; d < params.size(); ++d) perturbed(t, d) = params(d) * (1.0 + u(rng));

  st.samples.resize(trials);
  parallel_for(trials, [&](int t) { st.samples[t] = -ev.loss(perturbed.row(t).transpose()); });

  st.min_f = st.samples[0];
  st.max_f = st.samples[0];
  double sum = 0.0;
  for (double f : st.samples) {
    st.min_f = std::min(st.min_f, f);
    st.max_f = std::max(st.max_f, f);
    sum += f;
  }
  st.mean_f = sum / trials;
  double var = 0.0;
  for (double f : st.samples) var += (f - st.mean_f) * (f - st.mean_f);
  st.stddev_f = trials > 1 ? std::sqrt(var / (trials - 1)) : 0.0;
  return st;
}

}  // namespace iongate
