#pragma once

#include <functional>
#include <optional>

#include "iongate/metrics.hpp"
#include "iongate/noise.hpp"
#include "iongate/protocol.hpp"

namespace iongate {

struct SearchSpace {
  struct Param {
    std::string name;
    double lo = 0.0, hi = 1.0;
  };
  std::vector<Param> params;

  int dim() const { return static_cast<int>(params.size()); }
  void validate() const {
    if (params.empty()) throw std::invalid_argument("SearchSpace: empty");
    for (const auto& p : params)
      if (!(p.lo < p.hi))
        throw std::invalid_argument("SearchSpace: bad bounds for " + p.name);
  }
};

struct DEConfig {
  int population = 40;
  double mutation_lo = 0.5, mutation_hi = 1.0;
  double crossover = 0.7;
  double tol = 1e-6;
  int patience = 25;
  int max_iters = 1500;
  uint64_t rng_seed = 1;

  void validate() const {
    if (population < 4) throw std::invalid_argument("DEConfig: population must be >= 4");
    if (!(crossover > 0.0 && crossover <= 1.0))
      throw std::invalid_argument("DEConfig: crossover must be in (0,1]");
    if (!(mutation_lo > 0.0 && mutation_hi < 2.0 && mutation_lo <= mutation_hi))
      throw std::invalid_argument("DEConfig: mutation range must lie within (0,2)");
  }
};

struct DEResult {
  RealVector best;
  double best_loss = 0.0;
  std::vector<double> history;  // best loss per generation (non-increasing)
  bool converged = false;
  bool budget_exhausted = false;
  int generations = 0;
};

/// rand/1/bin differential evolution with per-generation dithered mutation
/// factor and reflection at the bounds. Candidate generation is serial and
/// seeded; only the loss evaluations run in parallel, so results are
/// reproducible bit-for-bit at the level of the loss sequence.
DEResult differential_evolution(
    const std::function<double(const RealVector&)>& loss, const SearchSpace& space,
    const DEConfig& config,
    const std::function<void(int, const DEResult&, const RealMatrix&, const RealVector&)>&
        checkpoint = {},
    const RealMatrix* initial_population = nullptr);

struct InputSpec {
  enum class Kind { Vacuum, Coherent, Thermal, Fock };
  Kind kind = Kind::Vacuum;
  Complex alpha{0.0, 0.0};
  double nbar = 0.0;
  int n = 0;
  double weight = 1.0;

  JointState make(const HilbertConfig& cfg) const;
};

enum class ProtocolTemplate { Cubic, CubicPreSqueeze, Quartic, Simultaneous };

struct Objective {
  enum class Kind { SingleStateFidelity, EnsembleAverage, ThermalInput };
  Kind kind = Kind::SingleStateFidelity;
  std::vector<InputSpec> inputs = {InputSpec{}};
  TargetGate target;
  std::optional<NoiseModel> noise;

  ProtocolTemplate templ = ProtocolTemplate::Cubic;
  int n_rounds = 1;
  SystemParams params;
  HamiltonianMode mode;
  HilbertConfig hilbert;
  std::map<int, double> omegas;
  DisplacementImpl displacement = DisplacementImpl::Ideal;
  bool u2_as_ideal_squeeze = false;  // gate-block form S(r)·U1'·U3·D(β)

  SearchSpace default_space() const;
  ProtocolSpec to_protocol(const RealVector& x) const;
  /// Converts the per-round squeeze parameter r to the U2 pulse duration,
  /// r = Ω₂ η² t / 4 at leading order.
  double r_to_t2(double r) const;
};

/// Precompiles every generator an objective needs; loss() is const and safe
/// to call from many threads at once.
class ObjectiveEvaluator {
 public:
  explicit ObjectiveEvaluator(const Objective& obj);

  /// −Σ wᵢ F(gen(x; inputᵢ), targetᵢ); leakage yields penalty loss +1.
  double loss(const RealVector& x) const;
  int leakage_penalties() const { return leak_count_; }
  const Objective& objective() const { return obj_; }

 private:
  Vector run_pure(const RealVector& x, const Vector& input) const;
  Matrix run_density(const RealVector& x, const Matrix& input) const;

  Objective obj_;
  HermitianGenerator gen_u1_, gen_u1p_, gen_u2_, gen_u3_, gen_u4_, gen_sim_;
  HermitianGenerator disp_gen_, sq_gen_;
  std::vector<JointState> inputs_;
  std::vector<JointState> targets_;
  std::vector<double> weights_;
  mutable std::atomic<int> leak_count_{0};
};

double evaluate(const RealVector& x, const Objective& obj, const SearchSpace& space);

struct PerturbationStats {
  double magnitude = 0.0;
  int trials = 0;
  double min_f = 0.0, mean_f = 0.0, max_f = 0.0, stddev_f = 0.0;
  double unperturbed_f = 0.0;
  std::vector<double> samples;
};

/// Independent uniform ±magnitude relative perturbations of every gate
/// parameter, per the stated robustness procedure.
PerturbationStats perturbation_study(const RealVector& params, double magnitude, int trials,
                                     const Objective& obj, uint64_t seed = 12345);

}  // namespace iongate
