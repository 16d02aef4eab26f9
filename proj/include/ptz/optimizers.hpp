#pragma once

#include "ptz/types.hpp"

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ptz {

/// Objective functions must be pure: DE may call them from several threads.
using Objective = std::function<double(const RealVector&)>;
using ResidualFunction = std::function<RealVector(const RealVector&)>;

struct Bounds {
  RealVector lower;
  RealVector upper;

  static Bounds uniform(int dim, double lo, double hi);
  int dim() const { return static_cast<int>(lower.size()); }
  void validate() const;
};

/// Stateless generator: every draw is a hash of (seed, stream, index, draw),
/// so results do not depend on evaluation order or thread count.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}
  std::uint64_t bits(std::uint64_t stream, std::uint64_t index, std::uint64_t draw) const;
  /// Uniform in [0, 1).
  double uniform(std::uint64_t stream, std::uint64_t index, std::uint64_t draw) const;
  /// Standard normal (Box-Muller on two consecutive draws).
  double normal(std::uint64_t stream, std::uint64_t index, std::uint64_t draw) const;
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

struct DEConfig {
  int population_size = 45;
  double crossover_probability = 0.7;
  double mutation_lo = 0.5;  ///< F drawn uniformly from [mutation_lo, mutation_hi] each generation
  double mutation_hi = 1.0;
  int max_generations = 1000;
  /// Stop when stddev(population values) <= spread_atol + spread_rtol * |mean|.
  double spread_atol = 1e-12;
  double spread_rtol = 1e-6;
  std::uint64_t seed = 0;
  int threads = 1;

  /// Population 15 N_S, CR 0.7, F in [0.5, 1].
  static DEConfig for_sender(int n_sender);
  /// Population 1000 N_S, F 1.9, CR 0.3.
  static DEConfig stress_profile(int n_sender);
  void validate() const;
};

struct HistoryEntry {
  int generation = 0;
  double best = 0.0;
  double mean = 0.0;
  double spread = 0.0;
};

struct OptimizationResult {
  RealVector x;
  double value = 0.0;
  long evaluations = 0;
  bool converged = false;
  std::vector<HistoryEntry> history;
  /// DE only: the final population, best first.
  std::vector<RealVector> population;
};

/// DE/rand/1/bin with per-generation dithered F and greedy selection.
OptimizationResult differential_evolution(const Objective& f, const Bounds& bounds, const DEConfig& config);

struct NelderMeadConfig {
  int max_evaluations = 0;  ///< 0 -> 400 * dim
  double xatol = 1e-12;
  double fatol = 1e-15;
  double initial_step = 0.05;
  int restarts = 4;  ///< re-inflate the simplex around the best point
  /// Dimension-dependent expansion/contraction/shrink coefficients.
  bool adaptive = true;
};

/// Simplex descent from `seed`; the returned value never exceeds f(seed).
OptimizationResult local_polish(const Objective& f, const RealVector& seed, const NelderMeadConfig& config = {});

struct RootRefineConfig {
  double tolerance = 1e-12;    ///< stop when ||r||_inf < tolerance
  double basin = 1e-2;         ///< seed must satisfy ||r||_inf < basin
  int max_iterations = 200;
  int max_stalls = 10;         ///< consecutive non-improving steps before giving up
  double fd_step = 1e-6;       ///< central-difference step for the Jacobian
};

struct RootRefineResult {
  RealVector x;
  double residual_inf = 0.0;
  int iterations = 0;
  bool converged = false;
};

class NoConvergenceError : public std::runtime_error {
 public:
  NoConvergenceError(const std::string& what, RealVector best, double residual)
      : std::runtime_error(what), best_(std::move(best)), residual_(residual) {}
  const RealVector& best() const { return best_; }
  double residual() const { return residual_; }

 private:
  RealVector best_;
  double residual_;
};

/// Levenberg-Marquardt on a real residual vector with a finite-difference
/// Jacobian. Throws PreconditionViolation outside the basin and
/// NoConvergenceError after max_stalls rejected steps.
RootRefineResult exact_root_refine(const ResidualFunction& r, const RealVector& seed, const RootRefineConfig& config = {});

struct RandomSearchConfig {
  int samples = 20000;
  int polished = 8;  ///< best samples handed to the simplex polish
  std::uint64_t seed = 0;
  int threads = 1;
  NelderMeadConfig polish;
};

/// Uniform multistart sampling followed by simplex polish of the best samples.
OptimizationResult random_search(const Objective& f, const Bounds& bounds, const RandomSearchConfig& config);

struct AnnealingConfig {
  double initial_temperature = 5230.0;
  double visiting_q = 2.62;
  double acceptance_q = -5.0;
  double restart_ratio = 2e-5;
  int max_iterations = 1000;
  int restarts = 4;
  std::uint64_t seed = 0;
  NelderMeadConfig polish;
};

/// Generalized simulated annealing (Tsallis visiting distribution) with
/// restarts; each restart's best point is polished by the simplex method.
OptimizationResult generalized_annealing(const Objective& f, const Bounds& bounds, const AnnealingConfig& config);

struct CrossValidationReport {
  OptimizationResult differential_evolution;
  OptimizationResult random_search;
  OptimizationResult annealing;
  double max_disagreement = 0.0;
};

/// Runs DE (its best `de_candidates` final members polished with `polish`),
/// random multistart and annealing on one objective and reports the largest
/// pairwise gap between their best values.
CrossValidationReport cross_validate_global(const Objective& f, const Bounds& bounds, const DEConfig& de,
                                            const RandomSearchConfig& rs, const AnnealingConfig& sa,
                                            const NelderMeadConfig& polish = {}, int de_candidates = 1);

}  // namespace ptz
