#pragma once

#include "ptz/block_dynamics.hpp"
#include "ptz/coherence_states.hpp"
#include "ptz/optimizers.hpp"
#include "ptz/receiver_unitary.hpp"
#include "ptz/transfer_maps.hpp"
#include "ptz/types.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ptz {

// ---------------------------------------------------------------------------
// Registration time

enum class RegistrationCriterion {
  max_excitation_probability,  ///< |<receiver all up| V^(N_S) |sender all up>|^2
  max_frobenius_w,             ///< ||W(t, 0)||_F
  max_lambda_opt,              ///< optimized minimal scale factor
};

std::string_view to_string(RegistrationCriterion c);
RegistrationCriterion registration_criterion_from_string(std::string_view name);

struct TimeWindow {
  double lo = 0.0;
  double hi = 0.0;
  double step = 0.01;

  /// [0.7 N, 1.3 N].
  static TimeWindow around_length(int n_sites, double step = 0.01);
  void validate() const;
  std::vector<double> grid() const;
};

struct RegistrationTime {
  double t_star = 0.0;
  double value = 0.0;
  RegistrationCriterion criterion = RegistrationCriterion::max_frobenius_w;
  TimeWindow window;
};

/// Grid scan over the window followed by golden-section refinement around the
/// best grid point. Throws NoMaximumError when the criterion is flat.
RegistrationTime find_registration_time(const std::function<double(double)>& criterion, RegistrationCriterion kind,
                                        const TimeWindow& window);

/// Criterion value at time t with phi = 0; the cache must hold sector N_S
/// for max_excitation_probability and sector 1 for max_frobenius_w.
double registration_criterion_value(const SpectralCache& cache, RegistrationCriterion kind, int n_sender, double t);

RegistrationTime find_registration_time(const SpectralCache& cache, RegistrationCriterion kind, int n_sender,
                                        const TimeWindow& window);

// ---------------------------------------------------------------------------
// Linear sender -> receiver maps and the PTZ fixed-point systems

/// Linear map on zero-coherence states (need not preserve Hermiticity of
/// probes; must be linear).
using StateMap = std::function<ZeroCoherenceState(const ZeroCoherenceState&)>;

StateMap make_state_map(const EvolvedTransfer& transfer);

/// Sender with blocks 0 and 1 only: r^(1) = W s^(1) W^dagger and
/// r^(0) = s^(0) + tr s^(1) - tr r^(1).
StateMap one_excitation_state_map(const Matrix& w);

struct PTZSolution {
  ZeroCoherenceState sender_state;
  ZeroCoherenceState restored_state;  ///< U^ex applied to the receiver state
  double t_star = 0.0;
  std::optional<ReceiverUnitaryParams> phi;
  double residual = 0.0;  ///< S_T at phi (0 for the complete protocol)
  double delta = 0.0;
  BlockAddress swap_target;
  double round_trip_error = 0.0;
  double min_eigenvalue = 0.0;
};

/// Complete-space protocol (K = N_S): r^(k) = s^(k) for 1 <= k < N_S,
/// r^(N_S) = s^(0), unit trace, solved jointly by least squares.
PTZSolution solve_ptz_complete(const StateMap& map, int n_sender, double t_star);
PTZSolution solve_ptz_complete(std::shared_ptr<const SpectralCache> cache, int n_sender, double t_star);

/// The sender state of the restricted protocol for a map whose row 1 of the
/// K-block is not necessarily zero: s^(0) = 0, s^(K)_{1i} = s^(K)_{i1} = 0
/// (i >= 2), r^(k) = s^(k) for 1 <= k < K, tilde r^(K) = tilde s^(K), unit
/// trace. No positivity or round-trip checks.
ZeroCoherenceState restricted_fixed_point(const StateMap& map, int n_sender, int max_excitation);

/// Restricted-space protocol. `residual` is S_T of the supplied map and must
/// not exceed 1e-6; U^ex swaps r^(0) with r^(K)_{11}.
PTZSolution solve_ptz_restricted(const StateMap& map, int n_sender, int max_excitation, double t_star, double residual);

// ---------------------------------------------------------------------------
// Objectives

enum class ResidualForm { sum, max };

std::string_view to_string(ResidualForm f);
ResidualForm residual_form_from_string(std::string_view name);

/// Sum or max of |T_{l,1;n,m}| and |T_{1,l;n,m}| over l, with (n, m) either
/// diagonal or an off-diagonal pair with n, m >= 2.
double residual_S_T(const TransferTensor& tensor, ResidualForm form);

/// Real and imaginary parts of the constrained entries of residual_S_T.
RealVector constrained_entries(const TransferTensor& tensor);

struct ObjectiveSpec {
  ResidualForm residual_form = ResidualForm::max;
  double w1 = 1.0;
  double w2 = 1.0;
  double angle_bound = 3.141592653589793;  ///< angles searched in [-bound, bound]

  void validate() const;
};

/// Restricted-protocol objective at fixed t: S_T, deviation and F_T as
/// functions of the flat angle vector.
class RestrictedObjective {
 public:
  RestrictedObjective(std::shared_ptr<const SpectralCache> cache, int n_sender, int n_extended, int max_excitation,
                      double t, ObjectiveSpec spec = {});

  int dimension() const;
  double t() const { return t_; }
  int n_sender() const { return n_sender_; }
  int max_excitation() const { return k_; }
  const ObjectiveSpec& spec() const { return spec_; }

  ReceiverUnitaryParams params(const RealVector& flat) const;
  TransferTensor tensor(const RealVector& flat) const;
  StateMap state_map(const RealVector& flat) const;
  double s_t(const RealVector& flat) const;
  /// Deviation of the restricted fixed point from the swapped-concentrated
  /// asymptotic state; +inf when the fixed-point system is degenerate.
  double delta(const RealVector& flat) const;
  double f_t(const RealVector& flat) const;
  /// Equations refined exactly: the 2 N_S real parts of W_{1j} for K = 1,
  /// the constrained tensor entries otherwise.
  RealVector constraint_residual(const RealVector& flat) const;

 private:
  std::shared_ptr<const SpectralCache> cache_;
  int n_sender_;
  int n_extended_;
  int k_;
  double t_;
  ObjectiveSpec spec_;
  std::optional<TransferPipeline> pipeline_;
  OneExcitationKernel kernel_;
};

struct RestrictedRun {
  OptimizationResult global;
  OptimizationResult polished;
  RootRefineResult refined;
  double s_t_global = 0.0;
  double s_t_polished = 0.0;
  double s_t_refined = 0.0;
  bool constraint_polished = false;  ///< S_T-only descent was needed to reach the refinement basin
  PTZSolution solution;
};

/// Step 1 (DE on F_T, simplex polish, exact refinement of the row-1
/// equations; an S_T-only polish first when the F_T minimum lies outside the
/// refinement basin), step 2 (restricted linear system), step 3 (U^ex).
RestrictedRun run_ptz_restricted(const RestrictedObjective& objective, const DEConfig& de,
                                 const NelderMeadConfig& polish = {}, const RootRefineConfig& refine = {});

// ---------------------------------------------------------------------------
// Arbitrary-parameter transfer

struct ArbitraryScanPoint {
  double t = 0.0;
  double lambda_opt = 0.0;
  double lambda_opt_offdiag = 0.0;
  double offdiag_residual = 0.0;
  bool refined = false;
  RealVector angles;
};

struct ArbitraryConfig {
  TimeWindow window;
  DEConfig de;
  NelderMeadConfig polish;
  RootRefineConfig refine;
  double feasible_residual = 1e-8;
  double infeasible_floor = 1e-4;
  int runs = 1;      ///< independent DE runs per time point (seed + r * 1000003); best kept
  int attempts = 3;  ///< extra reseeds while a point stays infeasible
  int threads = 1;  ///< time points evaluated concurrently
};

struct ArbitraryResult {
  ReceiverUnitaryParams phi_opt;
  double t_opt = 0.0;
  OneExcitationMap map;
  ScaleFactors scales;
  std::vector<ArbitraryScanPoint> scan;
  bool size_bound_satisfied = true;
  std::string size_bound_note;
};

/// sqrt(sum_{i != j} |W_ij|^2) - min |lambda_ij| for the map U_R(phi) V~.
double arbitrary_objective(const OneExcitationKernel& kernel, int n_extended, const RealVector& flat);

/// Optimizes one time point: DE, simplex polish, then exact refinement of
/// the off-diagonal equations (kept only if it succeeds). Repeated for
/// config.runs seeds, then reseeded while the best result is infeasible.
ArbitraryScanPoint optimize_arbitrary_point(const OneExcitationKernel& kernel, int n_extended, const ArbitraryConfig& config);

/// Optimizes every time in `times` (point i uses DE seed de.seed + i).
std::vector<ArbitraryScanPoint> scan_arbitrary_parameter(const TransferPipeline& pipeline, const std::vector<double>& times,
                                                         const ArbitraryConfig& config);

/// Picks the feasible scan point with the largest lambda_opt. Throws
/// InfeasibleConfigurationError when no point is feasible.
ArbitraryResult select_arbitrary_optimum(const TransferPipeline& pipeline, std::vector<ArbitraryScanPoint> scan,
                                         const ArbitraryConfig& config);

/// Scan over config.window followed by select_arbitrary_optimum.
ArbitraryResult solve_arbitrary_parameter(std::shared_ptr<const SpectralCache> cache, int n_sender, int n_extended,
                                          const ArbitraryConfig& config);

/// max_{ij} |r^(1)_ij - lambda_ij s^(1)_ij| over the given senders.
double structural_restoring_error(const OneExcitationMap& map, const std::vector<ZeroCoherenceState>& senders);

}  // namespace ptz
