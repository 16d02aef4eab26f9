#include "ptz/ptz_solvers.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <thread>

namespace ptz {

namespace {

using Index = Eigen::Index;

// ---------------------------------------------------------------------------
// Real parametrization of Hermitian block entries.

struct Slot {
  int block;
  int i;
  int j;
  bool imag;
};

void add_hermitian_slots(std::vector<Slot>& slots, int block, const std::vector<int>& indices) {
  for (std::size_t a = 0; a < indices.size(); ++a) {
    for (std::size_t b = a; b < indices.size(); ++b) {
      slots.push_back({block, indices[a], indices[b], false});
      if (a != b) slots.push_back({block, indices[a], indices[b], true});
    }
  }
}

void push_hermitian_params(std::vector<double>& out, const Matrix& m, const std::vector<int>& indices) {
  for (std::size_t a = 0; a < indices.size(); ++a) {
    for (std::size_t b = a; b < indices.size(); ++b) {
      const Complex v = m(indices[a], indices[b]);
      out.push_back(v.real());
      if (a != b) out.push_back(v.imag());
    }
  }
}

std::vector<int> range(int lo, int hi) {
  std::vector<int> v;
  for (int i = lo; i < hi; ++i) v.push_back(i);
  return v;
}

void add_to_state(ZeroCoherenceState& s, const Slot& slot, double x) {
  Matrix& b = s.block(slot.block);
  if (slot.i == slot.j) {
    b(slot.i, slot.i) += x;
  } else if (!slot.imag) {
    b(slot.i, slot.j) += x;
    b(slot.j, slot.i) += x;
  } else {
    b(slot.i, slot.j) += Complex(0.0, x);
    b(slot.j, slot.i) -= Complex(0.0, x);
  }
}

using ResidualOfState = std::function<RealVector(const ZeroCoherenceState& s, const ZeroCoherenceState& r)>;

// The residual is affine in the unknown slot values; probe it with unit
// vectors, then solve the least-squares system with a relative SVD cutoff.
ZeroCoherenceState solve_affine(const StateMap& map, int n_sender, int max_k, const std::vector<Slot>& slots,
                                const ResidualOfState& residual) {
  const ZeroCoherenceState zero(n_sender, max_k);
  auto eval = [&](const ZeroCoherenceState& s) {
    const ZeroCoherenceState r = map(s);
    if (r.subsystem_size() != n_sender || r.max_excitation() != max_k) {
      throw DomainError("PTZ solver: receiver layout differs from sender layout");
    }
    return residual(s, r);
  };
  const RealVector r0 = eval(zero);
  RealMatrix jac(r0.size(), static_cast<Index>(slots.size()));
  for (std::size_t a = 0; a < slots.size(); ++a) {
    ZeroCoherenceState probe = zero;
    add_to_state(probe, slots[a], 1.0);
    jac.col(static_cast<Index>(a)) = eval(probe) - r0;
  }
  Eigen::JacobiSVD<RealMatrix> svd(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RealVector& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) throw DegenerateTimeError("PTZ solver: linear system is identically zero");
  const RealVector proj = svd.matrixU().transpose() * (-r0);
  RealVector coeff = RealVector::Zero(sv.size());
  for (Index i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-10 * sv[0]) coeff[i] = proj[i] / sv[i];
  const RealVector x = svd.matrixV() * coeff;
  const double inconsistency = (r0 + jac * x).cwiseAbs().maxCoeff();
  if (inconsistency > 1e-8) {
    throw DegenerateTimeError("PTZ solver: linear system is singular and inconsistent (residual " +
                              std::to_string(inconsistency) + "); choose a different registration time");
  }
  ZeroCoherenceState s = zero;
  for (std::size_t a = 0; a < slots.size(); ++a) add_to_state(s, slots[a], x[static_cast<Index>(a)]);
  return s;
}

void finish_solution(PTZSolution& sol, const StateMap& map, const AsymptoticPTZ& reference) {
  sol.min_eigenvalue = sol.sender_state.min_eigenvalue();
  sol.sender_state.validate_density(1e-10, 1e-10, -1e-10);
  sol.restored_state = apply_exchange_unitary(map(sol.sender_state), sol.swap_target);
  sol.round_trip_error = frobenius_norm(sol.restored_state - sol.sender_state);
  sol.delta = deviation(sol.sender_state, reference);
}

double golden_max(const std::function<double(double)>& f, double a, double b, double tol) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a);
  double d = a + g * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

template <typename Body>
void parallel_indices(int n, int threads, Body&& body) {
  const int workers = std::clamp(threads, 1, std::max(n, 1));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += workers) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

// K = 1 shortcut for the restricted fixed point: with s^(0) = 0 and row 1 of
// s^(1) zero apart from s11, tilde s = s11 X where X - B X B^dagger = c c^dagger
// (B, c: rows 2.. of W, columns 2.. and 1), and s11 = 1 / (1 + tr X).
double one_excitation_delta(const Matrix& w) {
  const Index d = w.cols();
  if (d == 1) return 0.0;
  const Index m = d - 1;
  const Matrix b = w.bottomRightCorner(m, m);
  const Vector c = w.col(0).tail(m);
  Matrix a = Matrix::Identity(m * m, m * m);
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i < m; ++i)
      for (Index l = 0; l < m; ++l)
        for (Index k = 0; k < m; ++k) a(k + l * m, i + j * m) -= std::conj(b(l, j)) * b(k, i);
  const Matrix cc = c * c.adjoint();
  const Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) return std::numeric_limits<double>::infinity();
  const Vector x = lu.solve(Eigen::Map<const Vector>(cc.data(), m * m));
  const double trace = x.reshaped(m, m).trace().real();
  const double s11 = 1.0 / (1.0 + trace);
  return std::sqrt((1.0 - s11) * (1.0 - s11) + s11 * s11 * x.squaredNorm());
}

double one_excitation_s_t(const Matrix& w, ResidualForm form) {
  const RealMatrix a = w.cwiseAbs();
  const Index dr = a.rows();
  const Index ds = a.cols();
  double acc = 0.0;
  for (Index p = 0; p < dr; ++p) {
    for (Index q = 0; q < dr; ++q) {
      if (p != 0 && q != 0) continue;
      for (Index n = 0; n < ds; ++n) {
        for (Index k = 0; k < ds; ++k) {
          if (n != k && (n == 0 || k == 0)) continue;
          const double v = a(p, n) * a(q, k);
          acc = form == ResidualForm::sum ? acc + v : std::max(acc, v);
        }
      }
    }
  }
  return acc;
}

RealVector offdiag_parts(const Matrix& w) {
  std::vector<double> v;
  for (Index i = 0; i < w.rows(); ++i)
    for (Index j = 0; j < w.cols(); ++j)
      if (i != j) {
        v.push_back(w(i, j).real());
        v.push_back(w(i, j).imag());
      }
  return Eigen::Map<RealVector>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(RegistrationCriterion c) {
  switch (c) {
    case RegistrationCriterion::max_excitation_probability: return "max-excitation-probability";
    case RegistrationCriterion::max_frobenius_w: return "max-frobenius-w";
    case RegistrationCriterion::max_lambda_opt: return "max-lambda-opt";
  }
  return "unknown";
}

RegistrationCriterion registration_criterion_from_string(std::string_view name) {
  if (name == "max-excitation-probability") return RegistrationCriterion::max_excitation_probability;
  if (name == "max-frobenius-w") return RegistrationCriterion::max_frobenius_w;
  if (name == "max-lambda-opt") return RegistrationCriterion::max_lambda_opt;
  throw DomainError("unknown registration criterion '" + std::string(name) + "'");
}

TimeWindow TimeWindow::around_length(int n_sites, double step) { return {0.7 * n_sites, 1.3 * n_sites, step}; }

void TimeWindow::validate() const {
  if (!(lo > 0.0 && hi > lo)) throw DomainError("time window must satisfy 0 < lo < hi");
  if (!(step > 0.0) || step > hi - lo) throw DomainError("time window step must be positive and fit the window");
}

std::vector<double> TimeWindow::grid() const {
  validate();
  std::vector<double> g;
  const auto n = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
  for (int i = 0; i <= n; ++i) g.push_back(lo + i * step);
  return g;
}

RegistrationTime find_registration_time(const std::function<double(double)>& criterion, RegistrationCriterion kind,
                                        const TimeWindow& window) {
  const std::vector<double> grid = window.grid();
  std::vector<double> values(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) values[i] = criterion(grid[i]);
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  if (*hi_it - *lo_it <= 1e-14 * std::max(1.0, std::abs(*hi_it))) {
    throw NoMaximumError("registration criterion is flat over [" + format_real(window.lo) + ", " +
                         format_real(window.hi) + "]");
  }
  const double tg = grid[static_cast<std::size_t>(hi_it - values.begin())];
  const double a = std::max(window.lo, tg - window.step);
  const double b = std::min(window.hi, tg + window.step);
  RegistrationTime out;
  out.t_star = golden_max(criterion, a, b, 1e-10);
  out.value = criterion(out.t_star);
  if (out.value < *hi_it) {
    out.t_star = tg;
    out.value = *hi_it;
  }
  out.criterion = kind;
  out.window = window;
  return out;
}

double registration_criterion_value(const SpectralCache& cache, RegistrationCriterion kind, int n_sender, double t) {
  const int n = cache.chain().n_sites;
  if (n_sender < 1 || 2 * n_sender > n) throw DomainError("registration criterion: need 2 N_S <= N");
  switch (kind) {
    case RegistrationCriterion::max_excitation_probability: {
      const ExcitationBasis& b = cache.basis(n_sender);
      SiteSet sender(n_sender), receiver(n_sender);
      for (int i = 0; i < n_sender; ++i) {
        sender[i] = i + 1;
        receiver[i] = n - n_sender + i + 1;
      }
      return std::norm(propagator_element(cache, n_sender, t, b.index_of(receiver), b.index_of(sender)));
    }
    case RegistrationCriterion::max_frobenius_w: {
      std::vector<std::size_t> cols(static_cast<std::size_t>(n_sender));
      std::iota(cols.begin(), cols.end(), std::size_t{0});
      return propagator_columns(cache, 1, t, cols).bottomRows(n_sender).norm();
    }
    case RegistrationCriterion::max_lambda_opt:
      throw DomainError("max-lambda-opt needs the optimizing scan of solve_arbitrary_parameter");
  }
  return 0.0;
}

RegistrationTime find_registration_time(const SpectralCache& cache, RegistrationCriterion kind, int n_sender,
                                        const TimeWindow& window) {
  return find_registration_time([&](double t) { return registration_criterion_value(cache, kind, n_sender, t); }, kind,
                                window);
}

// ---------------------------------------------------------------------------

StateMap make_state_map(const EvolvedTransfer& transfer) {
  return [transfer](const ZeroCoherenceState& s) { return transfer.receiver_state(s); };
}

StateMap one_excitation_state_map(const Matrix& w) {
  return [w](const ZeroCoherenceState& s) {
    if (s.max_excitation() > 1) throw DomainError("one-excitation map: sender holds more than one excitation");
    if (s.subsystem_size() != w.cols()) throw DomainError("one-excitation map: sender size mismatch");
    ZeroCoherenceState r(static_cast<int>(w.rows()), s.max_excitation());
    r.block(0) = s.block(0);
    if (s.max_excitation() == 1) {
      r.block(1) = w * s.block(1) * w.adjoint();
      r.block(0)(0, 0) += s.block(1).trace() - r.block(1).trace();
    }
    return r;
  };
}

PTZSolution solve_ptz_complete(const StateMap& map, int n_sender, double t_star) {
  if (n_sender < 1) throw DomainError("solve_ptz_complete: sender size must be positive");
  const int ks = n_sender;
  std::vector<Slot> slots;
  for (int k = 0; k <= ks; ++k) add_hermitian_slots(slots, k, range(0, static_cast<int>(binomial(n_sender, k))));

  const auto residual = [ks](const ZeroCoherenceState& s, const ZeroCoherenceState& r) {
    std::vector<double> v;
    for (int k = 1; k < ks; ++k) push_hermitian_params(v, r.block(k) - s.block(k), range(0, s.block_dim(k)));
    push_hermitian_params(v, r.block(ks) - s.block(0), {0});
    v.push_back(s.trace().real() - 1.0);
    return RealVector(Eigen::Map<RealVector>(v.data(), static_cast<Index>(v.size())));
  };

  PTZSolution sol;
  sol.sender_state = solve_affine(map, n_sender, ks, slots, residual);
  sol.t_star = t_star;
  sol.swap_target = {ks, 0};
  finish_solution(sol, map, AsymptoticPTZ::swapped_concentrated(n_sender, ks, sol.swap_target));
  return sol;
}

PTZSolution solve_ptz_complete(std::shared_ptr<const SpectralCache> cache, int n_sender, double t_star) {
  const int n = cache->chain().n_sites;
  const TransferPipeline pipeline(cache, {n, n_sender, n_sender, n_sender}, n_sender);
  return solve_ptz_complete(make_state_map(pipeline.at(t_star, ReceiverUnitaryParams(n_sender, 0))), n_sender, t_star);
}

ZeroCoherenceState restricted_fixed_point(const StateMap& map, int n_sender, int max_excitation) {
  const int kk = max_excitation;
  if (kk < 1 || kk > n_sender) throw DomainError("restricted PTZ: K outside [1, N_S]");
  std::vector<Slot> slots;
  for (int k = 1; k < kk; ++k) add_hermitian_slots(slots, k, range(0, static_cast<int>(binomial(n_sender, k))));
  const int dk = static_cast<int>(binomial(n_sender, kk));
  const std::vector<int> tail = range(1, dk);
  slots.push_back({kk, 0, 0, false});
  add_hermitian_slots(slots, kk, tail);

  const auto residual = [kk, tail](const ZeroCoherenceState& s, const ZeroCoherenceState& r) {
    std::vector<double> v;
    for (int k = 1; k < kk; ++k) push_hermitian_params(v, r.block(k) - s.block(k), range(0, s.block_dim(k)));
    push_hermitian_params(v, r.block(kk) - s.block(kk), tail);
    v.push_back(s.trace().real() - 1.0);
    return RealVector(Eigen::Map<RealVector>(v.data(), static_cast<Index>(v.size())));
  };
  return solve_affine(map, n_sender, kk, slots, residual);
}

PTZSolution solve_ptz_restricted(const StateMap& map, int n_sender, int max_excitation, double t_star, double residual) {
  if (!(residual <= 1e-6)) {
    throw PreconditionViolation("solve_ptz_restricted: S_T = " + format_real(residual) +
                                " exceeds 1e-6; refine the unitary parameters first");
  }
  PTZSolution sol;
  sol.sender_state = restricted_fixed_point(map, n_sender, max_excitation);
  sol.t_star = t_star;
  sol.residual = residual;
  sol.swap_target = {max_excitation, 0};
  finish_solution(sol, map, AsymptoticPTZ::swapped_concentrated(n_sender, max_excitation, sol.swap_target));
  return sol;
}

// ---------------------------------------------------------------------------

std::string_view to_string(ResidualForm f) { return f == ResidualForm::sum ? "sum" : "max"; }

ResidualForm residual_form_from_string(std::string_view name) {
  if (name == "sum") return ResidualForm::sum;
  if (name == "max") return ResidualForm::max;
  throw DomainError("unknown residual form '" + std::string(name) + "'");
}

namespace {

template <typename Visit>
void for_constrained(const TransferTensor& t, Visit&& visit) {
  const int dr = t.receiver_dim();
  const int ds = t.sender_dim();
  for (int a = 0; a < dr; ++a) {
    for (int b = 0; b < dr; ++b) {
      if (a != 0 && b != 0) continue;
      for (int n = 0; n < ds; ++n) {
        for (int m = 0; m < ds; ++m) {
          if (n != m && (n == 0 || m == 0)) continue;
          visit(t(a, b, n, m));
        }
      }
    }
  }
}

}  // namespace

double residual_S_T(const TransferTensor& tensor, ResidualForm form) {
  double acc = 0.0;
  for_constrained(tensor, [&](Complex v) {
    acc = form == ResidualForm::sum ? acc + std::abs(v) : std::max(acc, std::abs(v));
  });
  return acc;
}

RealVector constrained_entries(const TransferTensor& tensor) {
  std::vector<double> v;
  for_constrained(tensor, [&](Complex c) {
    v.push_back(c.real());
    v.push_back(c.imag());
  });
  return Eigen::Map<RealVector>(v.data(), static_cast<Index>(v.size()));
}

void ObjectiveSpec::validate() const {
  if (!(w1 > 0.0 && w2 > 0.0)) throw DomainError("objective weights must be positive");
  if (!(angle_bound > 0.0)) throw DomainError("objective angle bound must be positive");
}

RestrictedObjective::RestrictedObjective(std::shared_ptr<const SpectralCache> cache, int n_sender, int n_extended,
                                         int max_excitation, double t, ObjectiveSpec spec)
    : cache_(std::move(cache)), n_sender_(n_sender), n_extended_(n_extended), k_(max_excitation), t_(t), spec_(spec) {
  spec_.validate();
  if (k_ < 1 || k_ > n_sender) throw DomainError("restricted objective: K outside [1, N_S]");
  if (n_extended < n_sender) throw DomainError("restricted objective: N_ER must be at least N_S");
  const int n = cache_->chain().n_sites;
  pipeline_.emplace(cache_, TransferLayout{n, n_sender, n_sender, n_extended}, k_);
  kernel_ = pipeline_->one_excitation_kernel(t);
}

int RestrictedObjective::dimension() const { return effective_parameter_count(n_extended_, k_); }

ReceiverUnitaryParams RestrictedObjective::params(const RealVector& flat) const {
  return ReceiverUnitaryParams::from_flat(n_extended_, k_, std::span<const double>(flat.data(), flat.size()));
}

TransferTensor RestrictedObjective::tensor(const RealVector& flat) const {
  if (k_ == 1) return transfer_tensor_from_map({kernel_.map(params(flat)), t_});
  return transfer_tensor(*pipeline_, k_, t_, params(flat));
}

StateMap RestrictedObjective::state_map(const RealVector& flat) const {
  if (k_ == 1) return one_excitation_state_map(kernel_.map(params(flat)));
  return make_state_map(pipeline_->at(t_, params(flat)));
}

double RestrictedObjective::s_t(const RealVector& flat) const {
  if (k_ == 1) return one_excitation_s_t(kernel_.map(params(flat)), spec_.residual_form);
  return residual_S_T(tensor(flat), spec_.residual_form);
}

double RestrictedObjective::delta(const RealVector& flat) const {
  if (k_ == 1) return one_excitation_delta(kernel_.map(params(flat)));
  try {
    const ZeroCoherenceState s = restricted_fixed_point(state_map(flat), n_sender_, k_);
    return deviation(s, AsymptoticPTZ::swapped_concentrated(n_sender_, k_, {k_, 0}));
  } catch (const DegenerateTimeError&) {
    return std::numeric_limits<double>::infinity();
  }
}

double RestrictedObjective::f_t(const RealVector& flat) const {
  if (k_ == 1) {
    const Matrix w = kernel_.map(params(flat));
    const double d = one_excitation_delta(w);
    if (!std::isfinite(d)) return 1e6;
    return spec_.w1 * one_excitation_s_t(w, spec_.residual_form) - spec_.w2 * d;
  }
  const double d = delta(flat);
  if (!std::isfinite(d)) return 1e6;
  return spec_.w1 * s_t(flat) - spec_.w2 * d;
}

RealVector RestrictedObjective::constraint_residual(const RealVector& flat) const {
  if (k_ == 1) {
    const Matrix w = kernel_.map(params(flat));
    RealVector v(2 * w.cols());
    for (Index j = 0; j < w.cols(); ++j) {
      v[2 * j] = w(0, j).real();
      v[2 * j + 1] = w(0, j).imag();
    }
    return v;
  }
  return constrained_entries(tensor(flat));
}

RestrictedRun run_ptz_restricted(const RestrictedObjective& objective, const DEConfig& de, const NelderMeadConfig& polish,
                                 const RootRefineConfig& refine) {
  const int dim = objective.dimension();
  const Bounds bounds = Bounds::uniform(dim, -objective.spec().angle_bound, objective.spec().angle_bound);
  const Objective f = [&](const RealVector& x) { return objective.f_t(x); };

  RestrictedRun run;
  run.global = differential_evolution(f, bounds, de);
  run.s_t_global = objective.s_t(run.global.x);
  run.polished = local_polish(f, run.global.x, polish);
  run.s_t_polished = objective.s_t(run.polished.x);
  const ResidualFunction constraints = [&](const RealVector& x) { return objective.constraint_residual(x); };
  RealVector seed = run.polished.x;
  // F_T has local minima that trade S_T against delta; descend on S_T alone
  // to reach the refinement basin from those.
  if (constraints(seed).lpNorm<Eigen::Infinity>() >= refine.basin) {
    seed = local_polish([&](const RealVector& x) { return objective.s_t(x); }, seed, polish).x;
    run.constraint_polished = true;
  }
  run.refined = exact_root_refine(constraints, seed, refine);
  run.s_t_refined = objective.s_t(run.refined.x);
  run.solution = solve_ptz_restricted(objective.state_map(run.refined.x), objective.n_sender(),
                                      objective.max_excitation(), objective.t(), run.s_t_refined);
  run.solution.phi = objective.params(run.refined.x);
  return run;
}

// ---------------------------------------------------------------------------

double arbitrary_objective(const OneExcitationKernel& kernel, int n_extended, const RealVector& flat) {
  const Matrix w = kernel.map(ReceiverUnitaryParams::from_flat(n_extended, 1, std::span<const double>(flat.data(), flat.size())));
  double min_diag = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < std::min(w.rows(), w.cols()); ++i) min_diag = std::min(min_diag, std::abs(w(i, i)));
  return offdiagonal_residual(w) - min_diag * min_diag;
}

ArbitraryScanPoint optimize_arbitrary_point(const OneExcitationKernel& kernel, int n_extended, const ArbitraryConfig& config) {
  const int dim = effective_parameter_count(n_extended, 1);
  const Bounds bounds = Bounds::uniform(dim, -std::numbers::pi, std::numbers::pi);
  const Objective f = [&](const RealVector& x) { return arbitrary_objective(kernel, n_extended, x); };
  auto map_of = [&](const RealVector& x) {
    return kernel.map(ReceiverUnitaryParams::from_flat(n_extended, 1, std::span<const double>(x.data(), x.size())));
  };

  const auto attempt = [&](std::uint64_t seed) {
    DEConfig de = config.de;
    de.seed = seed;
    const OptimizationResult global = differential_evolution(f, bounds, de);
    const OptimizationResult polished = local_polish(f, global.x, config.polish);
    ArbitraryScanPoint p;
    p.t = kernel.t;
    p.angles = polished.x;
    try {
      const RootRefineResult r = exact_root_refine([&](const RealVector& x) { return offdiag_parts(map_of(x)); },
                                                   polished.x, config.refine);
      p.angles = r.x;
      p.refined = r.converged;
    } catch (const PreconditionViolation&) {
    } catch (const NoConvergenceError&) {
    }
    const Matrix w = map_of(p.angles);
    const ScaleFactors sf = scale_factors({w, kernel.t});
    p.lambda_opt = sf.lambda_opt;
    p.lambda_opt_offdiag = sf.lambda_opt_offdiag;
    p.offdiag_residual = offdiagonal_residual(w);
    return p;
  };

  // Feasible beats infeasible; then larger lambda_opt, or smaller F among
  // infeasible points.
  const auto better = [&](const ArbitraryScanPoint& a, const ArbitraryScanPoint& b) {
    const bool fa = a.offdiag_residual <= config.feasible_residual;
    const bool fb = b.offdiag_residual <= config.feasible_residual;
    if (fa != fb) return fa;
    if (fa) return a.lambda_opt > b.lambda_opt;
    return a.offdiag_residual - a.lambda_opt < b.offdiag_residual - b.lambda_opt;
  };
  constexpr std::uint64_t kSeedStride = 1000003u;
  ArbitraryScanPoint best = attempt(config.de.seed);
  std::uint64_t next = 1;
  for (; next < static_cast<std::uint64_t>(std::max(config.runs, 1)); ++next) {
    ArbitraryScanPoint p = attempt(config.de.seed + next * kSeedStride);
    if (better(p, best)) best = std::move(p);
  }
  // DE sometimes stalls in a minimum with a large off-diagonal residual;
  // reseed a few times before accepting that.
  for (int a = 1; a < config.attempts && best.offdiag_residual > config.feasible_residual; ++a, ++next) {
    ArbitraryScanPoint p = attempt(config.de.seed + next * kSeedStride);
    if (better(p, best)) best = std::move(p);
  }
  return best;
}

std::vector<ArbitraryScanPoint> scan_arbitrary_parameter(const TransferPipeline& pipeline, const std::vector<double>& times,
                                                         const ArbitraryConfig& config) {
  const int n_er = pipeline.layout().n_extended;
  std::vector<ArbitraryScanPoint> scan(times.size());
  parallel_indices(static_cast<int>(times.size()), config.threads, [&](int i) {
    ArbitraryConfig local = config;
    local.de.threads = 1;
    local.de.seed = config.de.seed + static_cast<std::uint64_t>(i);
    scan[i] = optimize_arbitrary_point(pipeline.one_excitation_kernel(times[i]), n_er, local);
  });
  return scan;
}

ArbitraryResult select_arbitrary_optimum(const TransferPipeline& pipeline, std::vector<ArbitraryScanPoint> scan,
                                         const ArbitraryConfig& config) {
  const TransferLayout& layout = pipeline.layout();
  ArbitraryResult out;
  const SizeBoundCheck bound = check_size_bounds(layout.n_sender, layout.n_extended, TransferProtocol::arbitrary_parameter);
  out.size_bound_satisfied = bound.satisfied;
  out.size_bound_note = bound.explanation;
  out.scan = std::move(scan);

  double floor = std::numeric_limits<double>::infinity();
  int best = -1;
  for (std::size_t i = 0; i < out.scan.size(); ++i) {
    const auto& p = out.scan[i];
    floor = std::min(floor, p.offdiag_residual);
    if (p.offdiag_residual <= config.feasible_residual && (best < 0 || p.lambda_opt > out.scan[best].lambda_opt)) {
      best = static_cast<int>(i);
    }
  }
  if (best < 0) {
    const std::string why = floor > config.infeasible_floor ? "; N_ER is likely too small (" + bound.explanation + ")" : "";
    throw InfeasibleConfigurationError("arbitrary-parameter transfer: off-diagonal residual floor " + format_real(floor) +
                                       " never reached " + format_real(config.feasible_residual) + why);
  }
  const ArbitraryScanPoint& p = out.scan[best];
  out.t_opt = p.t;
  out.phi_opt = ReceiverUnitaryParams::from_flat(layout.n_extended, 1, std::span<const double>(p.angles.data(), p.angles.size()));
  out.map = pipeline.one_excitation_map(p.t, out.phi_opt);
  out.scales = scale_factors(out.map);
  return out;
}

ArbitraryResult solve_arbitrary_parameter(std::shared_ptr<const SpectralCache> cache, int n_sender, int n_extended,
                                          const ArbitraryConfig& config) {
  const int n = cache->chain().n_sites;
  const TransferPipeline pipeline(cache, {n, n_sender, n_sender, n_extended}, 1);
  return select_arbitrary_optimum(pipeline, scan_arbitrary_parameter(pipeline, config.window.grid(), config), config);
}

double structural_restoring_error(const OneExcitationMap& map, const std::vector<ZeroCoherenceState>& senders) {
  const ScaleFactors sf = scale_factors(map);
  const Matrix& w = map.matrix;
  double worst = 0.0;
  for (const auto& s : senders) {
    if (s.max_excitation() < 1) throw DomainError("structural_restoring_error: sender lacks a one-excitation block");
    const Matrix& s1 = s.block(1);
    const Matrix r1 = w * s1 * w.adjoint();
    worst = std::max(worst, (r1 - sf.lambda.cwiseProduct(s1)).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace ptz
