// End-to-end acceptance checks. One PASS/FAIL line per criterion; exit status
// is nonzero when any criterion fails.

#include "ptz/oracle.hpp"
#include "ptz/ptz_solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

using namespace ptz;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::shared_ptr<const SpectralCache> chain(int n, int max_k, CouplingMode mode = CouplingMode::full_dipolar) {
  return std::make_shared<const SpectralCache>(ChainSpec{n, mode}, max_k);
}

double frobenius_time(const SpectralCache& cache, int n_sender) {
  return find_registration_time(cache, RegistrationCriterion::max_frobenius_w, n_sender,
                                TimeWindow::around_length(cache.chain().n_sites))
      .t_star;
}

double excitation_time(const SpectralCache& cache) {
  return find_registration_time(cache, RegistrationCriterion::max_excitation_probability, 2,
                                TimeWindow::around_length(cache.chain().n_sites))
      .t_star;
}

// ---------------------------------------------------------------------------

Outcome coupling_calibration() {
  const Stopwatch clock;
  const std::vector<int> ns = {10, 25, 50, 100};
  const std::vector<double> published = {12.8896, 28.5937, 54.1709, 104.724};
  std::ostringstream out;
  CouplingMode best = CouplingMode::full_dipolar;
  double best_worst = std::numeric_limits<double>::infinity();
  for (CouplingMode mode : {CouplingMode::nearest_neighbor, CouplingMode::full_dipolar}) {
    double worst = 0.0;
    out << to_string(mode) << ":";
    for (std::size_t i = 0; i < ns.size(); ++i) {
      const double t = excitation_time(*chain(ns[i], 2, mode));
      worst = std::max(worst, std::abs(t - published[i]));
      out << " " << fmt("%+.4f", t - published[i]);
    }
    out << "; ";
    if (worst < best_worst) {
      best_worst = worst;
      best = mode;
    }
  }
  const double elapsed = clock.seconds();
  out << "best " << to_string(best) << ", max |dev| " << fmt("%.2e", best_worst) << ", " << fmt("%.1f", elapsed) << " s";
  const bool is_default = best == ChainSpec{10}.coupling_mode;
  if (!is_default) out << " (not the default mode)";
  return {best_worst <= 5e-3 && elapsed < 300.0 && is_default, out.str()};
}

Outcome frobenius_times() {
  const std::vector<int> ns = {10, 60, 100};
  const std::vector<std::vector<double>> published = {{12.1286, 64.1135, 104.245}, {12.0631, 63.1042, 102.5179}};
  double worst = 0.0;
  std::ostringstream out;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const auto cache = chain(ns[i], 1);
    for (int s = 0; s < 2; ++s) {
      const double t = frobenius_time(*cache, 3 + s);
      worst = std::max(worst, std::abs(t - published[s][i]));
      out << "N=" << ns[i] << ",N_S=" << 3 + s << ":" << fmt("%.4f", t) << " ";
    }
  }
  out << "max |dev| " << fmt("%.2e", worst);
  return {worst <= 5e-3, out.str()};
}

Outcome oracle_equivalence() {
  const Stopwatch clock;
  OracleBatteryConfig cfg;
  cfg.configurations = 100;
  cfg.max_sites = 8;
  cfg.seed = 2024;
  const OracleReport rep = run_oracle_battery(cfg);
  const double elapsed = clock.seconds();
  std::ostringstream out;
  out << rep.cases.size() << " configurations, max |delta| " << fmt("%.2e", rep.max_deviation) << ", "
      << fmt("%.1f", elapsed) << " s";
  if (!rep.passed()) out << "; " << rep.first_failure;
  return {rep.passed() && rep.cases.size() >= 100 && rep.max_deviation < 1e-10 && elapsed < 600.0, out.str()};
}

Outcome complete_round_trip() {
  bool ok = true;
  std::ostringstream out;
  for (int n : {10, 20, 40}) {
    const auto cache = chain(n, 2);
    const PTZSolution sol = solve_ptz_complete(cache, 2, excitation_time(*cache));
    ok = ok && sol.round_trip_error < 1e-8 && sol.min_eigenvalue >= -1e-10;
    out << "N=" << n << " rt=" << fmt("%.1e", sol.round_trip_error) << " min_eig=" << fmt("%.3g", sol.min_eigenvalue)
        << " ";
  }
  return {ok, out.str()};
}

Outcome restricted_round_trip() {
  bool ok = true;
  std::ostringstream out;
  const auto cache = chain(20, 1);
  const double t = frobenius_time(*cache, 3);
  for (int n_er : {4, 5}) {
    const RestrictedObjective obj(cache, 3, n_er, 1, t);
    DEConfig de = DEConfig::for_sender(3);
    de.seed = 11;
    const RestrictedRun run = run_ptz_restricted(obj, de);
    const double s0 = run.solution.sender_state.block(0).cwiseAbs().maxCoeff();
    ok = ok && run.s_t_refined < 1e-10 && run.solution.round_trip_error < 1e-6 && s0 == 0.0;
    out << "N_ER=" << n_er << " S_T=" << fmt("%.1e", run.s_t_refined) << " rt=" << fmt("%.1e", run.solution.round_trip_error)
        << " |s0|=" << fmt("%.1g", s0) << " delta=" << fmt("%.4f", run.solution.delta) << " ";
  }
  return {ok, out.str()};
}

Outcome complete_delta_trend() {
  std::vector<double> delta;
  std::ostringstream out;
  for (int n = 10; n <= 60; n += 10) {
    const auto cache = chain(n, 2);
    delta.push_back(solve_ptz_complete(cache, 2, excitation_time(*cache)).delta);
    out << fmt("%.4f", delta.back()) << " ";
  }
  bool ok = delta.back() < delta.front();
  for (std::size_t i = 1; i < delta.size(); ++i) ok = ok && delta[i] <= 1.05 * delta[i - 1];
  return {ok, "delta(10..60) = " + out.str()};
}

Outcome restricted_delta_trend() {
  const auto cache = chain(20, 1);
  const double t = frobenius_time(*cache, 3);
  std::vector<double> medians;
  std::ostringstream out;
  for (int n_a = 1; n_a <= 3; ++n_a) {
    std::vector<double> d;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const RestrictedObjective obj(cache, 3, 3 + n_a, 1, t);
      DEConfig de = DEConfig::for_sender(3);
      de.seed = seed;
      de.max_generations = 3000;
      d.push_back(run_ptz_restricted(obj, de).solution.delta);
    }
    medians.push_back(median(d));
    out << "N_A=" << n_a << ":" << fmt("%.4f", medians.back()) << " ";
  }
  const bool ok = std::is_sorted(medians.begin(), medians.end());
  return {ok, "median delta " + out.str()};
}

Outcome arbitrary_parameter() {
  const auto cache = chain(10, 1);
  ArbitraryConfig cfg;
  cfg.window = TimeWindow::around_length(10, 0.05);
  cfg.de = DEConfig::for_sender(2);
  cfg.de.seed = 7;
  const ArbitraryResult res = solve_arbitrary_parameter(cache, 2, 3, cfg);
  std::vector<ZeroCoherenceState> senders;
  for (int i = 0; i < 20; ++i) senders.push_back(random_zero_coherence_state(2, 1, 100 + i));
  const double offdiag = offdiagonal_residual(res.map.matrix);
  const double restore = structural_restoring_error(res.map, senders);
  const double max_lambda = res.scales.lambda.cwiseAbs().maxCoeff();
  std::ostringstream out;
  out << "t_opt=" << fmt("%.2f", res.t_opt) << " lambda_opt=" << fmt("%.5f", res.scales.lambda_opt)
      << " offdiag=" << fmt("%.1e", offdiag) << " restore=" << fmt("%.1e", restore) << " max|lambda|=" << fmt("%.4f", max_lambda);
  return {offdiag < 1e-8 && restore < 1e-8 && max_lambda <= 1.0 + 1e-12, out.str()};
}

double offdiagonal_floor(const TransferPipeline& pipe, int n_er, double t) {
  const OneExcitationKernel kernel = pipe.one_excitation_kernel(t);
  const int dim = effective_parameter_count(n_er, 1);
  const Objective f = [&](const RealVector& x) {
    return offdiagonal_residual(kernel.map(ReceiverUnitaryParams::from_flat(n_er, 1, std::span<const double>(x.data(), x.size()))));
  };
  double floor = std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    DEConfig de = DEConfig::stress_profile(2);
    de.seed = seed;
    de.max_generations = 300;
    const OptimizationResult r = differential_evolution(f, Bounds::uniform(dim, -std::numbers::pi, std::numbers::pi), de);
    floor = std::min(floor, local_polish(f, r.x).value);
  }
  return floor;
}

Outcome size_bounds() {
  const auto cache = chain(10, 1);
  const double t = frobenius_time(*cache, 2);
  const double two = offdiagonal_floor(TransferPipeline(cache, {10, 2, 2, 2}, 1), 2, t);
  const double three = offdiagonal_floor(TransferPipeline(cache, {10, 2, 2, 3}, 1), 3, t);
  std::ostringstream out;
  out << "t=" << fmt("%.4f", t) << " floor N_ER=2: " << fmt("%.3e", two) << ", N_ER=3: " << fmt("%.1e", three);
  return {two > 1e-3 && three < 1e-8, out.str()};
}

Outcome optimizer_cross_validation() {
  const Stopwatch clock;
  const auto cache = chain(20, 1);
  const RestrictedObjective obj(cache, 3, 4, 1, frobenius_time(*cache, 3));
  const Objective f = [&](const RealVector& x) { return obj.f_t(x); };
  const Bounds bounds = Bounds::uniform(obj.dimension(), -std::numbers::pi, std::numbers::pi);
  NelderMeadConfig nm;
  nm.restarts = 200;
  const int candidates = 8;
  DEConfig de = DEConfig::for_sender(3);
  de.seed = 1;
  de.max_generations = 3000;
  RandomSearchConfig rs;
  rs.seed = 1;
  rs.polished = candidates;
  rs.polish = nm;
  AnnealingConfig sa;
  sa.seed = 1;
  sa.restarts = candidates - 1;
  sa.polish = nm;
  const CrossValidationReport rep = cross_validate_global(f, bounds, de, rs, sa, nm, candidates);
  std::ostringstream out;
  out << "DE " << fmt("%.6f", rep.differential_evolution.value) << ", random " << fmt("%.6f", rep.random_search.value)
      << ", annealing " << fmt("%.6f", rep.annealing.value) << ", gap " << fmt("%.1e", rep.max_disagreement) << ", "
      << fmt("%.1f", clock.seconds()) << " s";
  return {rep.max_disagreement < 1e-3, out.str()};
}

Outcome de_benchmarks() {
  const Objective sphere = [](const RealVector& x) { return x.squaredNorm(); };
  const Objective rastrigin = [](const RealVector& x) {
    double v = 10.0 * static_cast<double>(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) v += x(i) * x(i) - 10.0 * std::cos(2.0 * std::numbers::pi * x(i));
    return v;
  };
  DEConfig cfg;
  cfg.max_generations = 200;
  cfg.seed = 1;
  const double s = differential_evolution(sphere, Bounds::uniform(6, -5.0, 5.0), cfg).value;
  int hits = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    DEConfig stress = DEConfig::stress_profile(1);
    stress.seed = seed;
    const double v = differential_evolution(rastrigin, Bounds::uniform(4, -5.12, 5.12), stress).value;
    hits += v < 1e-3;
    worst = std::max(worst, v);
  }
  std::ostringstream out;
  out << "sphere " << fmt("%.1e", s) << ", rastrigin " << hits << "/5 below 1e-3 (worst " << fmt("%.1e", worst) << ")";
  return {s < 1e-8 && hits >= 4, out.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"coupling calibration and excitation-probability times", coupling_calibration},
      {"Frobenius registration times", frobenius_times},
      {"block pipeline vs full-space oracle", oracle_equivalence},
      {"complete-space round trip", complete_round_trip},
      {"restricted-space round trip", restricted_round_trip},
      {"complete-space deviation trend", complete_delta_trend},
      {"restricted-space deviation trend", restricted_delta_trend},
      {"arbitrary-parameter transfer", arbitrary_parameter},
      {"extended-receiver size bounds", size_bounds},
      {"optimizer cross-validation", optimizer_cross_validation},
      {"DE self-benchmarks", de_benchmarks},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const Stopwatch clock;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(),
                clock.seconds());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
