#include "ptz/optimizers.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <thread>

namespace ptz {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Calls body(i) for i in [0, n) over up to `threads` workers.
template <typename Body>
void parallel_for(int n, int threads, Body&& body) {
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

double finite_or_max(double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::max(); }

struct Stats {
  double mean = 0.0;
  double spread = 0.0;
};

Stats stats(const std::vector<double>& v) {
  Stats s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  for (double x : v) s.spread += (x - s.mean) * (x - s.mean);
  s.spread = std::sqrt(s.spread / static_cast<double>(v.size()));
  return s;
}

}  // namespace

Bounds Bounds::uniform(int dim, double lo, double hi) {
  return {RealVector::Constant(dim, lo), RealVector::Constant(dim, hi)};
}

void Bounds::validate() const {
  if (lower.size() == 0) throw DomainError("optimizer: dimension must be positive");
  if (lower.size() != upper.size()) throw DomainError("optimizer: bound vectors differ in length");
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!(lower[i] < upper[i])) throw DomainError("optimizer: empty bound interval at coordinate " + std::to_string(i));
  }
}

std::uint64_t CounterRng::bits(std::uint64_t stream, std::uint64_t index, std::uint64_t draw) const {
  std::uint64_t h = splitmix64(seed_);
  h = splitmix64(h ^ stream);
  h = splitmix64(h ^ index);
  return splitmix64(h ^ draw);
}

double CounterRng::uniform(std::uint64_t stream, std::uint64_t index, std::uint64_t draw) const {
  return static_cast<double>(bits(stream, index, draw) >> 11) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t stream, std::uint64_t index, std::uint64_t draw) const {
  const double u1 = 1.0 - uniform(stream, index, 2 * draw);
  const double u2 = uniform(stream, index, 2 * draw + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

DEConfig DEConfig::for_sender(int n_sender) {
  DEConfig c;
  c.population_size = 15 * n_sender;
  return c;
}

DEConfig DEConfig::stress_profile(int n_sender) {
  DEConfig c;
  c.population_size = 1000 * n_sender;
  c.mutation_lo = c.mutation_hi = 1.9;
  c.crossover_probability = 0.3;
  return c;
}

void DEConfig::validate() const {
  if (population_size < 4) throw DomainError("DE: population must hold at least 4 individuals");
  if (!(crossover_probability > 0.0 && crossover_probability <= 1.0)) throw DomainError("DE: CR must lie in (0, 1]");
  if (!(mutation_lo > 0.0 && mutation_lo <= mutation_hi && mutation_hi <= 2.0)) {
    throw DomainError("DE: mutation range must lie in (0, 2]");
  }
  if (max_generations < 1) throw DomainError("DE: max_generations must be positive");
  if (threads < 1) throw DomainError("DE: threads must be positive");
}

OptimizationResult differential_evolution(const Objective& f, const Bounds& bounds, const DEConfig& config) {
  bounds.validate();
  config.validate();
  const int dim = bounds.dim();
  const int np = config.population_size;
  const CounterRng rng(config.seed);
  const RealVector width = bounds.upper - bounds.lower;

  // Streams: 0 init, then per generation g: 2g+1 mutation/crossover, 2g+2 resampling.
  std::vector<RealVector> pop(np);
  std::vector<double> value(np);
  for (int i = 0; i < np; ++i) {
    pop[i].resize(dim);
    for (int d = 0; d < dim; ++d) pop[i][d] = bounds.lower[d] + width[d] * rng.uniform(0, i, d);
  }
  parallel_for(np, config.threads, [&](int i) { value[i] = finite_or_max(f(pop[i])); });

  OptimizationResult out;
  out.evaluations = np;
  auto record = [&](int g) {
    const Stats s = stats(value);
    out.history.push_back({g, *std::min_element(value.begin(), value.end()), s.mean, s.spread});
    return s;
  };
  Stats s = record(0);

  std::vector<RealVector> trial(np, RealVector(dim));
  std::vector<double> trial_value(np);
  for (int g = 1; g <= config.max_generations; ++g) {
    if (s.spread <= config.spread_atol + config.spread_rtol * std::abs(s.mean)) {
      out.converged = true;
      break;
    }
    const auto stream = static_cast<std::uint64_t>(2 * g + 1);
    const double F = config.mutation_lo + (config.mutation_hi - config.mutation_lo) * rng.uniform(stream, np, 0);
    for (int i = 0; i < np; ++i) {
      std::uint64_t draw = 0;
      auto pick = [&] { return static_cast<int>(rng.bits(stream, i, draw++) % static_cast<std::uint64_t>(np)); };
      int a, b, c;
      do a = pick(); while (a == i);
      do b = pick(); while (b == i || b == a);
      do c = pick(); while (c == i || c == a || c == b);
      const int forced = static_cast<int>(rng.bits(stream, i, draw++) % static_cast<std::uint64_t>(dim));
      RealVector& x = trial[i];
      for (int d = 0; d < dim; ++d) {
        const bool cross = d == forced || rng.uniform(stream, i, 1000 + d) < config.crossover_probability;
        if (!cross) {
          x[d] = pop[i][d];
          continue;
        }
        x[d] = pop[a][d] + F * (pop[b][d] - pop[c][d]);
        if (x[d] < bounds.lower[d] || x[d] > bounds.upper[d]) {
          x[d] = bounds.lower[d] + width[d] * rng.uniform(stream + 1, i, d);
        }
      }
    }
    parallel_for(np, config.threads, [&](int i) { trial_value[i] = finite_or_max(f(trial[i])); });
    out.evaluations += np;
    for (int i = 0; i < np; ++i) {
      if (trial_value[i] <= value[i]) {
        pop[i] = trial[i];
        value[i] = trial_value[i];
      }
    }
    s = record(g);
  }
  std::vector<int> order(np);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return value[a] < value[b]; });
  out.x = pop[order[0]];
  out.value = value[order[0]];
  for (int i : order) out.population.push_back(pop[i]);
  return out;
}

OptimizationResult local_polish(const Objective& f, const RealVector& seed, const NelderMeadConfig& config) {
  const auto n = static_cast<int>(seed.size());
  if (n == 0) throw DomainError("local_polish: empty seed");
  const long budget = config.max_evaluations > 0 ? config.max_evaluations : 400L * n;

  OptimizationResult out;
  out.x = seed;
  out.value = finite_or_max(f(seed));
  out.evaluations = 1;

  auto eval = [&](const RealVector& x) {
    ++out.evaluations;
    return finite_or_max(f(x));
  };
  const double expand = config.adaptive ? 1.0 + 2.0 / n : 2.0;
  const double contract = config.adaptive ? 0.75 - 0.5 / n : 0.5;
  const double shrink = config.adaptive ? 1.0 - 1.0 / n : 0.5;

  for (int round = 0; round <= config.restarts; ++round) {
    std::vector<RealVector> simplex(n + 1, out.x);
    std::vector<double> fv(n + 1, out.value);
    for (int i = 0; i < n; ++i) {
      const double step = out.x[i] != 0.0 ? config.initial_step * std::abs(out.x[i]) : 0.00025;
      simplex[i + 1][i] += round == 0 ? step : std::min(step, 1e-3);
      fv[i + 1] = eval(simplex[i + 1]);
    }
    const double start = out.value;
    std::vector<int> order(n + 1);
    long used = 0;
    while (used < budget) {
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](int a, int b) { return fv[a] < fv[b]; });
      const int best = order[0];
      const int worst = order[n];
      const int second = order[n - 1];
      double xspread = 0.0;
      for (int i = 1; i <= n; ++i) xspread = std::max(xspread, (simplex[order[i]] - simplex[best]).cwiseAbs().maxCoeff());
      if (xspread <= config.xatol && fv[worst] - fv[best] <= config.fatol) break;

      RealVector centroid = RealVector::Zero(n);
      for (int i = 0; i < n; ++i) centroid += simplex[order[i]];
      centroid /= n;
      const RealVector xr = centroid + (centroid - simplex[worst]);
      const double fr = eval(xr);
      ++used;
      if (fr < fv[best]) {
        const RealVector xe = centroid + expand * (centroid - simplex[worst]);
        const double fe = eval(xe);
        ++used;
        if (fe < fr) {
          simplex[worst] = xe;
          fv[worst] = fe;
        } else {
          simplex[worst] = xr;
          fv[worst] = fr;
        }
      } else if (fr < fv[second]) {
        simplex[worst] = xr;
        fv[worst] = fr;
      } else {
        const bool outside = fr < fv[worst];
        const RealVector xc = outside ? RealVector(centroid + contract * (xr - centroid))
                                      : RealVector(centroid + contract * (simplex[worst] - centroid));
        const double fc = eval(xc);
        ++used;
        if (fc < (outside ? fr : fv[worst])) {
          simplex[worst] = xc;
          fv[worst] = fc;
        } else {
          for (int i = 1; i <= n; ++i) {
            const int idx = order[i];
            simplex[idx] = simplex[best] + shrink * (simplex[idx] - simplex[best]);
            fv[idx] = eval(simplex[idx]);
            ++used;
          }
        }
      }
    }
    const auto best = std::min_element(fv.begin(), fv.end()) - fv.begin();
    if (fv[best] < out.value) {
      out.x = simplex[best];
      out.value = fv[best];
    }
    if (!(out.value < start)) {
      out.converged = true;
      break;
    }
  }
  return out;
}

RootRefineResult exact_root_refine(const ResidualFunction& r, const RealVector& seed, const RootRefineConfig& config) {
  if (seed.size() == 0) throw DomainError("exact_root_refine: empty seed");
  RootRefineResult out;
  out.x = seed;
  RealVector res = r(seed);
  out.residual_inf = res.size() ? res.cwiseAbs().maxCoeff() : 0.0;
  if (out.residual_inf < config.tolerance) {
    out.converged = true;
    return out;
  }
  if (!(out.residual_inf < config.basin)) {
    throw PreconditionViolation("exact_root_refine: seed residual " + format_real(out.residual_inf) +
                                " outside the convergence basin");
  }

  const auto n = seed.size();
  const auto m = res.size();
  double norm = res.norm();
  double mu = 0.0;
  int stalls = 0;
  RealMatrix jac(m, n);
  bool need_jacobian = true;
  Eigen::JacobiSVD<RealMatrix> svd;
  for (int it = 1; it <= config.max_iterations; ++it) {
    out.iterations = it;
    if (need_jacobian) {
      for (Eigen::Index j = 0; j < n; ++j) {
        RealVector xp = out.x, xm = out.x;
        xp[j] += config.fd_step;
        xm[j] -= config.fd_step;
        jac.col(j) = (r(xp) - r(xm)) / (2.0 * config.fd_step);
      }
      svd.compute(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
      if (mu == 0.0) {
        const double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
        mu = 1e-14 * smax * smax;
      }
      need_jacobian = false;
    }
    const RealVector& sv = svd.singularValues();
    const RealVector proj = svd.matrixU().transpose() * res;
    RealVector coeff(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i) coeff[i] = sv[i] > 0.0 ? sv[i] / (sv[i] * sv[i] + mu) * proj[i] : 0.0;
    const RealVector step = -(svd.matrixV() * coeff);
    const RealVector x_new = out.x + step;
    const RealVector res_new = r(x_new);
    const double norm_new = res_new.norm();
    if (std::isfinite(norm_new) && norm_new < norm) {
      out.x = x_new;
      res = res_new;
      norm = norm_new;
      out.residual_inf = res.cwiseAbs().maxCoeff();
      mu *= 0.1;
      stalls = 0;
      need_jacobian = true;
      if (out.residual_inf < config.tolerance) {
        out.converged = true;
        return out;
      }
    } else {
      mu = std::max(mu * 10.0, 1e-300);
      if (++stalls >= config.max_stalls) {
        throw NoConvergenceError("exact_root_refine: " + std::to_string(stalls) + " consecutive steps failed to reduce the residual",
                                 out.x, out.residual_inf);
      }
    }
  }
  return out;
}

OptimizationResult random_search(const Objective& f, const Bounds& bounds, const RandomSearchConfig& config) {
  bounds.validate();
  if (config.samples < 1 || config.polished < 1) throw DomainError("random_search: sample counts must be positive");
  const int dim = bounds.dim();
  const CounterRng rng(config.seed);
  std::vector<RealVector> pts(config.samples, RealVector(dim));
  std::vector<double> val(config.samples);
  parallel_for(config.samples, config.threads, [&](int i) {
    for (int d = 0; d < dim; ++d) pts[i][d] = bounds.lower[d] + (bounds.upper[d] - bounds.lower[d]) * rng.uniform(0, i, d);
    val[i] = finite_or_max(f(pts[i]));
  });
  std::vector<int> order(config.samples);
  std::iota(order.begin(), order.end(), 0);
  const int keep = std::min(config.polished, config.samples);
  std::partial_sort(order.begin(), order.begin() + keep, order.end(), [&](int a, int b) { return val[a] < val[b]; });

  std::vector<OptimizationResult> polished(keep);
  parallel_for(keep, config.threads, [&](int i) { polished[i] = local_polish(f, pts[order[i]], config.polish); });
  OptimizationResult out = polished[0];
  long evals = config.samples;
  for (const auto& p : polished) {
    evals += p.evaluations;
    if (p.value < out.value) out = p;
  }
  out.evaluations = evals;
  out.history.clear();
  return out;
}

namespace {

// Tsallis visiting step, following the generalized simulated annealing recipe.
double visiting_step(double q, double temperature, const CounterRng& rng, std::uint64_t stream, std::uint64_t idx,
                     std::uint64_t draw) {
  const double pi = std::numbers::pi;
  const double f1 = std::exp(std::log(temperature) / (q - 1.0));
  const double f2 = std::exp((4.0 - q) * std::log(q - 1.0));
  const double f3 = std::exp((2.0 - q) * std::log(2.0) / (q - 1.0));
  const double f4 = std::sqrt(pi) * f1 * f2 / (f3 * (3.0 - q));
  const double f5 = 1.0 / (q - 1.0) - 0.5;
  const double d1 = 2.0 - f5;
  const double f6 = pi * (1.0 - f5) / std::sin(pi * (1.0 - f5)) / std::exp(std::lgamma(d1));
  const double sigma = std::exp(-(q - 1.0) * std::log(f6 / f4) / (3.0 - q));
  const double x = sigma * rng.normal(stream, idx, 2 * draw);
  const double y = rng.normal(stream, idx, 2 * draw + 1);
  const double den = std::exp((q - 1.0) * std::log(std::abs(y)) / (3.0 - q));
  return x / den;
}

}  // namespace

OptimizationResult generalized_annealing(const Objective& f, const Bounds& bounds, const AnnealingConfig& config) {
  bounds.validate();
  if (!(config.visiting_q > 1.0 && config.visiting_q < 3.0)) throw DomainError("annealing: visiting q must lie in (1, 3)");
  const int dim = bounds.dim();
  const CounterRng rng(config.seed);
  const RealVector width = bounds.upper - bounds.lower;
  const double qv = config.visiting_q;
  const double qa = config.acceptance_q;
  const double t1 = std::exp((qv - 1.0) * std::log(2.0)) - 1.0;

  OptimizationResult out;
  out.value = std::numeric_limits<double>::max();
  std::uint64_t stream = 0;
  for (int restart = 0; restart <= config.restarts; ++restart) {
    RealVector x(dim);
    for (int d = 0; d < dim; ++d) x[d] = bounds.lower[d] + width[d] * rng.uniform(stream, 0, d);
    ++stream;
    double fx = finite_or_max(f(x));
    ++out.evaluations;
    RealVector best = x;
    double fbest = fx;
    for (int it = 0; it < config.max_iterations; ++it) {
      const double s = it + 2.0;
      const double t2 = std::exp((qv - 1.0) * std::log(s)) - 1.0;
      const double temperature = config.initial_temperature * t1 / t2;
      if (temperature < config.restart_ratio * config.initial_temperature) break;
      const double accept_t = temperature / (it + 1.0);
      // First half of a sweep moves all coordinates at once, second half one at a time.
      for (int j = 0; j < 2 * dim; ++j) {
        RealVector cand = x;
        if (j < dim) {
          for (int d = 0; d < dim; ++d) cand[d] += visiting_step(qv, temperature, rng, stream, j, d);
        } else {
          const int d = j - dim;
          cand[d] += visiting_step(qv, temperature, rng, stream, j, 0);
        }
        for (int d = 0; d < dim; ++d) {
          double v = std::fmod(cand[d] - bounds.lower[d], width[d]);
          if (v < 0.0) v += width[d];
          cand[d] = bounds.lower[d] + v;
        }
        const double fc = finite_or_max(f(cand));
        ++out.evaluations;
        bool accept = fc < fx;
        if (!accept) {
          const double p = 1.0 - (1.0 - qa) * (fc - fx) / accept_t;
          if (p > 0.0) accept = rng.uniform(stream, j, 10'000) <= std::exp(std::log(p) / (1.0 - qa));
        }
        if (accept) {
          x = cand;
          fx = fc;
          if (fx < fbest) {
            best = x;
            fbest = fx;
          }
        }
      }
      ++stream;
    }
    const OptimizationResult p = local_polish(f, best, config.polish);
    out.evaluations += p.evaluations;
    out.history.push_back({restart, p.value, fbest, 0.0});
    if (p.value < out.value) {
      out.value = p.value;
      out.x = p.x;
    }
  }
  out.converged = true;
  return out;
}

CrossValidationReport cross_validate_global(const Objective& f, const Bounds& bounds, const DEConfig& de,
                                            const RandomSearchConfig& rs, const AnnealingConfig& sa,
                                            const NelderMeadConfig& polish, int de_candidates) {
  if (de_candidates < 1) throw DomainError("cross_validate_global: need at least one DE candidate");
  CrossValidationReport rep;
  rep.differential_evolution = differential_evolution(f, bounds, de);
  OptimizationResult& d = rep.differential_evolution;
  const int count = std::min<int>(de_candidates, static_cast<int>(d.population.size()));
  for (int i = 0; i < count; ++i) {
    const OptimizationResult p = local_polish(f, d.population[i], polish);
    d.evaluations += p.evaluations;
    if (p.value < d.value) {
      d.value = p.value;
      d.x = p.x;
    }
  }
  rep.random_search = random_search(f, bounds, rs);
  rep.annealing = generalized_annealing(f, bounds, sa);
  const double v[3] = {rep.differential_evolution.value, rep.random_search.value, rep.annealing.value};
  rep.max_disagreement = std::max({std::abs(v[0] - v[1]), std::abs(v[0] - v[2]), std::abs(v[1] - v[2])});
  return rep;
}

}  // namespace ptz
