#include "ptz/experiment.hpp"

#include "ptz/block_dynamics.hpp"
#include "ptz/transfer_maps.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

namespace ptz {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---- schema helpers --------------------------------------------------------

std::string child(const std::string& path, std::string_view key) { return path + "/" + std::string(key); }
std::string child(const std::string& path, std::size_t i) { return path + "/" + std::to_string(i); }

void require_object(const Json& j, const std::string& path, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw SchemaError(path.empty() ? "/" : path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw SchemaError(child(path, it.key()), "unknown field");
    }
  }
}

long long as_integer(const Json& v, const std::string& path, long long lo, long long hi) {
  if (!v.is_number_integer()) throw SchemaError(path, "expected an integer");
  const long long x = v.is_number_unsigned() ? static_cast<long long>(v.get<std::uint64_t>()) : v.get<long long>();
  if (x < lo || x > hi) {
    throw SchemaError(path, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "], got " + std::to_string(x));
  }
  return x;
}

double as_number(const Json& v, const std::string& path) {
  if (!v.is_number()) throw SchemaError(path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw SchemaError(path, "must be finite");
  return x;
}

double as_positive(const Json& v, const std::string& path) {
  const double x = as_number(v, path);
  if (!(x > 0.0)) throw SchemaError(path, "must be positive");
  return x;
}

std::string as_string(const Json& v, const std::string& path) {
  if (!v.is_string()) throw SchemaError(path, "expected a string");
  return v.get<std::string>();
}

template <typename Parse>
auto as_enum(const Json& v, const std::string& path, Parse parse) {
  const std::string s = as_string(v, path);
  try {
    return parse(s);
  } catch (const std::exception&) {
    throw SchemaError(path, "unknown value \"" + s + "\"");
  }
}

std::pair<double, double> as_interval(const Json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2) throw SchemaError(path, "expected [lo, hi]");
  const double lo = as_number(v[0], child(path, 0));
  const double hi = as_number(v[1], child(path, 1));
  if (!(lo < hi)) throw SchemaError(path, "needs lo < hi");
  return {lo, hi};
}

std::vector<int> as_int_list(const Json& v, const std::string& path, int lo, int hi) {
  std::vector<int> out;
  if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(static_cast<int>(as_integer(v[i], child(path, i), lo, hi)));
  } else if (v.is_object()) {
    require_object(v, path, {"from", "to", "step"});
    if (!v.contains("from") || !v.contains("to")) throw SchemaError(path, "range needs \"from\" and \"to\"");
    const auto from = static_cast<int>(as_integer(v["from"], child(path, "from"), lo, hi));
    const auto to = static_cast<int>(as_integer(v["to"], child(path, "to"), lo, hi));
    const auto step = v.contains("step") ? static_cast<int>(as_integer(v["step"], child(path, "step"), 1, hi)) : 1;
    for (int x = from; x <= to; x += step) out.push_back(x);
  } else {
    out.push_back(static_cast<int>(as_integer(v, path, lo, hi)));
  }
  if (out.empty()) throw SchemaError(path, "empty list");
  return out;
}

Json int_list_json(const std::vector<int>& v) { return Json(v); }

// ---- ordered sweep ----------------------------------------------------------

// Runs task(i) for i < count on up to `threads` workers; emit() sees results in
// index order, one at a time.
template <typename Row, typename Task, typename Emit>
std::vector<Row> ordered_sweep(int count, int threads, Task&& task, Emit&& emit) {
  std::vector<std::optional<Row>> slots(count);
  std::mutex mutex;
  int next_emit = 0;
  std::atomic<int> next_task{0};
  auto worker = [&] {
    for (int i = next_task++; i < count; i = next_task++) {
      Row row = task(i);
      std::lock_guard lock(mutex);
      slots[i] = std::move(row);
      while (next_emit < count && slots[next_emit]) emit(*slots[next_emit++]);
    }
  };
  const int workers = std::clamp(threads, 1, std::max(count, 1));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  std::vector<Row> out;
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

int sectors_for(RegistrationCriterion c, int n_sender) {
  return c == RegistrationCriterion::max_excitation_probability ? n_sender : 1;
}

double registration_time(const ExperimentConfig& config, const SpectralCache& cache) {
  if (config.t_star) return *config.t_star;
  return find_registration_time(cache, config.criterion, config.n_sender, config.window_for(cache.chain().n_sites)).t_star;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::registration_time: return "registration-time";
    case Protocol::ptz_complete: return "ptz-complete";
    case Protocol::ptz_restricted: return "ptz-restricted";
    case Protocol::arbitrary_parameter: return "arbitrary-parameter";
    case Protocol::oracle_check: return "oracle-check";
  }
  return "unknown";
}

Protocol protocol_from_string(std::string_view name) {
  for (Protocol p : {Protocol::registration_time, Protocol::ptz_complete, Protocol::ptz_restricted,
                     Protocol::arbitrary_parameter, Protocol::oracle_check}) {
    if (to_string(p) == name) return p;
  }
  throw DomainError("unknown protocol: " + std::string(name));
}

std::string_view subcommand_name(Protocol p) {
  switch (p) {
    case Protocol::registration_time: return "reg-time";
    case Protocol::ptz_complete: return "ptz-complete";
    case Protocol::ptz_restricted: return "ptz-restricted";
    case Protocol::arbitrary_parameter: return "arb-transfer";
    case Protocol::oracle_check: return "oracle-check";
  }
  return "unknown";
}

TimeWindow ExperimentConfig::window_for(int n_sites) const {
  if (window) return {window->first, window->second, step};
  return {window_lo_factor * n_sites, window_hi_factor * n_sites, step};
}

Json ExperimentConfig::to_json() const {
  Json time = {{"window_factors", {window_lo_factor, window_hi_factor}}, {"step", step}};
  if (window) time["window"] = {window->first, window->second};
  if (t_star) time["t_star"] = *t_star;
  Json j = {{"protocol", to_string(protocol)},
            {"chain", {{"coupling_mode", to_string(coupling_mode)}}},
            {"seed", seed},
            {"threads", threads},
            {"output", output}};
  if (protocol == Protocol::oracle_check) {
    j["oracle"] = {{"configurations", oracle.configurations},
                   {"min_sites", oracle.min_sites},
                   {"max_sites", oracle.max_sites},
                   {"tolerance", oracle.tolerance}};
    return j;
  }
  j["n_sites"] = int_list_json(n_sites);
  j["n_sender"] = n_sender;
  j["n_receiver"] = n_receiver;
  j["time"] = time;
  if (protocol != Protocol::arbitrary_parameter) j["criterion"] = to_string(criterion);
  if (protocol == Protocol::ptz_restricted || protocol == Protocol::arbitrary_parameter) {
    j["n_extended"] = int_list_json(n_extended);
    Json opt = de_config_to_json(de);
    opt.erase("seed");
    opt["runs"] = runs;
    opt["polish_restarts"] = polish.restarts;
    j["optimizer"] = opt;
  }
  if (protocol == Protocol::ptz_restricted) {
    j["max_excitation"] = max_excitation;
    j["objective"] = {{"residual_form", to_string(objective.residual_form)},
                      {"w1", objective.w1},
                      {"w2", objective.w2},
                      {"angle_bound", objective.angle_bound}};
  }
  return j;
}

ExperimentConfig parse_experiment_config(const Json& j, Protocol expected) {
  require_object(j, "", {"protocol", "chain", "n_sites", "n_sender", "n_receiver", "n_extended", "n_ancilla",
                         "max_excitation", "criterion", "time", "optimizer", "objective", "oracle", "output", "seed",
                         "threads"});
  ExperimentConfig c;
  c.protocol = expected;
  if (j.contains("protocol")) {
    const Protocol p = as_enum(j["protocol"], "/protocol", protocol_from_string);
    if (p != expected) {
      throw SchemaError("/protocol", "config is for " + std::string(to_string(p)) + " but the subcommand runs " +
                                         std::string(to_string(expected)));
    }
  }
  if (j.contains("chain")) {
    require_object(j["chain"], "/chain", {"coupling_mode"});
    if (j["chain"].contains("coupling_mode")) {
      c.coupling_mode = as_enum(j["chain"]["coupling_mode"], "/chain/coupling_mode", coupling_mode_from_string);
    }
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0)) {
      throw SchemaError("/seed", "expected a non-negative integer");
    }
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("threads")) c.threads = static_cast<int>(as_integer(j["threads"], "/threads", 1, 1024));
  if (j.contains("output")) c.output = as_string(j["output"], "/output");
  c.oracle.seed = c.seed;
  c.oracle.coupling_mode = c.coupling_mode;

  if (expected == Protocol::oracle_check) {
    for (const char* key : {"n_sites", "n_sender", "n_receiver", "n_extended", "n_ancilla", "max_excitation", "criterion",
                            "time", "optimizer", "objective"}) {
      if (j.contains(key)) throw SchemaError(std::string("/") + key, "not used by oracle-check");
    }
    if (j.contains("oracle")) {
      const Json& o = j["oracle"];
      require_object(o, "/oracle", {"configurations", "min_sites", "max_sites", "tolerance"});
      if (o.contains("configurations")) c.oracle.configurations = static_cast<int>(as_integer(o["configurations"], "/oracle/configurations", 1, 1000000));
      if (o.contains("min_sites")) c.oracle.min_sites = static_cast<int>(as_integer(o["min_sites"], "/oracle/min_sites", 2, 64));
      if (o.contains("max_sites")) c.oracle.max_sites = static_cast<int>(as_integer(o["max_sites"], "/oracle/max_sites", 2, 64));
      if (o.contains("tolerance")) c.oracle.tolerance = as_positive(o["tolerance"], "/oracle/tolerance");
      if (c.oracle.min_sites > c.oracle.max_sites) throw SchemaError("/oracle/min_sites", "exceeds max_sites");
    }
    return c;
  }
  if (j.contains("oracle")) throw SchemaError("/oracle", "only used by oracle-check");

  if (!j.contains("n_sites")) throw SchemaError("/n_sites", "required");
  c.n_sites = as_int_list(j["n_sites"], "/n_sites", 2, 100000);
  if (!j.contains("n_sender")) throw SchemaError("/n_sender", "required");
  c.n_sender = static_cast<int>(as_integer(j["n_sender"], "/n_sender", 1, 64));
  c.n_receiver = j.contains("n_receiver") ? static_cast<int>(as_integer(j["n_receiver"], "/n_receiver", 1, 64)) : c.n_sender;
  if (c.n_receiver != c.n_sender) {
    throw SchemaError("/n_receiver", "receiver and sender must have the same size for this protocol");
  }
  const int min_sites = *std::min_element(c.n_sites.begin(), c.n_sites.end());

  // extended receiver
  const bool uses_er = expected == Protocol::ptz_restricted || expected == Protocol::arbitrary_parameter;
  if (j.contains("n_extended") && j.contains("n_ancilla")) {
    throw SchemaError("/n_ancilla", "give either n_extended or n_ancilla, not both");
  }
  if (!uses_er && (j.contains("n_extended") || j.contains("n_ancilla"))) {
    throw SchemaError(j.contains("n_extended") ? "/n_extended" : "/n_ancilla",
                      "not used by " + std::string(to_string(expected)));
  }
  if (uses_er) {
    if (j.contains("n_extended")) {
      c.n_extended = as_int_list(j["n_extended"], "/n_extended", c.n_sender, min_sites);
    } else if (j.contains("n_ancilla")) {
      for (int a : as_int_list(j["n_ancilla"], "/n_ancilla", 0, min_sites - c.n_sender)) c.n_extended.push_back(c.n_sender + a);
    } else {
      throw SchemaError("/n_extended", "required (or n_ancilla)");
    }
  }

  if (j.contains("max_excitation")) {
    if (expected != Protocol::ptz_restricted) throw SchemaError("/max_excitation", "only used by ptz-restricted");
    c.max_excitation = static_cast<int>(as_integer(j["max_excitation"], "/max_excitation", 1, c.n_sender));
  }

  // registration time
  c.criterion = expected == Protocol::ptz_complete ? RegistrationCriterion::max_excitation_probability
                                                   : RegistrationCriterion::max_frobenius_w;
  if (j.contains("criterion")) {
    if (expected == Protocol::arbitrary_parameter) {
      throw SchemaError("/criterion", "arbitrary-parameter transfer always maximizes lambda_opt over the scan");
    }
    c.criterion = as_enum(j["criterion"], "/criterion", registration_criterion_from_string);
    if (c.criterion == RegistrationCriterion::max_lambda_opt) {
      throw SchemaError("/criterion", "max-lambda-opt comes from the arb-transfer scan");
    }
  }
  if (c.criterion == RegistrationCriterion::max_excitation_probability || c.criterion == RegistrationCriterion::max_frobenius_w) {
    if (2 * c.n_sender > min_sites) throw SchemaError("/n_sites", "every chain needs at least 2 n_sender sites");
  }
  if (expected == Protocol::arbitrary_parameter) c.step = 0.05;
  if (j.contains("time")) {
    const Json& t = j["time"];
    require_object(t, "/time", {"window_factors", "window", "step", "t_star"});
    if (t.contains("window_factors")) {
      const auto [lo, hi] = as_interval(t["window_factors"], "/time/window_factors");
      if (!(lo > 0.0)) throw SchemaError("/time/window_factors/0", "must be positive");
      c.window_lo_factor = lo;
      c.window_hi_factor = hi;
    }
    if (t.contains("window")) {
      const auto w = as_interval(t["window"], "/time/window");
      if (!(w.first > 0.0)) throw SchemaError("/time/window/0", "must be positive");
      c.window = w;
    }
    if (t.contains("step")) c.step = as_positive(t["step"], "/time/step");
    if (t.contains("t_star")) c.t_star = as_positive(t["t_star"], "/time/t_star");
  }
  if (!c.t_star) {
    for (int n : c.n_sites) {
      const TimeWindow w = c.window_for(n);
      if (c.step > w.hi - w.lo) throw SchemaError("/time/step", "larger than the window at N=" + std::to_string(n));
    }
  }

  // optimizer
  c.de = DEConfig::for_sender(c.n_sender);
  if (j.contains("optimizer")) {
    if (!uses_er) throw SchemaError("/optimizer", "not used by " + std::string(to_string(expected)));
    const Json& o = j["optimizer"];
    require_object(o, "/optimizer", {"profile", "population_size", "crossover_probability", "mutation_range",
                                     "max_generations", "spread_atol", "spread_rtol", "runs", "polish_restarts"});
    if (o.contains("profile")) {
      const std::string p = as_string(o["profile"], "/optimizer/profile");
      if (p == "stress") {
        c.de = DEConfig::stress_profile(c.n_sender);
      } else if (p != "default") {
        throw SchemaError("/optimizer/profile", "expected \"default\" or \"stress\"");
      }
    }
    if (o.contains("population_size")) c.de.population_size = static_cast<int>(as_integer(o["population_size"], "/optimizer/population_size", 4, 10000000));
    if (o.contains("crossover_probability")) {
      c.de.crossover_probability = as_number(o["crossover_probability"], "/optimizer/crossover_probability");
      if (!(c.de.crossover_probability > 0.0 && c.de.crossover_probability <= 1.0)) {
        throw SchemaError("/optimizer/crossover_probability", "must lie in (0, 1]");
      }
    }
    if (o.contains("mutation_range")) {
      if (!o["mutation_range"].is_array() || o["mutation_range"].size() != 2) {
        throw SchemaError("/optimizer/mutation_range", "expected [lo, hi]");
      }
      c.de.mutation_lo = as_number(o["mutation_range"][0], "/optimizer/mutation_range/0");
      c.de.mutation_hi = as_number(o["mutation_range"][1], "/optimizer/mutation_range/1");
      if (!(c.de.mutation_lo > 0.0 && c.de.mutation_lo <= c.de.mutation_hi && c.de.mutation_hi <= 2.0)) {
        throw SchemaError("/optimizer/mutation_range", "must satisfy 0 < lo <= hi <= 2");
      }
    }
    if (o.contains("max_generations")) c.de.max_generations = static_cast<int>(as_integer(o["max_generations"], "/optimizer/max_generations", 1, 100000000));
    if (o.contains("spread_atol")) c.de.spread_atol = as_number(o["spread_atol"], "/optimizer/spread_atol");
    if (o.contains("spread_rtol")) c.de.spread_rtol = as_number(o["spread_rtol"], "/optimizer/spread_rtol");
    if (o.contains("runs")) c.runs = static_cast<int>(as_integer(o["runs"], "/optimizer/runs", 1, 100000));
    if (o.contains("polish_restarts")) c.polish.restarts = static_cast<int>(as_integer(o["polish_restarts"], "/optimizer/polish_restarts", 0, 100000));
  }
  c.de.seed = c.seed;
  c.de.threads = 1;
  try {
    c.de.validate();
  } catch (const DomainError& e) {
    throw SchemaError("/optimizer", e.what());
  }

  if (j.contains("objective")) {
    if (expected != Protocol::ptz_restricted) throw SchemaError("/objective", "only used by ptz-restricted");
    const Json& o = j["objective"];
    require_object(o, "/objective", {"residual_form", "w1", "w2", "angle_bound"});
    if (o.contains("residual_form")) c.objective.residual_form = as_enum(o["residual_form"], "/objective/residual_form", residual_form_from_string);
    if (o.contains("w1")) c.objective.w1 = as_positive(o["w1"], "/objective/w1");
    if (o.contains("w2")) c.objective.w2 = as_positive(o["w2"], "/objective/w2");
    if (o.contains("angle_bound")) c.objective.angle_bound = as_positive(o["angle_bound"], "/objective/angle_bound");
  }
  return c;
}

// ---------------------------------------------------------------------------

std::vector<std::string> preset_names() {
  return {"table1", "table2-s3", "table2-s4", "fig1", "fig2-s3", "fig2-s4", "fig3", "fig4"};
}

Json preset_config(std::string_view name) {
  const Json tables = {{"from", 10}, {"to", 100}, {"step", 5}};
  const Json curves = {{"from", 10}, {"to", 100}, {"step", 10}};
  if (name == "table1") {
    return {{"protocol", "registration-time"}, {"n_sites", tables}, {"n_sender", 2}, {"criterion", "max-excitation-probability"}};
  }
  if (name == "table2-s3" || name == "table2-s4") {
    return {{"protocol", "registration-time"}, {"n_sites", tables}, {"n_sender", name == "table2-s3" ? 3 : 4},
            {"criterion", "max-frobenius-w"}};
  }
  if (name == "fig1") {
    return {{"protocol", "ptz-complete"}, {"n_sites", curves}, {"n_sender", 2}, {"criterion", "max-excitation-probability"}};
  }
  if (name == "fig2-s3" || name == "fig2-s4") {
    return {{"protocol", "ptz-restricted"}, {"n_sites", curves}, {"n_sender", name == "fig2-s3" ? 3 : 4},
            {"n_ancilla", {1, 2, 3, 4, 5}}, {"criterion", "max-frobenius-w"}};
  }
  if (name == "fig3") {
    return {{"protocol", "arbitrary-parameter"}, {"n_sites", curves}, {"n_sender", 2}, {"n_extended", 3}};
  }
  if (name == "fig4") {
    return {{"protocol", "arbitrary-parameter"}, {"n_sites", tables}, {"n_sender", 2}, {"n_extended", {3, 4}}};
  }
  throw SchemaError("--preset", "unknown preset \"" + std::string(name) + "\"");
}

// ---------------------------------------------------------------------------

std::vector<RegistrationRow> run_table_registration_times(const ExperimentConfig& config, std::ostream& csv) {
  if (config.protocol != Protocol::registration_time) throw DomainError("run_table_registration_times: wrong protocol");
  CsvWriter w(csv, config.to_json(), config.seed, {"N", "criterion", "t_star", "criterion_value", "wall_time", "status", "note"});
  const auto task = [&](int i) {
    RegistrationRow row;
    row.n_sites = config.n_sites[i];
    const auto start = std::chrono::steady_clock::now();
    try {
      const SpectralCache cache({row.n_sites, config.coupling_mode}, sectors_for(config.criterion, config.n_sender));
      if (config.t_star) {
        row.t_star = *config.t_star;
        row.value = registration_criterion_value(cache, config.criterion, config.n_sender, row.t_star);
      } else {
        const RegistrationTime rt = find_registration_time(cache, config.criterion, config.n_sender, config.window_for(row.n_sites));
        row.t_star = rt.t_star;
        row.value = rt.value;
      }
    } catch (const std::exception& e) {
      row.failed = true;
      row.note = e.what();
    }
    row.wall_time = seconds_since(start);
    return row;
  };
  const auto emit = [&](const RegistrationRow& r) {
    w.cell(r.n_sites).cell(std::string(to_string(config.criterion))).cell(r.t_star).cell(r.value).cell(r.wall_time);
    w.cell(std::string(r.failed ? "failed" : "ok")).text(r.note);
    w.end_row();
  };
  return ordered_sweep<RegistrationRow>(static_cast<int>(config.n_sites.size()), config.threads, task, emit);
}

std::vector<DeviationRow> run_curve_deviation(const ExperimentConfig& config, std::ostream& csv) {
  const bool complete = config.protocol == Protocol::ptz_complete;
  if (!complete && config.protocol != Protocol::ptz_restricted) throw DomainError("run_curve_deviation: wrong protocol");
  CsvWriter w(csv, config.to_json(), config.seed,
              {"N", "n_sender", "n_ancilla", "t_star", "delta", "residual", "round_trip_error", "min_eigenvalue", "seed",
               "wall_time", "status", "note"});
  const std::vector<int> extended = complete ? std::vector<int>{config.n_sender} : config.n_extended;

  const auto task = [&](int i) {
    std::vector<DeviationRow> rows;
    const int n = config.n_sites[i];
    auto start = std::chrono::steady_clock::now();
    std::shared_ptr<const SpectralCache> cache;
    double t = 0.0;
    std::string setup_error;
    try {
      const int sectors = std::max(sectors_for(config.criterion, config.n_sender), complete ? config.n_sender : config.max_excitation);
      cache = std::make_shared<const SpectralCache>(ChainSpec{n, config.coupling_mode}, sectors);
      t = registration_time(config, *cache);
    } catch (const std::exception& e) {
      setup_error = e.what();
    }
    for (int n_er : extended) {
      for (int r = 0; r < (complete ? 1 : config.runs); ++r) {
        DeviationRow row;
        row.n_sites = n;
        row.n_ancilla = n_er - config.n_sender;
        row.seed = config.seed + static_cast<std::uint64_t>(r);
        row.t_star = t;
        if (!complete) {
          const SizeBoundCheck b = check_size_bounds(config.n_sender, n_er, TransferProtocol::ptz_restricted);
          if (!b.satisfied) row.note = "warning: " + b.explanation;
        }
        const auto fail = [&](const std::string& what) {
          row.failed = true;
          row.note += (row.note.empty() ? "" : "; ") + what;
        };
        if (!setup_error.empty()) {
          fail(setup_error);
        } else {
          try {
            PTZSolution sol;
            if (complete) {
              sol = solve_ptz_complete(cache, config.n_sender, t);
              row.record = solution_to_json(sol);
            } else {
              const RestrictedObjective obj(cache, config.n_sender, n_er, config.max_excitation, t, config.objective);
              DEConfig de = config.de;
              de.seed = row.seed;
              RestrictedRun run;
              try {
                run = run_ptz_restricted(obj, de, config.polish);
              } catch (const NoConvergenceError& e) {
                row.residual = obj.s_t(e.best());
                throw;
              }
              sol = run.solution;
              row.record = solution_to_json(sol);
              row.record["s_t_global"] = run.s_t_global;
              row.record["s_t_polished"] = run.s_t_polished;
              row.record["s_t_refined"] = run.s_t_refined;
              row.record["f_t_global"] = run.global.value;
              row.record["constraint_polished"] = run.constraint_polished;
              if (run.constraint_polished) row.note += (row.note.empty() ? "" : "; ") + std::string("S_T-only polish before refinement");
            }
            row.delta = sol.delta;
            row.residual = sol.residual;
            row.round_trip_error = sol.round_trip_error;
            row.min_eigenvalue = sol.min_eigenvalue;
          } catch (const std::exception& e) {
            fail(e.what());
          }
        }
        row.record["N"] = n;
        row.record["n_sender"] = config.n_sender;
        row.record["n_extended"] = n_er;
        row.record["seed"] = row.seed;
        row.record["status"] = row.failed ? "failed" : "ok";
        if (!row.note.empty()) row.record["note"] = row.note;
        row.wall_time = seconds_since(start);
        start = std::chrono::steady_clock::now();
        rows.push_back(std::move(row));
      }
    }
    return rows;
  };
  const auto emit = [&](const std::vector<DeviationRow>& rows) {
    for (const auto& r : rows) {
      w.cell(r.n_sites).cell(config.n_sender).cell(r.n_ancilla).cell(r.t_star).cell(r.delta).cell(r.residual);
      w.cell(r.round_trip_error).cell(r.min_eigenvalue).cell(static_cast<long long>(r.seed)).cell(r.wall_time);
      w.cell(std::string(r.failed ? "failed" : "ok")).text(r.note);
      w.end_row();
    }
  };
  std::vector<DeviationRow> out;
  for (auto& rows : ordered_sweep<std::vector<DeviationRow>>(static_cast<int>(config.n_sites.size()), config.threads, task, emit)) {
    for (auto& r : rows) out.push_back(std::move(r));
  }
  return out;
}

std::vector<LambdaRow> run_curve_lambda(const ExperimentConfig& config, std::ostream& scan_csv, std::ostream& summary_csv) {
  if (config.protocol != Protocol::arbitrary_parameter) throw DomainError("run_curve_lambda: wrong protocol");
  const Json resolved = config.to_json();
  CsvWriter scan_w(scan_csv, resolved, config.seed, {"N", "n_sender", "n_extended", "t", "lambda_opt", "offdiag_residual", "refined"});
  CsvWriter sum_w(summary_csv, resolved, config.seed,
                  {"N", "n_sender", "n_extended", "t_opt", "lambda_opt_max", "offdiag_residual", "restoring_error", "wall_time",
                   "status", "note"});

  // Parallelize over chains when there are several, otherwise over time points.
  const int outer = config.n_sites.size() > 1 ? config.threads : 1;
  ArbitraryConfig base;
  base.de = config.de;
  base.polish = config.polish;
  base.runs = config.runs;  // best of `runs` DE seeds per time point
  base.threads = outer == 1 ? config.threads : 1;

  const auto task = [&](int i) {
    std::vector<LambdaRow> rows;
    const int n = config.n_sites[i];
    for (int n_er : config.n_extended) {
      const auto start = std::chrono::steady_clock::now();
      LambdaRow row;
      row.n_sites = n;
      row.n_extended = n_er;
      try {
        auto cache = std::make_shared<const SpectralCache>(ChainSpec{n, config.coupling_mode}, 1);
        const TransferPipeline pipeline(cache, {n, config.n_sender, config.n_sender, n_er}, 1);
        ArbitraryConfig ac = base;
        ac.window = config.window_for(n);
        const std::vector<double> times = config.t_star ? std::vector<double>{*config.t_star} : ac.window.grid();
        row.scan = scan_arbitrary_parameter(pipeline, times, ac);
        const ArbitraryResult res = select_arbitrary_optimum(pipeline, row.scan, ac);
        row.t_opt = res.t_opt;
        row.lambda_opt = res.scales.lambda_opt;
        row.offdiag_residual = offdiagonal_residual(res.map.matrix);
        std::vector<ZeroCoherenceState> senders;
        for (int s = 0; s < 20; ++s) senders.push_back(random_zero_coherence_state(config.n_sender, 1, config.seed + 1000 + s));
        row.restoring_error = structural_restoring_error(res.map, senders);
        if (!res.size_bound_satisfied) row.note = "warning: " + res.size_bound_note;
        row.record = {{"t_opt", res.t_opt},
                      {"phi_opt", params_to_json(res.phi_opt)},
                      {"map", map_to_json(res.map, res.scales)},
                      {"restoring_error", row.restoring_error}};
      } catch (const std::exception& e) {
        row.failed = true;
        row.note = e.what();
        double floor = std::numeric_limits<double>::infinity();
        for (const auto& p : row.scan) floor = std::min(floor, p.offdiag_residual);
        row.offdiag_residual = floor;
      }
      row.record["N"] = n;
      row.record["n_sender"] = config.n_sender;
      row.record["n_extended"] = n_er;
      row.record["status"] = row.failed ? "failed" : "ok";
      if (!row.note.empty()) row.record["note"] = row.note;
      row.wall_time = seconds_since(start);
      rows.push_back(std::move(row));
    }
    return rows;
  };
  const auto emit = [&](const std::vector<LambdaRow>& rows) {
    for (const auto& r : rows) {
      for (const auto& p : r.scan) {
        scan_w.cell(r.n_sites).cell(config.n_sender).cell(r.n_extended).cell(p.t).cell(p.lambda_opt).cell(p.offdiag_residual);
        scan_w.cell(p.refined ? 1 : 0);
        scan_w.end_row();
      }
      sum_w.cell(r.n_sites).cell(config.n_sender).cell(r.n_extended).cell(r.t_opt).cell(r.lambda_opt).cell(r.offdiag_residual);
      sum_w.cell(r.restoring_error).cell(r.wall_time).cell(std::string(r.failed ? "failed" : "ok")).text(r.note);
      sum_w.end_row();
    }
  };
  std::vector<LambdaRow> out;
  for (auto& rows : ordered_sweep<std::vector<LambdaRow>>(static_cast<int>(config.n_sites.size()), outer, task, emit)) {
    for (auto& r : rows) out.push_back(std::move(r));
  }
  return out;
}

OracleReport run_oracle_suite(const ExperimentConfig& config) {
  if (config.protocol != Protocol::oracle_check) throw DomainError("run_oracle_suite: wrong protocol");
  if (config.oracle.max_sites > FullStateOracle::kMaxSites) {
    throw CapacityError("oracle suite: max_sites " + std::to_string(config.oracle.max_sites) + " exceeds " +
                        std::to_string(FullStateOracle::kMaxSites));
  }
  return run_oracle_battery(config.oracle);
}

Json oracle_report_to_json(const OracleReport& report) {
  Json cases = Json::array();
  for (const auto& c : report.cases) {
    cases.push_back({{"n_sites", c.n_sites},
                     {"n_sender", c.n_sender},
                     {"n_receiver", c.n_receiver},
                     {"n_extended", c.n_extended},
                     {"max_excitation", c.max_excitation},
                     {"t", c.t},
                     {"max_abs_diff", c.max_abs_diff}});
  }
  Json j = {{"passed", report.passed()},
            {"configurations", report.cases.size()},
            {"failures", report.failures},
            {"max_deviation", report.max_deviation},
            {"cases", cases}};
  if (!report.passed()) j["first_failure"] = report.first_failure;
  return j;
}

}  // namespace ptz
