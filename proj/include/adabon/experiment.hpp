#ifndef ADABON_EXPERIMENT_HPP
#define ADABON_EXPERIMENT_HPP

#include <adabon/analysis.hpp>
#include <adabon/metrics.hpp>
#include <adabon/procedures.hpp>
#include <adabon/simulate.hpp>

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace adabon {

/// Worker count: ADABON_WORKERS if set to a positive integer, else the
/// hardware concurrency. Never affects results.
inline unsigned default_workers()
{
  if (const char* env = std::getenv("ADABON_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0)
      return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

/// Calls fn(i) for i in [0, count) across `workers` threads. fn must only
/// write to state owned by index i. The first exception is rethrown.
template <class Fn>
void parallel_for(std::size_t count, unsigned workers, Fn fn)
{
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i)
      fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count)
          return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error)
            error = std::current_exception();
          next.store(count);
        }
      }
    });
  }
  pool.clear();
  if (error)
    std::rethrow_exception(error);
}

struct Evaluation {
  std::size_t context = 0; ///< index into the context list
  RejectionResult result;
};

struct ReplicateRecord {
  std::size_t replicate = 0;
  TruthLabels truth;
  std::vector<double> filter; ///< F scores at cfg.u
  std::vector<Evaluation> evaluations;
};

/// Runs every (context, method) pair on each replicate of one configuration.
/// Pairs that a method does not support (FWER-only baselines with k > 1) are
/// skipped. Output is ordered by replicate and independent of `workers`.
inline std::vector<ReplicateRecord> run_replicates(const SimulationConfig& cfg,
                                                   const std::vector<Method>& methods,
                                                   const std::vector<ProcedureContext>& contexts,
                                                   const BaselineOptions& options = {},
                                                   unsigned workers = default_workers())
{
  cfg.validate();
  for (const auto& ctx : contexts) {
    ctx.validate(cfg.n);
    if (ctx.u != cfg.u)
      throw configuration_error("context u differs from the simulated labelling level");
  }

  std::vector<ReplicateRecord> out(cfg.reps);
  parallel_for(cfg.reps, workers, [&](std::size_t r) {
    auto rep = generate_replicate(cfg, r);
    const auto inputs = prepare_inputs(rep.pvalues, cfg.u, options);
    ReplicateRecord record;
    record.replicate = r;
    record.filter = inputs.scores.f;
    for (std::size_t c = 0; c < contexts.size(); ++c)
      for (Method m : methods) {
        if (is_fwer_only(m) && contexts[c].k != 1)
          continue;
        record.evaluations.push_back({c, run_method(m, inputs, contexts[c], options)});
      }
    record.truth = std::move(rep.truth);
    out[r] = std::move(record);
  });
  return out;
}

/// Grid of simulation settings. Defaults reproduce the k = 1 study.
struct SweepConfig {
  std::size_t m = 500;
  std::size_t n = 4;
  double mu_magnitude = 4.0;
  std::vector<double> pi1 = {0.025, 0.05, 0.075, 0.10, 0.125, 0.15};
  std::vector<double> rho = {-0.8, -0.2, 0.2, 0.8};
  std::vector<unsigned> u = {2, 3, 4};
  std::vector<unsigned> k = {1};
  double alpha = 0.05;
  double theta = 0.5;
  double gamma = 0.1;
  BaselineOptions baseline;
  std::size_t reps = 1000;
  std::uint64_t master_seed = 20240917;
  std::optional<std::size_t> blocks;
  std::vector<Method> methods = {Method::adafilter_adabon,    Method::adafilter_bon,
                                 Method::bonferroni,          Method::hochberg,
                                 Method::adaptive_bonferroni, Method::adaptive_hochberg};

  SimulationConfig setting(std::size_t pi1_index, std::size_t rho_index) const
  {
    SimulationConfig cfg;
    cfg.m = m;
    cfg.n = n;
    cfg.mu_magnitude = mu_magnitude;
    cfg.pi1 = pi1.at(pi1_index);
    cfg.rho = rho.at(rho_index);
    cfg.u = u.empty() ? 2 : u.front();
    cfg.reps = reps;
    cfg.blocks = blocks;
    cfg.master_seed = StreamKey(master_seed).child(pi1_index).child(rho_index).seed();
    return cfg;
  }

  void validate() const
  {
    if (pi1.empty() || rho.empty() || u.empty() || k.empty() || methods.empty())
      throw configuration_error("every sweep axis needs at least one value");
    for (std::size_t a = 0; a < pi1.size(); ++a)
      for (std::size_t b = 0; b < rho.size(); ++b) {
        auto cfg = setting(a, b);
        for (unsigned level : u) {
          cfg.u = level;
          cfg.validate();
        }
      }
    for (unsigned level : u)
      for (unsigned kk : k) {
        try {
          ProcedureContext{level, kk, alpha, theta, gamma}.validate(n);
        } catch (const std::domain_error& e) {
          throw configuration_error(e.what());
        }
      }
    if (baseline.kappa && *baseline.kappa > m)
      throw configuration_error("kappa exceeds m");
  }
};

namespace detail {

template <class T>
std::vector<T> scalar_or_list(const nlohmann::json& v, const char* key)
{
  try {
    if (v.is_array())
      return v.get<std::vector<T>>();
    return {v.get<T>()};
  } catch (const nlohmann::json::exception& e) {
    throw configuration_error(std::string("bad value for '") + key + "': " + e.what());
  }
}

template <class T>
T scalar(const nlohmann::json& v, const char* key)
{
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw configuration_error(std::string("bad value for '") + key + "': " + e.what());
  }
}

} // namespace detail

/// Reads a sweep from a JSON object. Absent keys keep their defaults;
/// unknown keys are rejected.
inline SweepConfig sweep_config_from_json(const nlohmann::json& j)
{
  if (!j.is_object())
    throw configuration_error("simulation config must be a JSON object");
  SweepConfig cfg;
  for (const auto& [key, v] : j.items()) {
    if (key == "m") cfg.m = detail::scalar<std::size_t>(v, "m");
    else if (key == "n") cfg.n = detail::scalar<std::size_t>(v, "n");
    else if (key == "mu_magnitude") cfg.mu_magnitude = detail::scalar<double>(v, "mu_magnitude");
    else if (key == "pi1") cfg.pi1 = detail::scalar_or_list<double>(v, "pi1");
    else if (key == "rho") cfg.rho = detail::scalar_or_list<double>(v, "rho");
    else if (key == "u") cfg.u = detail::scalar_or_list<unsigned>(v, "u");
    else if (key == "k") cfg.k = detail::scalar_or_list<unsigned>(v, "k");
    else if (key == "alpha") cfg.alpha = detail::scalar<double>(v, "alpha");
    else if (key == "theta") cfg.theta = detail::scalar<double>(v, "theta");
    else if (key == "gamma") cfg.gamma = detail::scalar<double>(v, "gamma");
    else if (key == "lambda") cfg.baseline.lambda = detail::scalar<double>(v, "lambda");
    else if (key == "kappa") cfg.baseline.kappa = detail::scalar<std::size_t>(v, "kappa");
    else if (key == "reps") cfg.reps = detail::scalar<std::size_t>(v, "reps");
    else if (key == "master_seed") cfg.master_seed = detail::scalar<std::uint64_t>(v, "master_seed");
    else if (key == "blocks") cfg.blocks = detail::scalar<std::size_t>(v, "blocks");
    else if (key == "combiner") {
      const auto name = detail::scalar<std::string>(v, "combiner");
      const auto c = parse_combiner(name);
      if (!c)
        throw configuration_error("unknown combiner '" + name + "'");
      cfg.baseline.combiner = *c;
    } else if (key == "methods") {
      cfg.methods.clear();
      for (const auto& name : detail::scalar_or_list<std::string>(v, "methods")) {
        const auto m = parse_method(name);
        if (!m)
          throw configuration_error("unknown method '" + name + "'");
        cfg.methods.push_back(*m);
      }
    } else {
      throw configuration_error("unknown config key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

/// Runs the full grid and returns one record per
/// (k, u, rho, pi1, method). Each (pi1, rho) setting simulates its
/// replicates once and evaluates every u, k and method on the same data.
inline std::vector<MetricsRecord> run_sweep(const SweepConfig& sweep,
                                            unsigned workers = default_workers())
{
  sweep.validate();

  struct Slot {
    unsigned u;
    unsigned k;
    Method method;
  };
  std::vector<Slot> slots;
  for (unsigned kk : sweep.k)
    for (unsigned level : sweep.u)
      for (Method m : sweep.methods)
        if (!(is_fwer_only(m) && kk != 1))
          slots.push_back({level, kk, m});

  const std::size_t settings = sweep.pi1.size() * sweep.rho.size();
  // records[setting][slot]
  std::vector<std::vector<MetricsRecord>> records(settings);

  for (std::size_t a = 0; a < sweep.pi1.size(); ++a) {
    for (std::size_t b = 0; b < sweep.rho.size(); ++b) {
      const auto cfg = sweep.setting(a, b);
      std::vector<std::vector<ReplicateSummary>> summaries(sweep.reps);
      parallel_for(sweep.reps, workers, [&](std::size_t r) {
        const auto rep = generate_replicate(cfg, r);
        auto& out = summaries[r];
        out.reserve(slots.size());
        for (unsigned level : sweep.u) {
          const auto truth = relabel(rep.truth, level);
          const auto inputs = prepare_inputs(rep.pvalues, level, sweep.baseline);
          for (const auto& slot : slots) {
            if (slot.u != level)
              continue;
            const ProcedureContext ctx{level, slot.k, sweep.alpha, sweep.theta, sweep.gamma};
            const auto result = run_method(slot.method, inputs, ctx, sweep.baseline);
            std::optional<std::span<const double>> filter;
            if (is_adafilter(slot.method))
              filter = std::span<const double>(inputs.scores.f);
            out.push_back(summarize(result, truth, filter));
          }
        }
      });

      // summaries[r] is ordered by (u, slot); map back to slot order
      std::vector<std::size_t> position(slots.size());
      std::size_t next = 0;
      for (unsigned level : sweep.u)
        for (std::size_t s = 0; s < slots.size(); ++s)
          if (slots[s].u == level)
            position[s] = next++;

      auto& row = records[a * sweep.rho.size() + b];
      for (std::size_t s = 0; s < slots.size(); ++s) {
        MetricsAccumulator acc(slots[s].k, sweep.gamma);
        for (std::size_t r = 0; r < sweep.reps; ++r)
          acc.add(summaries[r][position[s]]);
        MetricsRecord rec;
        rec.method = slots[s].method;
        rec.u = slots[s].u;
        rec.alpha = sweep.alpha;
        rec.pi1 = cfg.pi1;
        rec.rho = cfg.rho;
        rec.theta = sweep.theta;
        row.push_back(acc.finish(rec));
      }
    }
  }

  std::vector<MetricsRecord> out;
  out.reserve(settings * slots.size());
  for (unsigned kk : sweep.k)
    for (unsigned level : sweep.u)
      for (std::size_t b = 0; b < sweep.rho.size(); ++b)
        for (std::size_t a = 0; a < sweep.pi1.size(); ++a)
          for (const auto& rec : records[a * sweep.rho.size() + b])
            if (rec.k == kk && rec.u == level)
              out.push_back(rec);
  return out;
}

} // namespace adabon

#endif // ADABON_EXPERIMENT_HPP
