#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "lowrank_gp/complexity.hpp"
#include "lowrank_gp/csv.hpp"
#include "lowrank_gp/errors.hpp"
#include "lowrank_gp/gpcore.hpp"
#include "lowrank_gp/kernel.hpp"
#include "lowrank_gp/knots.hpp"
#include "lowrank_gp/parallel.hpp"
#include "lowrank_gp/predict.hpp"
#include "lowrank_gp/rng.hpp"

namespace lowrank_gp {

enum class Scenario { StrongCorr, WeakCorr, Consistency, NonuniformFx, Custom };

inline std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::StrongCorr: return "strong_corr";
    case Scenario::WeakCorr: return "weak_corr";
    case Scenario::Consistency: return "consistency";
    case Scenario::NonuniformFx: return "nonuniform_fx";
    case Scenario::Custom: return "custom";
  }
  return "custom";
}

inline Scenario scenario_from_string(std::string_view s) {
  for (auto v : {Scenario::StrongCorr, Scenario::WeakCorr, Scenario::Consistency, Scenario::NonuniformFx,
                 Scenario::Custom})
    if (to_string(v) == s) return v;
  throw ConfigError("unknown scenario '" + std::string(s) +
                    "' (expected strong_corr, weak_corr, consistency, nonuniform_fx, custom)");
}

/// Sampling law of the locations on [0,1]^2.
///   Uniform: uniform on the unit square.
///   Mixture: 75% uniform on [0,0.5]^2, 25% uniform on the other three
///            half-width squares.
enum class LocationLaw { Uniform, Mixture };

inline std::string_view to_string(LocationLaw l) { return l == LocationLaw::Uniform ? "uniform" : "mixture"; }

inline LocationLaw location_law_from_string(std::string_view s) {
  if (s == "uniform") return LocationLaw::Uniform;
  if (s == "mixture") return LocationLaw::Mixture;
  throw ConfigError("unknown location_law '" + std::string(s) + "' (expected uniform, mixture)");
}

enum class ScoreTarget { Latent, Observed };

inline std::string_view to_string(ScoreTarget t) { return t == ScoreTarget::Latent ? "latent" : "observed"; }

inline ScoreTarget score_target_from_string(std::string_view s) {
  if (s == "latent") return ScoreTarget::Latent;
  if (s == "observed") return ScoreTarget::Observed;
  throw ConfigError("unknown score_against '" + std::string(s) + "' (expected latent, observed)");
}

/// How the nugget used by each predictor is chosen.
///   Known: the imposed spec's tau2 as given.
///   Mle:   tau2 re-estimated per replicate with the other parameters held at
///          the imposed values, on a subsample of min(n, mle_subsample).
enum class Tau2Mode { Known, Mle };

inline std::string_view to_string(Tau2Mode m) { return m == Tau2Mode::Known ? "known" : "mle"; }

inline Tau2Mode tau2_mode_from_string(std::string_view s) {
  if (s == "known") return Tau2Mode::Known;
  if (s == "mle") return Tau2Mode::Mle;
  throw ConfigError("unknown tau2_mode '" + std::string(s) + "' (expected known, mle)");
}

struct NamedSpec {
  std::string label;
  CovarianceSpec spec;
};

/// Knot strategies understood by the harness: the KnotStrategy names plus
/// "spu" (support points of a uniform sample on the unit square) and "all"
/// (every training location).
inline const std::vector<std::string>& harness_strategies() {
  static const std::vector<std::string> names = {"sp", "rand", "grid", "spu", "all"};
  return names;
}

struct ExperimentConfig {
  Scenario scenario = Scenario::Custom;
  LocationLaw location_law = LocationLaw::Uniform;
  Eigen::Index n = 5000;
  Eigen::Index n_t = 5000;
  CovarianceSpec true_spec{1.5, 0.169, 1.5, 0.27};
  std::vector<NamedSpec> imposed_specs;
  std::vector<std::string> knot_strategies{"sp"};
  std::vector<Eigen::Index> k_grid;
  int replicates = 20;
  std::uint64_t base_seed = 1;
  std::vector<double> tau_grid;       // nugget multipliers
  std::vector<Eigen::Index> n_grid;   // slope study training sizes

  bool include_full = true;
  ScoreTarget score_against = ScoreTarget::Latent;
  Tau2Mode tau2_mode = Tau2Mode::Known;
  Eigen::Index mle_subsample = 3000;
  Eigen::Index sweep_k = 484;         // knots per tau sweep predictor
  double slope_k_factor = 1.5;        // slope study: k = floor(factor * n^exponent)
  double slope_k_exponent = 2.0 / 2.9;
  double gamma_true = 2.9;            // for oversmoothed slope conversion
  int sp_restarts = 1;
  int sp_max_sweeps = 200;
  Eigen::Index dense_cap = kDefaultDenseCap;
  bool record_timings = false;

  /// Imposed specs, or {"true": true_spec} when none are given.
  std::vector<NamedSpec> effective_specs() const {
    if (!imposed_specs.empty()) return imposed_specs;
    return {{"true", true_spec}};
  }

  void validate() const {
    if (replicates < 1) throw ConfigError("replicates must be >= 1");
    if (n < 1 || n_t < 1) throw ConfigError("n and n_t must be >= 1");
    if (knot_strategies.empty() && !include_full) throw ConfigError("nothing to run: no knot_strategies and no full");
    for (const auto& s : knot_strategies) {
      const auto& all = harness_strategies();
      if (std::find(all.begin(), all.end(), s) == all.end()) {
        throw ConfigError("unknown knot strategy '" + s + "' (expected sp, rand, grid, spu, all)");
      }
    }
    std::map<std::string, int> labels;
    for (const auto& s : imposed_specs) {
      if (s.label.empty()) throw ConfigError("imposed_specs entries need a nonempty label");
      if (labels[s.label]++) throw ConfigError("duplicate imposed_specs label '" + s.label + "'");
    }
    for (auto k : k_grid)
      if (k < 1) throw ConfigError("k_grid entries must be >= 1");
    for (double m : tau_grid)
      if (!(m > 0.0 && std::isfinite(m))) throw ConfigError("tau_grid multipliers must be positive and finite");
    if (!std::is_sorted(n_grid.begin(), n_grid.end()) ||
        std::adjacent_find(n_grid.begin(), n_grid.end()) != n_grid.end()) {
      throw ConfigError("n_grid must be strictly ascending");
    }
    if (sp_restarts < 1 || sp_max_sweeps < 1) throw ConfigError("sp_restarts and sp_max_sweeps must be >= 1");
    if (mle_subsample < 10) throw ConfigError("mle_subsample must be >= 10");
    if (sweep_k < 1) throw ConfigError("sweep_k must be >= 1");
  }
};

/// Preset configurations: scenario1..scenario4, slope, tau-sweep.
inline ExperimentConfig preset(std::string_view name) {
  ExperimentConfig c;
  const CovarianceSpec strong(1.5, 0.169, 1.5, 0.27);
  const std::vector<Eigen::Index> strong_k = {36, 64, 100, 144, 196, 289, 400, 484};
  const auto smoothness_family = [](const CovarianceSpec& t) {
    return std::vector<NamedSpec>{{"true", t}, {"nu1.0", t.with_nu(1.0)}, {"nu3.0", t.with_nu(3.0)}};
  };
  c.true_spec = strong;
  c.k_grid = strong_k;
  c.knot_strategies = {"sp", "grid", "rand"};
  if (name == "scenario1") {
    c.scenario = Scenario::StrongCorr;
    c.imposed_specs = smoothness_family(strong);
  } else if (name == "scenario2") {
    c.scenario = Scenario::WeakCorr;
    c.true_spec = CovarianceSpec(1.5, 0.063, 1.5, 0.27);
    c.imposed_specs = smoothness_family(c.true_spec);
    c.k_grid = {289, 529, 729, 900, 1156, 1369, 1600, 1764};
  } else if (name == "scenario3") {
    c.scenario = Scenario::Consistency;
    c.imposed_specs = {{"tp", strong}, {"cp1", {1.0, 0.147, 1.5, 0.27}}, {"cp2", {2.0, 0.186, 1.5, 0.27}}};
  } else if (name == "scenario4") {
    c.scenario = Scenario::NonuniformFx;
    c.location_law = LocationLaw::Mixture;
    c.imposed_specs = {{"true", strong}};
    c.knot_strategies = {"sp", "spu", "grid", "rand"};
  } else if (name == "slope") {
    c.scenario = Scenario::StrongCorr;
    c.imposed_specs = smoothness_family(strong);
    c.knot_strategies = {"sp"};
    c.include_full = false;
    c.k_grid.clear();
    for (Eigen::Index n = 1000; n <= 7000; n += 500) c.n_grid.push_back(n);
  } else if (name == "tau-sweep") {
    c.scenario = Scenario::StrongCorr;
    c.imposed_specs = smoothness_family(strong);
    c.knot_strategies = {"sp"};
    c.include_full = false;
    c.k_grid.clear();
    for (double e : {-3.0, -2.0, -1.0, 0.0, 0.5, 1.0, 1.5, 2.0}) c.tau_grid.push_back(std::pow(10.0, e));
  } else {
    throw ConfigError("unknown preset '" + std::string(name) +
                      "' (expected scenario1, scenario2, scenario3, scenario4, slope, tau-sweep)");
  }
  return c;
}

struct ResultRow {
  std::string scenario;
  std::string method;  // "full" or a knot strategy
  std::string spec;    // imposed spec label
  Eigen::Index k = 0;  // 0 for full
  Eigen::Index n = 0;
  double tau_mult = 1.0;
  int replicate = 0;
  std::uint64_t seed = 0;
  double rmspe = 0.0;
  double mspe = 0.0;
  double energy = std::numeric_limits<double>::quiet_NaN();
  double fit_s = 0.0;
  double predict_s = 0.0;
};

struct Summary {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (n - 1)
  double se = 0.0;  // sd / sqrt(count)
};

inline Summary summarize(const std::vector<double>& v) {
  Summary s;
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    s.se = s.sd / std::sqrt(static_cast<double>(v.size()));
  }
  return s;
}

struct AggregateRow {
  std::string scenario;
  std::string method;
  std::string spec;
  Eigen::Index k = 0;
  Eigen::Index n = 0;
  double tau_mult = 1.0;
  int count = 0;
  Summary rmspe;
  Summary mspe;
  double energy = std::numeric_limits<double>::quiet_NaN();
  double fit_s = 0.0;
  double predict_s = 0.0;
};

struct SlopeFit {
  std::string method;
  std::string spec;
  SmoothnessRegime regime = SmoothnessRegime::True;
  LineFit line;
  double ns = 0.0;  // -slope
  double gamma_hat = std::numeric_limits<double>::quiet_NaN();  // NaN when ns is outside (0, 1)
};

inline std::string_view to_string(SmoothnessRegime r) {
  switch (r) {
    case SmoothnessRegime::True: return "true";
    case SmoothnessRegime::Undersmoothed: return "undersmoothed";
    case SmoothnessRegime::Oversmoothed: return "oversmoothed";
  }
  return "true";
}

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<SlopeFit> slopes;
  std::vector<NamedSpec> fitted_specs;  // real-data runs: the spec used per replicate
  bool record_timings = false;

  /// Groups rows by (scenario, method, spec, k, n, tau_mult) in order of
  /// first appearance.
  std::vector<AggregateRow> aggregate() const {
    using Key = std::tuple<std::string, std::string, std::string, Eigen::Index, Eigen::Index, double>;
    std::map<Key, std::size_t> index;
    std::vector<std::vector<const ResultRow*>> groups;
    for (const auto& r : rows) {
      auto [it, inserted] = index.try_emplace(Key{r.scenario, r.method, r.spec, r.k, r.n, r.tau_mult}, groups.size());
      if (inserted) groups.emplace_back();
      groups[it->second].push_back(&r);
    }
    std::vector<AggregateRow> out;
    out.reserve(groups.size());
    for (const auto& g : groups) {
      const ResultRow& f = *g.front();
      AggregateRow a{f.scenario, f.method, f.spec, f.k, f.n, f.tau_mult, static_cast<int>(g.size()), {}, {}};
      std::vector<double> rm, ms, en, fs, ps;
      for (const ResultRow* r : g) {
        rm.push_back(r->rmspe);
        ms.push_back(r->mspe);
        if (!std::isnan(r->energy)) en.push_back(r->energy);
        fs.push_back(r->fit_s);
        ps.push_back(r->predict_s);
      }
      a.rmspe = summarize(rm);
      a.mspe = summarize(ms);
      if (!en.empty()) a.energy = summarize(en).mean;
      a.fit_s = summarize(fs).mean;
      a.predict_s = summarize(ps).mean;
      out.push_back(std::move(a));
    }
    return out;
  }

  /// Aggregate for one cell; throws when absent.
  AggregateRow cell(std::string_view method, std::string_view spec, Eigen::Index k, Eigen::Index n = -1,
                    double tau_mult = std::numeric_limits<double>::quiet_NaN()) const {
    for (auto& a : aggregate()) {
      if (a.method == method && a.spec == spec && a.k == k && (n < 0 || a.n == n) &&
          (std::isnan(tau_mult) || a.tau_mult == tau_mult))
        return a;
    }
    throw DomainError("no result cell for method=" + std::string(method) + " spec=" + std::string(spec) +
                      " k=" + std::to_string(k));
  }

  void write_raw_csv(std::ostream& os) const {
    csv::Writer w(os);
    w.header({"scenario", "method", "spec", "k", "n", "tau_mult", "replicate", "seed", "rmspe", "mspe", "energy",
              "fit_s", "predict_s"});
    for (const auto& r : rows) {
      w.field(r.scenario).field(r.method).field(r.spec).field(static_cast<long long>(r.k));
      w.field(static_cast<long long>(r.n)).field(r.tau_mult).field(r.replicate);
      w.field(static_cast<unsigned long long>(r.seed)).field(r.rmspe).field(r.mspe);
      energy_field(w, r.energy);
      timing_fields(w, r.fit_s, r.predict_s);
      w.end_row();
    }
  }

  void write_agg_csv(std::ostream& os) const {
    csv::Writer w(os);
    w.header({"scenario", "method", "spec", "k", "n", "tau_mult", "replicates", "rmspe_mean", "rmspe_sd", "rmspe_se",
              "mspe_mean", "mspe_sd", "mspe_se", "energy_mean", "fit_s_mean", "predict_s_mean"});
    for (const auto& a : aggregate()) {
      w.field(a.scenario).field(a.method).field(a.spec).field(static_cast<long long>(a.k));
      w.field(static_cast<long long>(a.n)).field(a.tau_mult).field(a.count);
      w.field(a.rmspe.mean).field(a.rmspe.sd).field(a.rmspe.se);
      w.field(a.mspe.mean).field(a.mspe.sd).field(a.mspe.se);
      energy_field(w, a.energy);
      timing_fields(w, a.fit_s, a.predict_s);
      w.end_row();
    }
  }

  void write_slopes_csv(std::ostream& os) const {
    csv::Writer w(os);
    w.header({"method", "spec", "regime", "slope", "intercept", "r2", "ns", "gamma_hat"});
    for (const auto& s : slopes) {
      w.field(s.method).field(s.spec).field(to_string(s.regime)).field(s.line.slope).field(s.line.intercept);
      w.field(s.line.r2).field(s.ns);
      if (std::isnan(s.gamma_hat))
        w.field(std::string_view{});
      else
        w.field(s.gamma_hat);
      w.end_row();
    }
  }

 private:
  static void energy_field(csv::Writer& w, double e) {
    if (std::isnan(e))
      w.field(std::string_view{});
    else
      w.field(e);
  }
  void timing_fields(csv::Writer& w, double fit, double pred) const {
    if (record_timings) {
      w.field(fit).field(pred);
    } else {
      w.field(std::string_view{}).field(std::string_view{});
    }
  }
};

using ProgressFn = std::function<void(const std::string&)>;

namespace detail {

enum StreamTag : std::uint64_t {
  kLocationStream = 1,
  kFieldStream = 2,
  kSplitStream = 3,
  kNoiseStream = 4,
  kKnotStream = 5,
  kTestNoiseStream = 6,
  kMleStream = 7,
};

inline std::uint64_t replicate_seed(std::uint64_t base_seed, int replicate) {
  return mix64(base_seed + static_cast<std::uint64_t>(replicate));
}

inline std::uint64_t strategy_code(const std::string& s) {
  const auto& all = harness_strategies();
  return static_cast<std::uint64_t>(std::find(all.begin(), all.end(), s) - all.begin()) + 1;
}

inline std::uint64_t knot_seed(std::uint64_t rep_seed, const std::string& strategy, Eigen::Index k) {
  return derive_seed(derive_seed(rep_seed, kKnotStream), strategy_code(strategy) * 1000003ULL +
                                                             static_cast<std::uint64_t>(k));
}

inline void progress(const ProgressFn& fn, const std::string& msg) {
  if (fn) fn(msg);
}

}  // namespace detail

/// n locations from the given law on [0,1]^2.
inline PointSet draw_locations(LocationLaw law, Eigen::Index n, std::uint64_t seed) {
  if (law == LocationLaw::Uniform) return uniform_points(n, 2, seed);
  CounterRng rng(seed);
  PointSet::Matrix m(n, 2);
  const Eigen::Index dense = static_cast<Eigen::Index>(std::llround(0.75 * static_cast<double>(n)));
  static constexpr double offsets[3][2] = {{0.5, 0.0}, {0.0, 0.5}, {0.5, 0.5}};
  for (Eigen::Index i = 0; i < n; ++i) {
    double ox = 0.0, oy = 0.0;
    if (i >= dense) {
      const auto q = rng.below(3);
      ox = offsets[q][0];
      oy = offsets[q][1];
    }
    m(i, 0) = ox + 0.5 * rng.uniform();
    m(i, 1) = oy + 0.5 * rng.uniform();
  }
  return PointSet(std::move(m));
}

/// One simulated replicate: noisy training data plus test locations with
/// their latent and observed values.
struct Replicate {
  Dataset train;
  PointSet test;
  Eigen::VectorXd test_latent;
  Eigen::VectorXd test_observed;
  std::uint64_t seed = 0;

  const Eigen::VectorXd& truth(ScoreTarget t) const {
    return t == ScoreTarget::Latent ? test_latent : test_observed;
  }
};

/// Draws n + n_t locations, one joint GP realization, a random split, and
/// N(0, tau2) noise on the training part.
inline Replicate simulate_replicate(const ExperimentConfig& cfg, Eigen::Index n, std::uint64_t rep_seed,
                                    const Parallelism& par = {}) {
  using namespace detail;
  const Eigen::Index total = n + cfg.n_t;
  const PointSet locs = draw_locations(cfg.location_law, total, derive_seed(rep_seed, kLocationStream));
  const Dataset field = sample_gp(locs, cfg.true_spec, derive_seed(rep_seed, kFieldStream), cfg.dense_cap, par);
  const auto perm = sample_without_replacement(total, total, derive_seed(rep_seed, kSplitStream));
  const std::vector<Eigen::Index> train_idx(perm.begin(), perm.begin() + n);
  const std::vector<Eigen::Index> test_idx(perm.begin() + n, perm.end());
  const Dataset test = field.select(test_idx);
  Replicate r{add_noise(field.select(train_idx), cfg.true_spec.tau2(), derive_seed(rep_seed, kNoiseStream)),
              test.locations(), test.values(),
              add_noise(test, cfg.true_spec.tau2(), derive_seed(rep_seed, kTestNoiseStream)).values(), rep_seed};
  return r;
}

/// Builds knots for a harness strategy from the training locations.
inline KnotSet make_knots(const std::string& strategy, const PointSet& train, Eigen::Index k, std::uint64_t seed,
                          const ExperimentConfig& cfg, const Box& grid_box, const Parallelism& par = {}) {
  SpOptions sp;
  sp.restarts = cfg.sp_restarts;
  sp.max_sweeps = cfg.sp_max_sweeps;
  sp.compute_energy = false;
  if (strategy == "sp") return support_points(train, k, seed, sp, par);
  if (strategy == "rand") {
    return {train.select(detail::sample_without_replacement(train.size(), k, seed)), KnotStrategy::RandomSubsample,
            std::nullopt};
  }
  if (strategy == "grid") return grid_knots(grid_box, k);
  if (strategy == "spu") {
    KnotSet ks = support_points(uniform_points(train.size(), train.dim(), derive_seed(seed, 1)), k, seed, sp, par);
    ks.strategy = KnotStrategy::External;
    return ks;
  }
  if (strategy == "all") return {train, KnotStrategy::External, std::nullopt};
  throw ConfigError("unknown knot strategy '" + strategy + "'");
}

namespace detail {

inline void check_runnable(const ExperimentConfig& cfg, const std::vector<Eigen::Index>& ks, Eigen::Index n) {
  if (n + cfg.n_t > cfg.dense_cap) {
    throw ConfigError("n + n_t = " + std::to_string(n + cfg.n_t) + " exceeds the dense cap " +
                      std::to_string(cfg.dense_cap) + " (raise it with --dense-cap)");
  }
  if (cfg.include_full && n > cfg.dense_cap) throw ConfigError("full predictor needs n <= dense cap");
  for (const auto& s : cfg.knot_strategies) {
    for (auto k : ks) {
      if (s == "grid") (void)grid_knots(Box::unit(2), k);
      if ((s == "rand" || s == "sp" || s == "spu") && k > n) {
        throw ConfigError("k = " + std::to_string(k) + " exceeds the training size " + std::to_string(n) +
                          " for strategy " + s);
      }
    }
  }
  for (const auto& ns : cfg.effective_specs()) {
    if (!cfg.knot_strategies.empty() && !(ns.spec.tau2() > 0.0)) {
      throw ConfigError("imposed spec '" + ns.label + "' needs tau2 > 0 for low-rank prediction");
    }
  }
}

/// Imposed specs for one replicate, with tau2 re-estimated when requested.
inline std::vector<NamedSpec> replicate_specs(const ExperimentConfig& cfg, const Dataset& train,
                                              std::uint64_t rep_seed, const Parallelism& par) {
  std::vector<NamedSpec> specs = cfg.effective_specs();
  if (cfg.tau2_mode == Tau2Mode::Known) return specs;
  const Eigen::Index m = std::min(train.size(), cfg.mle_subsample);
  const Dataset sub = train.select(sample_without_replacement(train.size(), m, derive_seed(rep_seed, kMleStream)));
  ParameterMask mask = ParameterMask::none();
  mask.tau2 = true;
  for (auto& s : specs) s.spec = fit_mle(sub, s.spec, mask, {}, cfg.dense_cap, par).spec;
  return specs;
}

struct CellRunner {
  const ExperimentConfig& cfg;
  const Replicate& rep;
  std::string scenario;
  Eigen::Index n;
  int replicate;
  const Parallelism& par;
  std::vector<ResultRow>& out;

  void record(const std::string& method, const std::string& spec, Eigen::Index k, double tau_mult,
              const Predictor& p, double energy) {
    const PredictionReport r = evaluate(p, rep.test, rep.truth(cfg.score_against), par);
    out.push_back({scenario, method, spec, k, n, tau_mult, replicate, rep.seed, r.rmspe, r.mspe, energy,
                   cfg.record_timings ? r.wall_time_fit : 0.0, cfg.record_timings ? r.wall_time_predict : 0.0});
  }
};

// One replicate of the k-grid protocol: rows ordered by (spec, full, strategy, k).
inline void run_replicate_cells(const ExperimentConfig& cfg, const Replicate& rep, const std::vector<Eigen::Index>& ks,
                                Eigen::Index n, int replicate, const Parallelism& par, std::vector<ResultRow>& out,
                                const ProgressFn& log) {
  const EnergyReference reference(rep.train.locations(), par);
  const Box box = Box::unit(2);
  std::vector<std::pair<std::string, KnotSet>> knots;
  for (const auto& s : cfg.knot_strategies) {
    for (auto k : ks) {
      KnotSet ks_ = make_knots(s, rep.train.locations(), k, knot_seed(rep.seed, s, k), cfg, box, par);
      ks_.energy_to_data = reference.energy_to(ks_.points);
      knots.emplace_back(s, std::move(ks_));
    }
  }
  const auto specs = replicate_specs(cfg, rep.train, rep.seed, par);
  CellRunner runner{cfg, rep, std::string(to_string(cfg.scenario)), n, replicate, par, out};
  for (const auto& ns : specs) {
    if (cfg.include_full) {
      progress(log, "replicate " + std::to_string(replicate) + " spec " + ns.label + ": full");
      runner.record("full", ns.label, 0, 1.0, fit_full(rep.train, ns.spec, par, cfg.dense_cap),
                    std::numeric_limits<double>::quiet_NaN());
    }
    for (const auto& [s, ks_] : knots) {
      runner.record(s, ns.label, ks_.k(), 1.0, fit_lowrank(rep.train, ns.spec, ks_, par), *ks_.energy_to_data);
    }
  }
}

}  // namespace detail

/// RMSPE-vs-k study: per replicate, one simulated dataset shared by every
/// (imposed spec, strategy, k) cell, scored against the latent field.
inline ExperimentResult run_scenario(const ExperimentConfig& cfg, const Parallelism& par = {},
                                     const ProgressFn& log = {}) {
  cfg.validate();
  if (cfg.k_grid.empty() && !cfg.knot_strategies.empty()) throw ConfigError("k_grid must be nonempty");
  detail::check_runnable(cfg, cfg.k_grid, cfg.n);
  ExperimentResult res;
  res.record_timings = cfg.record_timings;
  for (int r = 0; r < cfg.replicates; ++r) {
    detail::progress(log, "replicate " + std::to_string(r + 1) + "/" + std::to_string(cfg.replicates));
    const Replicate rep = simulate_replicate(cfg, cfg.n, detail::replicate_seed(cfg.base_seed, r), par);
    detail::run_replicate_cells(cfg, rep, cfg.k_grid, cfg.n, r, par, res.rows, log);
  }
  return res;
}

/// Regime of an imposed smoothness relative to the generating one.
inline SmoothnessRegime regime_of(const CovarianceSpec& imposed, const CovarianceSpec& truth) {
  if (std::abs(imposed.nu() - truth.nu()) < 1e-12) return SmoothnessRegime::True;
  return imposed.nu() < truth.nu() ? SmoothnessRegime::Undersmoothed : SmoothnessRegime::Oversmoothed;
}

/// Fits log(mean mspe) against log(n) for every (method, spec) present in
/// `result`, in order of first appearance.
inline std::vector<SlopeFit> fit_slopes(const ExperimentResult& result, const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> keys;
  std::map<std::pair<std::string, std::string>, std::vector<std::pair<double, double>>> pairs;
  for (const auto& a : result.aggregate()) {
    const auto key = std::make_pair(a.method, a.spec);
    if (!pairs.count(key)) keys.push_back(key);
    pairs[key].emplace_back(static_cast<double>(a.n), a.mspe.mean);
  }
  const auto specs = cfg.effective_specs();
  std::vector<SlopeFit> out;
  for (const auto& key : keys) {
    SlopeFit f;
    f.method = key.first;
    f.spec = key.second;
    for (const auto& s : specs)
      if (s.label == f.spec) f.regime = regime_of(s.spec, cfg.true_spec);
    f.line = fit_rate_line(pairs[key]);
    f.ns = -f.line.slope;
    if (f.ns > 0.0 && f.ns < 1.0) f.gamma_hat = slope_to_gamma(f.ns, f.regime, cfg.gamma_true);
    out.push_back(std::move(f));
  }
  return out;
}

/// Number of knots the slope study uses at training size n.
inline Eigen::Index slope_study_k(const ExperimentConfig& cfg, Eigen::Index n) {
  return static_cast<Eigen::Index>(
      std::floor(cfg.slope_k_factor * std::pow(static_cast<double>(n), cfg.slope_k_exponent)));
}

/// Log-MSPE slope study over cfg.n_grid with k = floor(factor * n^exponent).
inline ExperimentResult run_slope_study(const ExperimentConfig& cfg, const Parallelism& par = {},
                                        const ProgressFn& log = {}) {
  cfg.validate();
  if (cfg.n_grid.size() < 4) throw ConfigError("n_grid needs at least 4 ascending values");
  for (auto n : cfg.n_grid) detail::check_runnable(cfg, {slope_study_k(cfg, n)}, n);
  ExperimentResult res;
  res.record_timings = cfg.record_timings;
  for (auto n : cfg.n_grid) {
    const std::vector<Eigen::Index> ks = {slope_study_k(cfg, n)};
    const std::uint64_t n_seed = derive_seed(cfg.base_seed, static_cast<std::uint64_t>(n));
    for (int r = 0; r < cfg.replicates; ++r) {
      detail::progress(log, "n " + std::to_string(n) + " replicate " + std::to_string(r + 1) + "/" +
                                std::to_string(cfg.replicates));
      const Replicate rep = simulate_replicate(cfg, n, detail::replicate_seed(n_seed, r), par);
      detail::run_replicate_cells(cfg, rep, ks, n, r, par, res.rows, log);
    }
  }
  res.slopes = fit_slopes(res, cfg);
  return res;
}

/// Nugget sweep: per replicate and imposed spec, one low-rank predictor per
/// strategy on cfg.sweep_k knots, refit with tau2 = multiplier * spec.tau2.
inline ExperimentResult run_tau_sweep(const ExperimentConfig& cfg, const Parallelism& par = {},
                                      const ProgressFn& log = {}) {
  cfg.validate();
  if (cfg.tau_grid.empty()) throw ConfigError("tau_grid must be nonempty for a tau sweep");
  if (cfg.knot_strategies.empty()) throw ConfigError("knot_strategies must be nonempty for a tau sweep");
  ExperimentConfig base = cfg;
  base.include_full = false;
  detail::check_runnable(base, {cfg.sweep_k}, cfg.n);
  ExperimentResult res;
  res.record_timings = cfg.record_timings;
  const Box box = Box::unit(2);
  for (int r = 0; r < cfg.replicates; ++r) {
    detail::progress(log, "replicate " + std::to_string(r + 1) + "/" + std::to_string(cfg.replicates));
    const Replicate rep = simulate_replicate(cfg, cfg.n, detail::replicate_seed(cfg.base_seed, r), par);
    const EnergyReference reference(rep.train.locations(), par);
    detail::CellRunner runner{cfg, rep, std::string(to_string(cfg.scenario)), cfg.n, r, par, res.rows};
    std::vector<std::pair<std::string, KnotSet>> knots;
    for (const auto& s : cfg.knot_strategies) {
      KnotSet ks = make_knots(s, rep.train.locations(), cfg.sweep_k, detail::knot_seed(rep.seed, s, cfg.sweep_k),
                              cfg, box, par);
      ks.energy_to_data = reference.energy_to(ks.points);
      knots.emplace_back(s, std::move(ks));
    }
    for (const auto& ns : detail::replicate_specs(cfg, rep.train, rep.seed, par)) {
      for (const auto& [s, ks] : knots) {
        const Predictor base_fit = fit_lowrank(rep.train, ns.spec, ks, par);
        for (double m : cfg.tau_grid) {
          runner.record(s, ns.label, ks.k(), m, base_fit.with_tau2(m * ns.spec.tau2(), par), *ks.energy_to_data);
        }
      }
    }
  }
  return res;
}

enum class SpecSource { Given, Mle };

inline std::string_view to_string(SpecSource s) { return s == SpecSource::Given ? "given" : "mle"; }

inline SpecSource spec_source_from_string(std::string_view s) {
  if (s == "given") return SpecSource::Given;
  if (s == "mle") return SpecSource::Mle;
  throw ConfigError("unknown spec_source '" + std::string(s) + "' (expected given, mle)");
}

struct RealDataConfig {
  std::string train_csv;
  std::optional<std::string> test_csv;
  double test_fraction = 0.2;
  SpecSource spec_source = SpecSource::Mle;
  CovarianceSpec spec{1.0, 0.1, 1.5, 0.1};  // used as-is (given) or as the MLE start
  ParameterMask mle_free{};
  Eigen::Index mle_subsample = 3000;
  std::vector<std::string> knot_strategies{"sp"};
  std::vector<Eigen::Index> k_grid;
  int replicates = 1;
  std::uint64_t base_seed = 1;
  bool include_full = true;
  int sp_restarts = 1;
  int sp_max_sweeps = 200;
  Eigen::Index dense_cap = kDefaultDenseCap;
  bool record_timings = false;

  void validate() const {
    if (train_csv.empty()) throw ConfigError("train_csv is required");
    if (!test_csv && !(test_fraction > 0.0 && test_fraction < 1.0)) {
      throw ConfigError("test_fraction must lie in (0, 1)");
    }
    if (replicates < 1) throw ConfigError("replicates must be >= 1");
    if (mle_subsample < 10) throw ConfigError("mle_subsample must be >= 10");
    if (k_grid.empty() && !knot_strategies.empty()) throw ConfigError("k_grid must be nonempty");
    for (const auto& s : knot_strategies) {
      if (s == "spu") throw ConfigError("strategy spu applies to simulations on the unit square only");
      const auto& all = harness_strategies();
      if (std::find(all.begin(), all.end(), s) == all.end()) {
        throw ConfigError("unknown knot strategy '" + s + "' (expected sp, rand, grid, all)");
      }
    }
    if (knot_strategies.empty() && !include_full) throw ConfigError("nothing to run: no knot_strategies and no full");
  }
};

/// Real-data pipeline on in-memory data: split (unless a test set is given),
/// spec from the config or an MLE on a subsample of the training part,
/// knots from the training locations, scores against held-out y.
inline ExperimentResult run_realdata(const RealDataConfig& cfg, const Dataset& data,
                                     const std::optional<Dataset>& test_data = std::nullopt,
                                     const Parallelism& par = {}, const ProgressFn& log = {}) {
  cfg.validate();
  using namespace detail;
  ExperimentResult res;
  res.record_timings = cfg.record_timings;
  ExperimentConfig knot_cfg;
  knot_cfg.sp_restarts = cfg.sp_restarts;
  knot_cfg.sp_max_sweeps = cfg.sp_max_sweeps;
  knot_cfg.score_against = ScoreTarget::Observed;
  knot_cfg.record_timings = cfg.record_timings;
  knot_cfg.dense_cap = cfg.dense_cap;

  for (int r = 0; r < cfg.replicates; ++r) {
    const std::uint64_t rep_seed = replicate_seed(cfg.base_seed, r);
    std::optional<Dataset> train, test;
    if (test_data) {
      train = data;
      test = *test_data;
    } else {
      const Eigen::Index total = data.size();
      const auto n_test = static_cast<Eigen::Index>(std::llround(cfg.test_fraction * static_cast<double>(total)));
      if (n_test < 1 || n_test >= total) throw ConfigError("test_fraction leaves an empty train or test set");
      const auto perm = sample_without_replacement(total, total, derive_seed(rep_seed, kSplitStream));
      train = data.select(std::vector<Eigen::Index>(perm.begin(), perm.begin() + (total - n_test)));
      test = data.select(std::vector<Eigen::Index>(perm.begin() + (total - n_test), perm.end()));
    }
    if (cfg.include_full) require_dense_cap(train->size(), cfg.dense_cap, "run_realdata (full)");
    for (const auto& s : cfg.knot_strategies)
      for (auto k : cfg.k_grid)
        if (s == "rand" && k > train->size()) throw ConfigError("k exceeds the training size for strategy rand");

    CovarianceSpec spec = cfg.spec;
    if (cfg.spec_source == SpecSource::Mle) {
      progress(log, "replicate " + std::to_string(r + 1) + ": MLE");
      const Eigen::Index m = std::min(train->size(), cfg.mle_subsample);
      const Dataset sub =
          train->select(sample_without_replacement(train->size(), m, derive_seed(rep_seed, kMleStream)));
      spec = fit_mle(sub, cfg.spec, cfg.mle_free, {}, cfg.dense_cap, par).spec;
    }
    res.fitted_specs.push_back({"replicate" + std::to_string(r), spec});

    Replicate rep{*train, test->locations(), test->values(), test->values(), rep_seed};
    CellRunner runner{knot_cfg, rep, "realdata", train->size(), r, par, res.rows};
    if (cfg.include_full) {
      progress(log, "replicate " + std::to_string(r + 1) + ": full");
      runner.record("full", "fitted", 0, 1.0, fit_full(*train, spec, par, cfg.dense_cap),
                    std::numeric_limits<double>::quiet_NaN());
    }
    const EnergyReference reference(train->locations(), par);
    const Box box = Box::bounding(train->locations());
    for (const auto& s : cfg.knot_strategies) {
      for (auto k : cfg.k_grid) {
        const Eigen::Index kk = s == "all" ? train->size() : k;
        progress(log, "replicate " + std::to_string(r + 1) + ": " + s + " k=" + std::to_string(kk));
        KnotSet ks = make_knots(s, train->locations(), kk, knot_seed(rep_seed, s, kk), knot_cfg, box, par);
        ks.energy_to_data = reference.energy_to(ks.points);
        runner.record(s, "fitted", kk, 1.0, fit_lowrank(*train, spec, ks, par), *ks.energy_to_data);
        if (s == "all") break;
      }
    }
  }
  return res;
}

/// File-based entry point: reads train_csv (and test_csv when set).
inline ExperimentResult run_realdata(const RealDataConfig& cfg, const Parallelism& par = {},
                                     const ProgressFn& log = {}) {
  cfg.validate();
  const Dataset data = csv::ingest_csv(cfg.train_csv).dataset();
  std::optional<Dataset> test;
  if (cfg.test_csv) test = csv::ingest_csv(*cfg.test_csv).dataset();
  return run_realdata(cfg, data, test, par, log);
}

}  // namespace lowrank_gp
