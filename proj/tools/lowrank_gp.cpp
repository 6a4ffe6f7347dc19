// lowrank-gp: command-line front end for the lowrank_gp library.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lowrank_gp/config.hpp"
#include "lowrank_gp/lowrank_gp.hpp"

namespace fs = std::filesystem;
using namespace lowrank_gp;
using config::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string out_dir = ".";
  bool quiet = false;
};

/// One `--flag` per config key, carried as text until the key's JSON type is known.
struct KeyFlags {
  json defaults;
  std::map<std::string, std::string> text;
  std::vector<std::pair<std::string, CLI::Option*>> options;

  void attach(CLI::App* app, const std::map<std::string, std::string>& help) {
    for (const auto& [key, value] : defaults.items()) {
      std::string flag = "--" + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      const auto h = help.find(key);
      std::string desc = (h != help.end() ? h->second + " " : std::string()) + "[key: " + key + "]";
      options.emplace_back(key, app->add_option(flag, text[key], desc)->type_name(type_name(value)));
    }
  }

  static std::string type_name(const json& v) {
    if (v.is_array()) return "LIST";
    if (v.is_object()) return "JSON";
    if (v.is_boolean()) return "BOOL";
    if (v.is_number_float()) return "FLOAT";
    if (v.is_number()) return "INT";
    return "TEXT";
  }

  json overrides() const {
    json out = json::object();
    for (const auto& [key, opt] : options) {
      if (opt->count() == 0) continue;
      out[key] = convert(key, text.at(key), defaults.at(key));
    }
    return out;
  }

  static json scalar(const std::string& s) {
    try {
      return json::parse(s);
    } catch (const json::parse_error&) {
      return json(s);
    }
  }

  static json convert(const std::string& key, const std::string& s, const json& like) {
    if (like.is_string() || like.is_null()) return json(s);
    if (like.is_array()) {
      if (!s.empty() && s.front() == '[') return parse_or_fail(key, s);
      json arr = json::array();
      std::stringstream ss(s);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (!item.empty()) arr.push_back(scalar(item));
      }
      return arr;
    }
    if (like.is_object()) return parse_or_fail(key, s);
    return scalar(s);
  }

  static json parse_or_fail(const std::string& key, const std::string& s) {
    try {
      return json::parse(s);
    } catch (const json::parse_error& e) {
      throw ConfigError("--" + key + ": not valid JSON: " + e.what());
    }
  }
};

void add_common(CLI::App* app, Common& c) {
  app->footer("LIST values are comma separated (1,2,3) or a JSON array; JSON values are JSON objects.");
  app->add_option("--config", c.config_path, "JSON config file (a run.json from a previous run also works)");
  app->add_option("--seed", c.seed, "master seed; required here or as a config key");
  app->add_option("--threads", c.threads, "worker threads (default: LOWRANK_GP_THREADS, else all cores)")
      ->check(CLI::PositiveNumber);
  app->add_option("--out-dir", c.out_dir, "output directory")->capture_default_str();
  app->add_flag("--quiet,-q", c.quiet, "no progress messages");
}

/// Config file contents (unwrapping a run.json record) merged with flag overrides.
json merged_config(const Common& c, const KeyFlags& flags, const std::string& subcommand,
                   const std::string& seed_key) {
  json j = json::object();
  if (!c.config_path.empty()) {
    j = config::load_json(c.config_path);
    if (j.is_object() && j.contains("tool") && j.contains("config")) {
      if (j.value("subcommand", subcommand) != subcommand) {
        throw ConfigError("run record '" + c.config_path + "' belongs to subcommand '" +
                          j["subcommand"].get<std::string>() + "'");
      }
      j = json(j["config"]);
    }
    if (!j.is_object()) throw ConfigError("config '" + c.config_path + "': expected a JSON object");
  }
  const json over = flags.overrides();
  for (const auto& [k, v] : over.items()) j[k] = v;
  if (c.seed) j[seed_key] = *c.seed;
  if (!j.contains(seed_key)) {
    throw ConfigError("a seed is required: pass --seed or set \"" + seed_key + "\" in the config");
  }
  return j;
}

Parallelism parallelism(const Common& c) { return c.threads ? Parallelism{*c.threads} : Parallelism::from_env(); }

ProgressFn progress(const Common& c) {
  if (c.quiet) return {};
  return [](const std::string& msg) { std::cerr << "[lowrank-gp] " << msg << '\n'; };
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Collects output files and writes them plus run.json at the end.
class Run {
 public:
  Run(std::string subcommand, const Common& common)
      : subcommand_(std::move(subcommand)), common_(common), t0_(std::chrono::steady_clock::now()) {}

  void set_config(json cfg) { config_ = std::move(cfg); }
  void set_seeds(json seeds) { seeds_ = std::move(seeds); }
  void note(const std::string& key, json value) { extra_[key] = std::move(value); }

  void add_output(const fs::path& path, std::string contents) { outputs_.emplace_back(path, std::move(contents)); }

  fs::path in_out_dir(const std::string& name) const { return fs::path(common_.out_dir) / name; }

  void finish(int exit_code, const std::string& error = {}) {
    fs::create_directories(common_.out_dir);
    json files = json::array();
    if (exit_code == kExitOk) {
      for (const auto& [path, contents] : outputs_) {
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::binary);
        out << contents;
        if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
        files.push_back(path.string());
      }
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    json rec = {{"tool", "lowrank-gp"},
                {"subcommand", subcommand_},
                {"status", exit_code == kExitOk ? "ok" : "error"},
                {"exit_code", exit_code}};
    if (!error.empty()) rec["error"] = error;
    rec["config"] = config_;
    rec["config_hash"] = "fnv1a64:" + hex64(config::fnv1a(config_.dump()));
    rec["seeds"] = seeds_;
    rec["versions"] = {{"lowrank_gp", LOWRANK_GP_VERSION},
                       {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                     "." + std::to_string(EIGEN_MINOR_VERSION)},
                       {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                             std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                             std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                       {"cli11", CLI11_VERSION},
                       {"compiler", __VERSION__}};
    rec["threads"] = parallelism(common_).threads;
    rec["outputs"] = files;
    for (const auto& [k, v] : extra_.items()) rec[k] = v;
    rec["wall_time_s"] = wall;
    std::ofstream(in_out_dir("run.json")) << rec.dump(2) << '\n';
  }

 private:
  std::string subcommand_;
  const Common& common_;
  std::chrono::steady_clock::time_point t0_;
  json config_ = json::object();
  json seeds_ = json::object();
  json extra_ = json::object();
  std::vector<std::pair<fs::path, std::string>> outputs_;
};

CovarianceSpec checked_spec(const std::string& where, double sigma2, double psi, double nu, double tau2) {
  try {
    return {sigma2, psi, nu, tau2};
  } catch (const DomainError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

// sp ------------------------------------------------------------------------

struct SpConfig {
  std::string input;
  Eigen::Index k = 0;
  std::uint64_t seed = 0;
  std::string out;
  int restarts = 1;
  int max_sweeps = 200;
  Eigen::Index max_data = 20000;
};

json to_json(const SpConfig& c) {
  return {{"input", c.input}, {"k", c.k},           {"seed", c.seed},          {"out", c.out},
          {"restarts", c.restarts}, {"max_sweeps", c.max_sweeps}, {"max_data", c.max_data}};
}

SpConfig sp_from_json(const json& j) {
  const std::string w = "config";
  config::detail::reject_unknown(j, {"input", "k", "seed", "out", "restarts", "max_sweeps", "max_data"}, w);
  SpConfig c;
  config::detail::read(j, "input", c.input, w);
  config::detail::read(j, "k", c.k, w);
  config::detail::read(j, "seed", c.seed, w);
  config::detail::read(j, "out", c.out, w);
  config::detail::read(j, "restarts", c.restarts, w);
  config::detail::read(j, "max_sweeps", c.max_sweeps, w);
  config::detail::read(j, "max_data", c.max_data, w);
  if (c.input.empty()) throw ConfigError("sp: --input is required");
  if (c.k < 1) throw ConfigError("sp: --k must be >= 1");
  if (c.restarts < 1 || c.max_sweeps < 1 || c.max_data < 1) {
    throw ConfigError("sp: restarts, max_sweeps and max_data must be >= 1");
  }
  return c;
}

void warn_duplicates(const csv::Table& t, const std::string& path) {
  if (t.duplicate_locations > 0) {
    std::cerr << "warning: " << path << ": " << t.duplicate_locations << " duplicate location(s)\n";
  }
}

void run_sp(const json& j, const Common& common, Run& run) {
  const SpConfig c = sp_from_json(j);
  run.set_config(to_json(c));
  run.set_seeds({{"seed", c.seed}});
  const csv::Table table = csv::ingest_csv(c.input);
  warn_duplicates(table, c.input);
  SpOptions opts;
  opts.restarts = c.restarts;
  opts.max_sweeps = c.max_sweeps;
  opts.max_data = c.max_data;
  const KnotSet ks = support_points(table.locations, c.k, c.seed, opts, parallelism(common));
  std::ostringstream os;
  csv::write_knots(os, ks, c.seed);
  run.add_output(c.out.empty() ? run.in_out_dir("knots.csv") : fs::path(c.out), os.str());
  run.note("energy_to_data", *ks.energy_to_data);
  run.note("sweeps", ks.sweeps);
  run.note("converged", ks.converged);
  std::cout << "k=" << ks.k() << " energy=" << csv::format_double(*ks.energy_to_data) << " sweeps=" << ks.sweeps
            << " converged=" << (ks.converged ? "true" : "false") << '\n';
}

// gamma ---------------------------------------------------------------------

struct GammaConfig {
  double sigma2 = 1.0;
  double psi = 0.169;
  double nu = 1.5;
  Eigen::Index n0 = 2000;
  std::uint64_t seed = 0;
  int seeds = 1;
};

json to_json(const GammaConfig& c) {
  return {{"sigma2", c.sigma2}, {"psi", c.psi}, {"nu", c.nu}, {"n0", c.n0}, {"seed", c.seed}, {"seeds", c.seeds}};
}

GammaConfig gamma_from_json(const json& j) {
  const std::string w = "config";
  config::detail::reject_unknown(j, {"sigma2", "psi", "nu", "n0", "seed", "seeds"}, w);
  GammaConfig c;
  config::detail::read(j, "sigma2", c.sigma2, w);
  config::detail::read(j, "psi", c.psi, w);
  config::detail::read(j, "nu", c.nu, w);
  config::detail::read(j, "n0", c.n0, w);
  config::detail::read(j, "seed", c.seed, w);
  config::detail::read(j, "seeds", c.seeds, w);
  if (c.seeds < 1) throw ConfigError("gamma: --seeds must be >= 1");
  return c;
}

void run_gamma(const json& j, const Common& common, Run& run) {
  const GammaConfig c = gamma_from_json(j);
  run.set_config(to_json(c));
  const CovarianceSpec spec = checked_spec("gamma", c.sigma2, c.psi, c.nu, 0.0);
  json seeds = json::array();
  std::ostringstream os;
  write_gamma_header(os);
  double sum = 0.0;
  const auto log = progress(common);
  for (int s = 0; s < c.seeds; ++s) {
    const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(s);
    seeds.push_back(seed);
    if (log) log("gamma seed " + std::to_string(seed));
    const GammaEstimate g = estimate_gamma(spec, c.n0, seed, parallelism(common));
    write_gamma_row(os, g);
    sum += g.gamma;
  }
  const double mean = sum / c.seeds;
  run.set_seeds({{"seed", c.seed}, {"per_estimate", seeds}});
  run.note("gamma_mean", mean);
  run.add_output(run.in_out_dir("gamma.csv"), os.str());
  std::cout << "gamma = " << csv::format_double(mean);
  if (c.seeds > 1) std::cout << " (mean of " << c.seeds << " seeds)";
  std::cout << '\n';
}

// predict -------------------------------------------------------------------

struct PredictConfig {
  std::string train;
  std::string test;
  double sigma2 = 1.0;
  double psi = 0.1;
  double nu = 1.5;
  double tau2 = 0.1;
  std::string method = "lowrank";
  std::string strategy = "sp";
  Eigen::Index k = 100;
  std::string knots;
  std::uint64_t seed = 0;
  std::string out;
  Eigen::Index dense_cap = kDefaultDenseCap;
};

json to_json(const PredictConfig& c) {
  return {{"train", c.train},   {"test", c.test},       {"sigma2", c.sigma2},       {"psi", c.psi},
          {"nu", c.nu},         {"tau2", c.tau2},       {"method", c.method},       {"strategy", c.strategy},
          {"k", c.k},           {"knots", c.knots},     {"seed", c.seed},           {"out", c.out},
          {"dense_cap", c.dense_cap}};
}

PredictConfig predict_from_json(const json& j) {
  const std::string w = "config";
  config::detail::reject_unknown(j, {"train", "test", "sigma2", "psi", "nu", "tau2", "method", "strategy", "k",
                                     "knots", "seed", "out", "dense_cap"},
                                 w);
  PredictConfig c;
  config::detail::read(j, "train", c.train, w);
  config::detail::read(j, "test", c.test, w);
  config::detail::read(j, "sigma2", c.sigma2, w);
  config::detail::read(j, "psi", c.psi, w);
  config::detail::read(j, "nu", c.nu, w);
  config::detail::read(j, "tau2", c.tau2, w);
  config::detail::read(j, "method", c.method, w);
  config::detail::read(j, "strategy", c.strategy, w);
  config::detail::read(j, "k", c.k, w);
  config::detail::read(j, "knots", c.knots, w);
  config::detail::read(j, "seed", c.seed, w);
  config::detail::read(j, "out", c.out, w);
  config::detail::read(j, "dense_cap", c.dense_cap, w);
  if (c.train.empty() || c.test.empty()) throw ConfigError("predict: --train and --test are required");
  if (c.method != "full" && c.method != "lowrank") throw ConfigError("predict: --method must be full or lowrank");
  if (c.strategy != "sp" && c.strategy != "rand" && c.strategy != "grid" && c.strategy != "all") {
    throw ConfigError("predict: --strategy must be sp, rand, grid or all");
  }
  return c;
}

void run_predict(const json& j, const Common& common, Run& run) {
  const PredictConfig c = predict_from_json(j);
  run.set_config(to_json(c));
  run.set_seeds({{"seed", c.seed}});
  const CovarianceSpec spec = checked_spec("predict", c.sigma2, c.psi, c.nu, c.tau2);
  const Parallelism par = parallelism(common);
  const csv::Table train_table = csv::ingest_csv(c.train);
  warn_duplicates(train_table, c.train);
  const Dataset train = train_table.dataset();
  const csv::Table test = csv::ingest_csv(c.test);

  std::optional<Predictor> pred;
  Eigen::Index k = 0;
  if (c.method == "full") {
    pred = fit_full(train, spec, par, c.dense_cap);
  } else {
    KnotSet ks = [&]() -> KnotSet {
      if (!c.knots.empty()) return csv::read_knots(c.knots);
      ExperimentConfig knot_cfg;
      return make_knots(c.strategy, train.locations(), c.k, c.seed, knot_cfg, Box::bounding(train.locations()), par);
    }();
    k = ks.k();
    pred = fit_lowrank(train, spec, ks, par);
  }
  const Eigen::VectorXd yhat = pred->predict(test.locations, par);

  std::ostringstream os;
  {
    csv::Writer w(os);
    for (Eigen::Index d = 0; d < test.locations.dim(); ++d) w.field("x" + std::to_string(d + 1));
    w.field("prediction");
    w.end_row();
    for (Eigen::Index i = 0; i < test.locations.size(); ++i) {
      for (Eigen::Index d = 0; d < test.locations.dim(); ++d) w.field(test.locations.point(i)(d));
      w.field(yhat(i));
      w.end_row();
    }
  }
  run.add_output(c.out.empty() ? run.in_out_dir("predictions.csv") : fs::path(c.out), os.str());
  run.note("k", k);
  run.note("jitter_used", pred->jitter_used());
  if (test.values) {
    const Score s = score(yhat, *test.values);
    run.note("rmspe", s.rmspe);
    run.note("mspe", s.mspe);
    std::cout << "rmspe=" << csv::format_double(s.rmspe) << " mspe=" << csv::format_double(s.mspe) << '\n';
  } else {
    std::cout << "predicted " << yhat.size() << " locations\n";
  }
}

// experiments ---------------------------------------------------------------

json replicate_seed_list(std::uint64_t base, int replicates) {
  json out = json::array();
  for (int r = 0; r < replicates; ++r) out.push_back(detail::replicate_seed(base, r));
  return out;
}

void write_tables(const ExperimentResult& res, Run& run, bool slopes) {
  std::ostringstream raw, agg;
  res.write_raw_csv(raw);
  res.write_agg_csv(agg);
  run.add_output(run.in_out_dir("raw.csv"), raw.str());
  run.add_output(run.in_out_dir("agg.csv"), agg.str());
  if (slopes) {
    std::ostringstream sl;
    res.write_slopes_csv(sl);
    run.add_output(run.in_out_dir("slopes.csv"), sl.str());
  }
}

void run_experiment(const std::string& sub, const json& j, const Common& common, Run& run) {
  const ExperimentConfig cfg = config::experiment_from_json(j);
  run.set_config(config::to_json(cfg));
  const Parallelism par = parallelism(common);
  const auto log = progress(common);
  ExperimentResult res;
  if (sub == "simulate") {
    res = run_scenario(cfg, par, log);
    run.set_seeds({{"base_seed", cfg.base_seed}, {"replicates", replicate_seed_list(cfg.base_seed, cfg.replicates)}});
  } else if (sub == "slope") {
    res = run_slope_study(cfg, par, log);
    json per_n = json::object();
    for (auto n : cfg.n_grid) {
      per_n[std::to_string(n)] =
          replicate_seed_list(derive_seed(cfg.base_seed, static_cast<std::uint64_t>(n)), cfg.replicates);
    }
    run.set_seeds({{"base_seed", cfg.base_seed}, {"replicates", per_n}});
  } else {
    res = run_tau_sweep(cfg, par, log);
    run.set_seeds({{"base_seed", cfg.base_seed}, {"replicates", replicate_seed_list(cfg.base_seed, cfg.replicates)}});
  }
  write_tables(res, run, sub == "slope");
  if (sub == "slope") {
    for (const auto& s : res.slopes) {
      std::cout << s.method << " " << s.spec << " (" << to_string(s.regime)
                << "): slope=" << csv::format_double(s.line.slope);
      if (!std::isnan(s.gamma_hat)) std::cout << " gamma_hat=" << csv::format_double(s.gamma_hat);
      std::cout << '\n';
    }
  } else {
    std::cout << res.rows.size() << " rows, " << res.aggregate().size() << " cells\n";
  }
}

void run_real(const json& j, const Common& common, Run& run) {
  const RealDataConfig cfg = config::realdata_from_json(j);
  run.set_config(config::to_json(cfg));
  run.set_seeds({{"base_seed", cfg.base_seed}, {"replicates", replicate_seed_list(cfg.base_seed, cfg.replicates)}});
  const ExperimentResult res = run_realdata(cfg, parallelism(common), progress(common));
  write_tables(res, run, false);
  json fitted = json::array();
  for (const auto& s : res.fitted_specs) fitted.push_back(config::to_json(s.spec));
  run.note("fitted_specs", fitted);
  for (const auto& a : res.aggregate()) {
    std::cout << a.method << " k=" << a.k << " rmspe=" << csv::format_double(a.rmspe.mean) << '\n';
  }
}

const std::map<std::string, std::string>& experiment_help() {
  static const std::map<std::string, std::string> h = {
      {"preset", "start from a built-in preset: scenario1..scenario4, slope, tau-sweep"},
      {"scenario", "label: strong_corr, weak_corr, consistency, nonuniform_fx, custom"},
      {"location_law", "uniform or mixture"},
      {"n", "training size"},
      {"n_t", "test size"},
      {"true_spec", "generating covariance {sigma2, psi, nu, tau2}"},
      {"imposed_specs", "list of {label, sigma2, psi, nu, tau2}; missing fields copy true_spec"},
      {"knot_strategies", "sp, rand, grid, spu, all"},
      {"k_grid", "knot counts"},
      {"replicates", "replicates per cell"},
      {"base_seed", "same as --seed"},
      {"tau_grid", "nugget multipliers for tau-sweep"},
      {"n_grid", "training sizes for slope"},
      {"include_full", "also run the full-data predictor"},
      {"score_against", "latent or observed test values"},
      {"tau2_mode", "known, or mle to re-estimate tau2 per replicate"},
      {"mle_subsample", "subsample size for tau2 MLE"},
      {"sweep_k", "knots per tau-sweep predictor"},
      {"slope_k_factor", "slope study k = floor(factor * n^exponent)"},
      {"slope_k_exponent", "see slope_k_factor"},
      {"gamma_true", "generating complexity used for oversmoothed slopes"},
      {"sp_restarts", "support point restarts"},
      {"sp_max_sweeps", "support point sweep limit"},
      {"dense_cap", "largest dense system allowed"},
      {"record_timings", "write fit/predict wall times (makes output nondeterministic)"}};
  return h;
}

int report(Run& run, int code, const std::string& msg) {
  std::cerr << "error: " << msg << '\n';
  try {
    run.finish(code, msg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank Gaussian-process prediction with support-point knots"};
  app.set_version_flag("--version", LOWRANK_GP_VERSION);
  app.require_subcommand(1, 1);

  Common common;
  std::map<std::string, KeyFlags> flags;
  const std::map<std::string, std::string> no_help;

  auto* sp = app.add_subcommand("sp", "support points of a CSV point set");
  flags["sp"].defaults = to_json(SpConfig{});
  flags["sp"].defaults.erase("seed");
  flags["sp"].attach(sp, {{"input", "CSV with x1..xd[,y]"},
                          {"k", "number of support points"},
                          {"out", "knot CSV path (default <out-dir>/knots.csv)"},
                          {"max_data", "subsample inputs larger than this"}});

  auto* gamma = app.add_subcommand("gamma", "complexity parameter from the eigenvalue decay of a Matern matrix");
  flags["gamma"].defaults = to_json(GammaConfig{});
  flags["gamma"].defaults.erase("seed");
  flags["gamma"].attach(gamma, {{"n0", "matrix size"}, {"seeds", "average over seeds seed..seed+seeds-1"}});

  auto* predict = app.add_subcommand("predict", "fit on a training CSV and predict at test locations");
  flags["predict"].defaults = to_json(PredictConfig{});
  flags["predict"].defaults.erase("seed");
  flags["predict"].attach(predict, {{"train", "training CSV x1..xd,y"},
                                    {"test", "test CSV; scored when it has a y column"},
                                    {"method", "full or lowrank"},
                                    {"strategy", "knots: sp, rand, grid, all"},
                                    {"knots", "knot CSV (overrides strategy)"},
                                    {"out", "predictions path (default <out-dir>/predictions.csv)"}});

  std::vector<CLI::App*> experiments;
  for (const auto& [name, desc] : std::vector<std::pair<std::string, std::string>>{
           {"simulate", "RMSPE-vs-k simulation study (raw.csv, agg.csv)"},
           {"slope", "log-MSPE slope study over n_grid (raw.csv, agg.csv, slopes.csv)"},
           {"tau-sweep", "nugget multiplier sweep (raw.csv, agg.csv)"}}) {
    auto* sub = app.add_subcommand(name, desc);
    json d = config::to_json(ExperimentConfig{});
    d.erase("base_seed");
    d["preset"] = "";
    flags[name].defaults = d;
    flags[name].attach(sub, experiment_help());
    experiments.push_back(sub);
  }

  auto* real = app.add_subcommand("realdata", "train/test evaluation on CSV data");
  {
    RealDataConfig rd;
    json d = config::to_json(rd);
    d.erase("base_seed");
    flags["realdata"].defaults = d;
    flags["realdata"].attach(real, {{"train_csv", "CSV x1..xd,y"},
                                    {"test_csv", "optional held-out CSV; otherwise a random split"},
                                    {"spec_source", "given or mle"},
                                    {"mle_free", "parameters free in the MLE, e.g. {\"nu\": true}"}});
  }

  for (auto* sub : app.get_subcommands({})) add_common(sub, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string sub = chosen->get_name();
  Run run(sub, common);
  try {
    const std::string seed_key = (sub == "sp" || sub == "gamma" || sub == "predict") ? "seed" : "base_seed";
    const json cfg = merged_config(common, flags[sub], sub, seed_key);
    run.set_config(cfg);
    if (sub == "sp")
      run_sp(cfg, common, run);
    else if (sub == "gamma")
      run_gamma(cfg, common, run);
    else if (sub == "predict")
      run_predict(cfg, common, run);
    else if (sub == "realdata")
      run_real(cfg, common, run);
    else
      run_experiment(sub, cfg, common, run);
    run.finish(kExitOk);
  } catch (const NumericalError& e) {
    return report(run, kExitNumerical, e.what());
  } catch (const DomainError& e) {
    return report(run, kExitConfig, e.what());
  } catch (const std::exception& e) {
    return report(run, kExitIo, e.what());
  }
  return kExitOk;
}
