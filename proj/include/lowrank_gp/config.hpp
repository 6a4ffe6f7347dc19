#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lowrank_gp/errors.hpp"
#include "lowrank_gp/harness.hpp"
#include "lowrank_gp/kernel.hpp"

namespace lowrank_gp::config {

using json = nlohmann::ordered_json;

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      throw ConfigError(where + ": unknown key '" + key + "' (allowed: " + list + ")");
    }
  }
}

template <typename T>
T get(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <typename T>
void read(const json& j, const std::string& key, T& out, const std::string& where) {
  if (j.contains(key)) out = get<T>(j, key, where);
}

}  // namespace detail

inline json to_json(const CovarianceSpec& s) {
  return {{"sigma2", s.sigma2()}, {"psi", s.psi()}, {"nu", s.nu()}, {"tau2", s.tau2()}};
}

inline CovarianceSpec spec_from_json(const json& j, const std::string& where,
                                     const CovarianceSpec& base = {1.0, 1.0, 0.5, 0.0}) {
  detail::reject_unknown(j, {"sigma2", "psi", "nu", "tau2"}, where);
  double v[4] = {base.sigma2(), base.psi(), base.nu(), base.tau2()};
  detail::read(j, "sigma2", v[0], where);
  detail::read(j, "psi", v[1], where);
  detail::read(j, "nu", v[2], where);
  detail::read(j, "tau2", v[3], where);
  try {
    return {v[0], v[1], v[2], v[3]};
  } catch (const DomainError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline json to_json(const ParameterMask& m) {
  return {{"sigma2", m.sigma2}, {"psi", m.psi}, {"nu", m.nu}, {"tau2", m.tau2}};
}

inline ParameterMask mask_from_json(const json& j, const std::string& where) {
  detail::reject_unknown(j, {"sigma2", "psi", "nu", "tau2"}, where);
  ParameterMask m;
  detail::read(j, "sigma2", m.sigma2, where);
  detail::read(j, "psi", m.psi, where);
  detail::read(j, "nu", m.nu, where);
  detail::read(j, "tau2", m.tau2, where);
  return m;
}

inline const std::set<std::string>& experiment_keys() {
  static const std::set<std::string> keys = {
      "preset",        "scenario",         "location_law",  "n",           "n_t",           "true_spec",
      "imposed_specs", "knot_strategies",  "k_grid",        "replicates",  "base_seed",     "tau_grid",
      "n_grid",        "include_full",     "score_against", "tau2_mode",   "mle_subsample", "sweep_k",
      "slope_k_factor", "slope_k_exponent", "gamma_true",   "sp_restarts", "sp_max_sweeps", "dense_cap",
      "record_timings"};
  return keys;
}

inline json to_json(const ExperimentConfig& c) {
  json specs = json::array();
  for (const auto& s : c.imposed_specs) {
    json e = to_json(s.spec);
    e["label"] = s.label;
    specs.push_back(e);
  }
  return {{"scenario", std::string(to_string(c.scenario))},
          {"location_law", std::string(to_string(c.location_law))},
          {"n", c.n},
          {"n_t", c.n_t},
          {"true_spec", to_json(c.true_spec)},
          {"imposed_specs", specs},
          {"knot_strategies", c.knot_strategies},
          {"k_grid", c.k_grid},
          {"replicates", c.replicates},
          {"base_seed", c.base_seed},
          {"tau_grid", c.tau_grid},
          {"n_grid", c.n_grid},
          {"include_full", c.include_full},
          {"score_against", std::string(to_string(c.score_against))},
          {"tau2_mode", std::string(to_string(c.tau2_mode))},
          {"mle_subsample", c.mle_subsample},
          {"sweep_k", c.sweep_k},
          {"slope_k_factor", c.slope_k_factor},
          {"slope_k_exponent", c.slope_k_exponent},
          {"gamma_true", c.gamma_true},
          {"sp_restarts", c.sp_restarts},
          {"sp_max_sweeps", c.sp_max_sweeps},
          {"dense_cap", c.dense_cap},
          {"record_timings", c.record_timings}};
}

/// Applies the keys present in `j` on top of `base` (or on top of the named
/// preset when `j` has a "preset" key).
inline ExperimentConfig experiment_from_json(const json& j, ExperimentConfig base = {}) {
  const std::string w = "config";
  detail::reject_unknown(j, experiment_keys(), w);
  ExperimentConfig c = j.contains("preset") ? preset(detail::get<std::string>(j, "preset", w)) : std::move(base);
  if (j.contains("scenario")) c.scenario = scenario_from_string(detail::get<std::string>(j, "scenario", w));
  if (j.contains("location_law")) {
    c.location_law = location_law_from_string(detail::get<std::string>(j, "location_law", w));
  }
  detail::read(j, "n", c.n, w);
  detail::read(j, "n_t", c.n_t, w);
  if (j.contains("true_spec")) c.true_spec = spec_from_json(j["true_spec"], w + ".true_spec", c.true_spec);
  if (j.contains("imposed_specs")) {
    if (!j["imposed_specs"].is_array()) throw ConfigError(w + ".imposed_specs: expected an array");
    c.imposed_specs.clear();
    std::size_t i = 0;
    for (const auto& e : j["imposed_specs"]) {
      const std::string where = w + ".imposed_specs[" + std::to_string(i++) + "]";
      if (!e.is_object()) throw ConfigError(where + ": expected an object");
      json spec_part = e;
      std::string label = "spec" + std::to_string(i - 1);
      if (e.contains("label")) {
        label = detail::get<std::string>(e, "label", where);
        spec_part.erase("label");
      }
      c.imposed_specs.push_back({label, spec_from_json(spec_part, where, c.true_spec)});
    }
  }
  detail::read(j, "knot_strategies", c.knot_strategies, w);
  detail::read(j, "k_grid", c.k_grid, w);
  detail::read(j, "replicates", c.replicates, w);
  detail::read(j, "base_seed", c.base_seed, w);
  detail::read(j, "tau_grid", c.tau_grid, w);
  detail::read(j, "n_grid", c.n_grid, w);
  detail::read(j, "include_full", c.include_full, w);
  if (j.contains("score_against")) {
    c.score_against = score_target_from_string(detail::get<std::string>(j, "score_against", w));
  }
  if (j.contains("tau2_mode")) c.tau2_mode = tau2_mode_from_string(detail::get<std::string>(j, "tau2_mode", w));
  detail::read(j, "mle_subsample", c.mle_subsample, w);
  detail::read(j, "sweep_k", c.sweep_k, w);
  detail::read(j, "slope_k_factor", c.slope_k_factor, w);
  detail::read(j, "slope_k_exponent", c.slope_k_exponent, w);
  detail::read(j, "gamma_true", c.gamma_true, w);
  detail::read(j, "sp_restarts", c.sp_restarts, w);
  detail::read(j, "sp_max_sweeps", c.sp_max_sweeps, w);
  detail::read(j, "dense_cap", c.dense_cap, w);
  detail::read(j, "record_timings", c.record_timings, w);
  c.validate();
  return c;
}

inline const std::set<std::string>& realdata_keys() {
  static const std::set<std::string> keys = {
      "train_csv",   "test_csv",  "test_fraction", "spec_source",  "spec",          "mle_free",
      "mle_subsample", "knot_strategies", "k_grid", "replicates",  "base_seed",     "include_full",
      "sp_restarts", "sp_max_sweeps", "dense_cap", "record_timings"};
  return keys;
}

inline json to_json(const RealDataConfig& c) {
  json j = {{"train_csv", c.train_csv}};
  j["test_csv"] = c.test_csv ? json(*c.test_csv) : json(nullptr);
  j["test_fraction"] = c.test_fraction;
  j["spec_source"] = std::string(to_string(c.spec_source));
  j["spec"] = to_json(c.spec);
  j["mle_free"] = to_json(c.mle_free);
  j["mle_subsample"] = c.mle_subsample;
  j["knot_strategies"] = c.knot_strategies;
  j["k_grid"] = c.k_grid;
  j["replicates"] = c.replicates;
  j["base_seed"] = c.base_seed;
  j["include_full"] = c.include_full;
  j["sp_restarts"] = c.sp_restarts;
  j["sp_max_sweeps"] = c.sp_max_sweeps;
  j["dense_cap"] = c.dense_cap;
  j["record_timings"] = c.record_timings;
  return j;
}

inline RealDataConfig realdata_from_json(const json& j, RealDataConfig c = {}) {
  const std::string w = "config";
  detail::reject_unknown(j, realdata_keys(), w);
  detail::read(j, "train_csv", c.train_csv, w);
  if (j.contains("test_csv")) {
    if (j["test_csv"].is_null())
      c.test_csv.reset();
    else
      c.test_csv = detail::get<std::string>(j, "test_csv", w);
  }
  detail::read(j, "test_fraction", c.test_fraction, w);
  if (j.contains("spec_source")) c.spec_source = spec_source_from_string(detail::get<std::string>(j, "spec_source", w));
  if (j.contains("spec")) c.spec = spec_from_json(j["spec"], w + ".spec", c.spec);
  if (j.contains("mle_free")) c.mle_free = mask_from_json(j["mle_free"], w + ".mle_free");
  detail::read(j, "mle_subsample", c.mle_subsample, w);
  detail::read(j, "knot_strategies", c.knot_strategies, w);
  detail::read(j, "k_grid", c.k_grid, w);
  detail::read(j, "replicates", c.replicates, w);
  detail::read(j, "base_seed", c.base_seed, w);
  detail::read(j, "include_full", c.include_full, w);
  detail::read(j, "sp_restarts", c.sp_restarts, w);
  detail::read(j, "sp_max_sweeps", c.sp_max_sweeps, w);
  detail::read(j, "dense_cap", c.dense_cap, w);
  detail::read(j, "record_timings", c.record_timings, w);
  return c;
}

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
}

/// 64-bit FNV-1a of a byte string; used as the run.json config hash.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace lowrank_gp::config
