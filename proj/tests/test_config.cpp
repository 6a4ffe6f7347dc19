#include <gtest/gtest.h>

#include "lowrank_gp/config.hpp"

using namespace lowrank_gp;
using config::json;

TEST(ExperimentJson, UnknownKeyRejected) {
  EXPECT_THROW(config::experiment_from_json(json::parse(R"({"n": 10, "knots": 5})")), ConfigError);
  try {
    config::experiment_from_json(json::parse(R"({"replicatez": 1})"));
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("replicatez"), std::string::npos);
  }
}

TEST(ExperimentJson, PresetThenOverrides) {
  const ExperimentConfig c =
      config::experiment_from_json(json::parse(R"({"preset": "scenario2", "replicates": 3, "k_grid": [289]})"));
  EXPECT_EQ(c.scenario, Scenario::WeakCorr);
  EXPECT_EQ(c.true_spec.psi(), 0.063);
  EXPECT_EQ(c.replicates, 3);
  EXPECT_EQ(c.k_grid, std::vector<Eigen::Index>{289});
}

TEST(ExperimentJson, ImposedSpecsInheritTrueSpec) {
  const ExperimentConfig c = config::experiment_from_json(
      json::parse(R"({"true_spec": {"psi": 0.2}, "imposed_specs": [{"label": "rough", "nu": 0.5}, {}]})"));
  EXPECT_EQ(c.true_spec, CovarianceSpec(1.5, 0.2, 1.5, 0.27));
  ASSERT_EQ(c.imposed_specs.size(), 2u);
  EXPECT_EQ(c.imposed_specs[0].label, "rough");
  EXPECT_EQ(c.imposed_specs[0].spec, CovarianceSpec(1.5, 0.2, 0.5, 0.27));
  EXPECT_EQ(c.imposed_specs[1].label, "spec1");
}

TEST(ExperimentJson, TypeAndDomainErrorsBecomeConfigErrors) {
  EXPECT_THROW(config::experiment_from_json(json::parse(R"({"n": "many"})")), ConfigError);
  EXPECT_THROW(config::experiment_from_json(json::parse(R"({"true_spec": {"psi": -1}})")), ConfigError);
  EXPECT_THROW(config::experiment_from_json(json::parse(R"({"scenario": "mild"})")), ConfigError);
  EXPECT_THROW(config::experiment_from_json(json::parse(R"([1, 2])")), ConfigError);
}

TEST(ExperimentJson, RoundTrip) {
  ExperimentConfig c = preset("scenario4");
  c.tau2_mode = Tau2Mode::Mle;
  c.score_against = ScoreTarget::Observed;
  c.base_seed = 0xfeedbeefULL;
  const json j = config::to_json(c);
  const ExperimentConfig back = config::experiment_from_json(j);
  EXPECT_EQ(config::to_json(back).dump(), j.dump());
  EXPECT_EQ(back.imposed_specs[0].spec, c.imposed_specs[0].spec);
}

TEST(RealDataJson, RoundTripAndUnknownKeys) {
  RealDataConfig c;
  c.train_csv = "train.csv";
  c.spec_source = SpecSource::Given;
  c.mle_free.nu = true;
  c.k_grid = {16, 64};
  const json j = config::to_json(c);
  const RealDataConfig back = config::realdata_from_json(j);
  EXPECT_EQ(config::to_json(back).dump(), j.dump());
  EXPECT_FALSE(back.test_csv.has_value());
  EXPECT_THROW(config::realdata_from_json(json::parse(R"({"train": "a.csv"})")), ConfigError);
  EXPECT_THROW(config::realdata_from_json(json::parse(R"({"mle_free": {"kappa": true}})")), ConfigError);
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(config::fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(config::fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(config::fnv1a("foobar"), 0x85944171f73967e8ULL);
}

TEST(LoadJson, MissingFileAndBadSyntax) {
  EXPECT_THROW(config::load_json("/nonexistent/config.json"), ConfigError);
  const std::string path = testing::TempDir() + "bad_config.json";
  {
    std::ofstream(path) << "{\"n\": ";
  }
  EXPECT_THROW(config::load_json(path), ConfigError);
}
