#include <cstdlib>
#include <fstream>

#include <gtest/gtest.h>

#include "khectl/config.hpp"

using namespace khectl;
using config::ConfigError;

namespace {

std::string message_of(const std::string& text) {
  try {
    config::parse(text, "t.ini");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Config, DefaultsAreTheReferenceSetup) {
  const auto cfg = config::defaults();
  EXPECT_EQ(cfg.bits, 120u);
  EXPECT_EQ(cfg.sim.steps, 1000u);
  EXPECT_EQ(cfg.sim.gains.phi, 1e15);
  EXPECT_EQ(cfg.sim.gains.xi, 1e16);
  EXPECT_EQ(cfg.plant().A, control::reference_plant().A);
  EXPECT_FALSE(cfg.sim.attack);
}

TEST(Config, ShippedPaperFileMatchesDefaults) {
  const auto cfg = config::load(std::filesystem::path(KHECTL_SOURCE_DIR) / "configs/paper.ini");
  auto def = config::defaults();
  EXPECT_EQ(config::dump(cfg), config::dump(def));
}

TEST(Config, UnknownNamesListTheAllowedOnes) {
  const auto sec = message_of("[simulation]\nsteps = 3\n");
  EXPECT_NE(sec.find("simulation"), std::string::npos);
  EXPECT_NE(sec.find("sim"), std::string::npos);
  const auto key = message_of("[sim]\nstep = 3\n");
  EXPECT_NE(key.find("'step'"), std::string::npos) << key;
  EXPECT_NE(key.find("steps"), std::string::npos);
}

TEST(Config, ValuesAreValidated) {
  EXPECT_THROW(config::parse("[sim]\nsteps = -1\n"), ConfigError);
  EXPECT_THROW(config::parse("[sim]\nmode = fast\n"), ConfigError);
  EXPECT_THROW(config::parse("[codec]\ngamma_phi = nan\n"), ConfigError);
  EXPECT_THROW(config::parse("[plant]\nk = 28.288\n"), ConfigError);
  EXPECT_THROW(config::parse("[plant]\nk = 1\na = 2\nA = 1 0; 0 1\n"), ConfigError);
  EXPECT_THROW(config::parse("[attack]\nlambda = 3\n"), ConfigError);
}

TEST(Config, ContinuousPlantIsDiscretised) {
  const auto cfg = config::parse("[plant]\nk = 28.288\na = 34\n");
  EXPECT_NEAR(cfg.plant().A(1, 1), 0.7118, 5e-5);
}

TEST(Config, AttackSections) {
  const auto c2 = config::parse("[attack]\ncase = 2\nignore_detection = yes\n");
  ASSERT_TRUE(c2.sim.attack);
  EXPECT_EQ(c2.sim.attack->lambda, 2u);
  EXPECT_EQ(c2.sim.attack->start, 500u);
  EXPECT_EQ(c2.sim.attack->end, 1000u);
  EXPECT_TRUE(c2.sim.ignore_detection);
  const auto custom = config::parse("[attack]\ntarget = signal:7,2\nlambda = 5\nwindow_s = 1:2.5\n");
  const auto& t = std::get<sim::SignalTarget>(custom.sim.attack->target);
  EXPECT_EQ(t.j, 7u);
  EXPECT_EQ(custom.sim.attack->start, 100u);
  EXPECT_EQ(custom.sim.attack->end, 250u);
}

TEST(Config, OverridesApplyTogether) {
  auto cfg = config::defaults();
  config::apply_override(cfg, "sim.steps=250");
  EXPECT_EQ(cfg.sim.steps, 250u);
  EXPECT_THROW(config::apply_override(cfg, "sim.steps"), ConfigError);
  EXPECT_THROW(config::apply_override(cfg, "plant.A=1 0; 0 1"), ConfigError);
  const std::vector<std::string> all{"plant.A=1, 0.01; 0, 0.9", "plant.B=0; 0.1", "plant.C=1 0"};
  config::apply_overrides(cfg, all);
  EXPECT_EQ(cfg.plant().A(1, 1), 0.9);
}

TEST(Config, SchedulesAndWindows) {
  const auto s = config::parse_schedule("0:0, 1:0.2, 3:-0.1");
  ASSERT_EQ(s.breakpoints.size(), 3u);
  EXPECT_EQ(s.at_time(2.0), 0.2);
  EXPECT_THROW(config::parse_schedule("1:0, 0:1"), ConfigError);
  EXPECT_EQ(config::parse_window("5:10"), (std::pair<double, double>{5, 10}));
  EXPECT_THROW(config::parse_window("5"), ConfigError);
  EXPECT_THROW(config::parse_attack_target("param:1,2"), ConfigError);
}

TEST(Config, DumpRoundtrips) {
  auto cfg = config::parse("[sim]\nseed = 9\nmode = quantized\n[attack]\ncase = 1\n");
  EXPECT_EQ(config::dump(config::parse(config::dump(cfg))), config::dump(cfg));
}

TEST(Config, EnvironmentPath) {
  ::setenv("KHECTL_CONFIG", "/tmp/x.ini", 1);
  EXPECT_EQ(config::env_config_path(), std::filesystem::path("/tmp/x.ini"));
  ::setenv("KHECTL_CONFIG", "", 1);
  EXPECT_FALSE(config::env_config_path());
  ::unsetenv("KHECTL_CONFIG");
}
