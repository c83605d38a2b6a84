#include "doctest.h"

#include <string>

#include "midas/sim/config.hpp"

using namespace midas;
using namespace midas::sim;

namespace {

std::string valid_config = R"({
  "seed": 99,
  "servers": 8,
  "proxies": 2,
  "rtt_ms": 1.5,
  "scheduler": "midas",
  "workload": {
    "pattern": "bursty",
    "duration_s": 120,
    "base_rate": 25,
    "burst_amplitude": 30,
    "burst_len_s": 3,
    "burst_gap_s": 27,
    "zipf_s": 1.2,
    "key_universe": 2048,
    "dirs": 32,
    "write_fraction": 0.08
  },
  "service": {"model": "constant", "constant_ms": 100},
  "routing": {"k_f": 4, "vnodes_per_server": 128},
  "control": {"d0": 3, "warmup_s": 30},
  "cache": {"mode": "lease", "lease_ms": 20000}
})";

}  // namespace

TEST_CASE("a full config parses with every field mapped") {
  auto cfg = parse_config_json(valid_config, std::nullopt);
  CHECK(cfg.seed == 99);
  CHECK(cfg.servers == 8);
  CHECK(cfg.proxies == 2);
  CHECK(cfg.rtt_ms == doctest::Approx(1.5));
  CHECK(cfg.scheduler == Scheduler::kMidas);
  CHECK(cfg.workload.pattern == Pattern::kBursty);
  CHECK(cfg.workload.duration_us == 120 * kMicrosPerSecond);
  CHECK(cfg.workload.zipf_s == doctest::Approx(1.2));
  CHECK(cfg.service.model == ServiceModel::kConstant);
  CHECK(cfg.routing.vnodes_per_server == 128);
  CHECK(cfg.control.defaults.d0 == 3);
  CHECK(cfg.control.warmup_us == 30 * kMicrosPerSecond);
  CHECK(cfg.cache.mode == cache::CacheMode::kLease);
  CHECK(cfg.cache.lease_ms == doctest::Approx(20000));
}

TEST_CASE("seed override wins over the file seed") {
  auto cfg = parse_config_json(valid_config, 1234);
  CHECK(cfg.seed == 1234);
}

TEST_CASE("unknown fields are rejected with their path") {
  std::string bad = R"({"servers": 4, "workload": {"patern": "light"}})";
  try {
    parse_config_json(bad, std::nullopt);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "workload.patern");
    CHECK(std::string(e.what()).find("unknown field") != std::string::npos);
  }
}

TEST_CASE("d0 outside {1..4} is rejected with the bound in the message") {
  std::string bad = R"({"control": {"d0": 9}})";
  try {
    parse_config_json(bad, std::nullopt);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "control.d0");
    CHECK(std::string(e.what()).find("{1..4}") != std::string::npos);
  }
}

TEST_CASE("range and type violations are field-specific") {
  CHECK_THROWS_AS(
      parse_config_json(R"({"servers": 0})", std::nullopt), ConfigError);
  CHECK_THROWS_AS(
      parse_config_json(R"({"rtt_ms": -1})", std::nullopt), ConfigError);
  CHECK_THROWS_AS(
      parse_config_json(R"({"scheduler": "fifo"})", std::nullopt),
      ConfigError);
  CHECK_THROWS_AS(
      parse_config_json(R"({"workload": {"write_fraction": 1.5}})",
                        std::nullopt),
      ConfigError);
  CHECK_THROWS_AS(
      parse_config_json(R"({"workload": {"duration_s": "long"}})",
                        std::nullopt),
      ConfigError);
  CHECK_THROWS_AS(parse_config_json("not json", std::nullopt), ConfigError);

  // A per-server array must match the server count.
  CHECK_THROWS_AS(
      parse_config_json(
          R"({"servers": 4, "service": {"constant_ms": [100, 100]}})",
          std::nullopt),
      ConfigError);
  // Correct length is accepted.
  auto cfg = parse_config_json(
      R"({"servers": 2, "service": {"constant_ms": [100, 140]}})",
      std::nullopt);
  CHECK(cfg.service.constant_ms_for(1) == doctest::Approx(140.0));
}

TEST_CASE("midas scheduler requires a warmup window") {
  std::string bad =
      R"({"scheduler": "midas", "control": {"warmup_s": 0}})";
  CHECK_THROWS_AS(parse_config_json(bad, std::nullopt), ConfigError);
  std::string ok =
      R"({"scheduler": "round_robin", "control": {"warmup_s": 0}})";
  CHECK_NOTHROW(parse_config_json(ok, std::nullopt));
}

TEST_CASE("config echo round-trips") {
  auto cfg = parse_config_json(valid_config, std::nullopt);
  auto echoed = parse_config_json(config_to_json(cfg), std::nullopt);
  CHECK(echoed.seed == cfg.seed);
  CHECK(echoed.servers == cfg.servers);
  CHECK(echoed.workload.pattern == cfg.workload.pattern);
  CHECK(echoed.workload.duration_us == cfg.workload.duration_us);
  CHECK(echoed.cache.mode == cfg.cache.mode);
  CHECK(echoed.control.defaults.d0 == cfg.control.defaults.d0);
  CHECK(echoed.routing.vnodes_per_server == cfg.routing.vnodes_per_server);
}

TEST_CASE("missing config file raises a config error") {
  CHECK_THROWS_AS(load_config("/nonexistent/nope.json", std::nullopt),
                  ConfigError);
}
