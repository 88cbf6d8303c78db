#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "fdjrc/config.hpp"
#include "fdjrc/experiment.hpp"

using namespace fdjrc;

namespace {

bool same_records(const std::vector<ResultRecord>& a, const std::vector<ResultRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const ResultRecord &x = a[i], &y = b[i];
    if (x.experiment != y.experiment || x.method != y.method || x.metric != y.metric)
      return false;
    if (x.trial != y.trial || x.seed != y.seed) return false;
    if (x.sweep != y.sweep || x.value != y.value) return false;
  }
  return true;
}

ExperimentConfig tiny_se_config() {
  ExperimentConfig cfg = default_config(ExperimentId::se_vs_power);
  cfg.system.n_subcarriers = 8;
  cfg.trials = 2;
  cfg.sweep = {0.0, 20.0};
  cfg.base_seed = 11;
  return cfg;
}

}  // namespace

TEST_CASE("defaults pin the evaluation parameters", "[harness]") {
  const ExperimentConfig cfg = default_config(ExperimentId::se_vs_power);
  CHECK(cfg.system.n_bs == 32);
  CHECK(cfg.system.n_ms == 16);
  CHECK(cfg.system.n_rf_bs == 4);
  CHECK(cfg.system.n_streams == 4);
  CHECK(cfg.system.n_subcarriers == 792);
  CHECK(cfg.system.n_symbols == 14);
  CHECK(cfg.system.subcarrier_spacing_hz == 120e3);
  CHECK(cfg.system.symbol_duration_s == 8.92e-6);
  CHECK(cfg.system.carrier_hz == 28e9);
  CHECK(cfg.system.noise_dbm == -93.8);
  CHECK(cfg.design.tau_t_fraction == 0.3);
  CHECK(cfg.design.tau_r_fraction == 0.7);
  CHECK(cfg.design.eps1 == 0.1);
  CHECK(cfg.design.eps2 == 0.3);
  CHECK(cfg.design.ridge == 1e-8);
  CHECK(cfg.radar.range_oversample == 10);
  CHECK(cfg.radar.doppler_oversample == 200);
  CHECK(cfg.mbar() == 7920);
  CHECK(cfg.nbar() == 2800);
  CHECK(cfg.scenario.targets.size() == 1);
  CHECK(cfg.scenario.targets[0].angle_deg == 45.0);
  CHECK(cfg.scenario.targets[0].range_m == 40.0);

  const ExperimentConfig sinr = default_config(ExperimentId::sinr_vs_si);
  CHECK(sinr.design.tau_t_fraction == 0.35);
  CHECK(std::count(sinr.sweep.begin(), sinr.sweep.end(), 60.0) == 1);

  const ExperimentConfig maps = default_config(ExperimentId::radar_maps);
  CHECK(maps.design.tau_t_fraction == 0.35);
  CHECK(maps.scenario.targets.size() == 4);
  CHECK(maps.scenario.los_aod_deg.has_value());
  CHECK(*maps.scenario.los_aod_deg == 10.0);
  CHECK(maps.scenario.si_to_noise_db == 60.0);
}

TEST_CASE("json overrides and unknown-key rejection", "[harness]") {
  const std::string text = R"({
    "experiment": "sinr_vs_si",
    "trials": 3,
    "base_seed": 42,
    "methods": ["proposed+bcd", "coherent_eigenvector+identity"],
    "sweep": [0, 60],
    "system": {"subcarriers": 64, "n_rf": 2, "n_streams": 2, "tx_power_dbm": 18},
    "design": {"tau_t_fraction": 0.3, "gain_semantics": "amplitude"},
    "scenario": {"si_to_noise_db": 50,
                 "targets": [{"angle_deg": 20, "range_m": 30, "velocity_mps": 5}]},
    "radar": {"range_oversample": 4, "doppler_oversample": 8}
  })";
  const ExperimentConfig cfg = parse_config_text(text, "inline");
  CHECK(cfg.experiment == ExperimentId::sinr_vs_si);
  CHECK(cfg.trials == 3);
  CHECK(cfg.base_seed == 42);
  CHECK(cfg.methods.size() == 2);
  CHECK(cfg.system.n_subcarriers == 64);
  CHECK(cfg.system.n_rf_bs == 2);
  CHECK(cfg.system.n_rf_ms == 2);
  CHECK(cfg.system.tx_power_dbm == 18.0);
  CHECK(cfg.design.tau_t_fraction == 0.3);
  CHECK(cfg.design.gain_semantics == GainSemantics::amplitude);
  CHECK(cfg.scenario.si_to_noise_db == 50.0);
  REQUIRE(cfg.scenario.targets.size() == 1);
  CHECK(cfg.scenario.targets[0].rcs_m2 == 10.0);  // default retained
  CHECK(cfg.mbar() == 256);
  CHECK(cfg.nbar() == 112);

  CHECK_THROWS_AS(parse_config_text(R"({"trails": 3})", "x"), config_error);
  CHECK_THROWS_AS(parse_config_text(R"({"system": {"n_sb": 8}})", "x"), config_error);
  CHECK_THROWS_AS(parse_config_text(R"({"design": {"tau": 0.3}})", "x"), config_error);
  CHECK_THROWS_AS(
      parse_config_text(R"({"scenario": {"targets": [{"angle": 1}]}})", "x"),
      config_error);
  CHECK_THROWS_AS(parse_config_text(R"({"radar": {"mbar": 10}})", "x"), config_error);
  CHECK_THROWS_AS(parse_config_text("{", "x"), config_error);
  CHECK_THROWS_AS(parse_config_text(R"({"trials": "many"})", "x"), config_error);

  try {
    parse_config_text(R"({"experiment": "se_sweep"})", "x");
    FAIL("expected config_error");
  } catch (const config_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("se_vs_power") != std::string::npos);
    CHECK(msg.find("sinr_vs_si") != std::string::npos);
    CHECK(msg.find("radar_maps") != std::string::npos);
  }
}

TEST_CASE("method specs parse and are validated per experiment", "[harness]") {
  const MethodSpec m1 = parse_method_spec("proposed+bcd");
  CHECK(m1.precoder == PrecoderMethod::proposed);
  CHECK(m1.combiner == CombinerKind::bcd);
  CHECK(m1.label == "proposed+bcd");
  const MethodSpec m2 = parse_method_spec("optimal_svd");
  CHECK(m2.combiner == CombinerKind::none);

  CHECK_THROWS_AS(parse_method_spec("proposed+bcd+nsp"), config_error);
  try {
    parse_method_spec("proposed+magic");
    FAIL("expected config_error");
  } catch (const config_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("bcd") != std::string::npos);
    CHECK(msg.find("nsp") != std::string::npos);
    CHECK(msg.find("steering") != std::string::npos);
    CHECK(msg.find("identity") != std::string::npos);
  }
  try {
    parse_method_spec("gradient_descent");
    FAIL("expected config_error");
  } catch (const config_error& e) {
    CHECK(std::string(e.what()).find("coherent_eigenvector") != std::string::npos);
  }

  ExperimentConfig se = default_config(ExperimentId::se_vs_power);
  se.methods = {"proposed+bcd"};
  CHECK_THROWS_AS(validate_config(se), config_error);

  ExperimentConfig sinr = default_config(ExperimentId::sinr_vs_si);
  sinr.methods = {"proposed"};
  CHECK_THROWS_AS(validate_config(sinr), config_error);
  sinr.methods = {"proposed+bcd", "proposed+bcd"};
  CHECK_THROWS_AS(validate_config(sinr), config_error);

  ExperimentConfig dup = default_config(ExperimentId::se_vs_power);
  dup.sweep = {0, 5, 0};
  CHECK_THROWS_AS(validate_config(dup), config_error);
  dup.sweep = {};
  CHECK_THROWS_AS(validate_config(dup), config_error);

  ExperimentConfig maps = default_config(ExperimentId::radar_maps);
  maps.scenario.targets.push_back(maps.scenario.targets[0]);
  CHECK_THROWS_AS(validate_config(maps), config_error);

  ExperimentConfig bad = default_config(ExperimentId::se_vs_power);
  bad.trials = 0;
  CHECK_THROWS_AS(validate_config(bad), config_error);
  bad = default_config(ExperimentId::se_vs_power);
  bad.system.n_rf_bs = 64;
  CHECK_THROWS_AS(validate_config(bad), config_error);
}

TEST_CASE("csv emission matches the record schema", "[harness]") {
  std::vector<ResultRecord> recs;
  std::ostringstream empty;
  emit_csv(recs, empty);
  CHECK(empty.str() == "experiment,method,sweep,trial,metric,value,seed\n");

  recs.push_back({"se_vs_power", "proposed", -10.0, 0, "mean_se_bps_hz", 12.3456789012, 7});
  recs.push_back({"se_vs_power", "optimal_svd", 0.5, 1, "mean_se_bps_hz", 1e-12, 8});
  recs.push_back({"sinr_vs_si", "proposed+bcd", 60.0, 2, "radar_sinr_db", -3.25, 9});
  std::ostringstream out;
  emit_csv(recs, out);
  const std::string text = out.str();

  int lines = 0;
  for (char c : text) lines += (c == '\n');
  CHECK(lines == 4);
  CHECK(text.back() == '\n');
  CHECK(text.find('\r') == std::string::npos);
  CHECK(text.find("se_vs_power,proposed,-10,0,mean_se_bps_hz,12.3456789,7\n") !=
        std::string::npos);
  CHECK(text.find("sinr_vs_si,proposed+bcd,60,2,radar_sinr_db,-3.25,9\n") !=
        std::string::npos);

  // Round trip: parse back, emit again, byte-identical; exact fields preserved.
  std::istringstream in(text);
  const std::vector<ResultRecord> back = parse_csv(in);
  REQUIRE(back.size() == 3);
  CHECK(back[0].experiment == "se_vs_power");
  CHECK(back[0].method == "proposed");
  CHECK(back[0].sweep == -10.0);
  CHECK(back[0].trial == 0);
  CHECK(back[0].seed == 7);
  CHECK(back[1].value == 1e-12);
  std::ostringstream out2;
  emit_csv(back, out2);
  CHECK(out2.str() == text);

  std::istringstream bad_header("method,sweep\n");
  CHECK_THROWS_AS(parse_csv(bad_header), config_error);
  std::istringstream bad_row("experiment,method,sweep,trial,metric,value,seed\na,b,c\n");
  CHECK_THROWS_AS(parse_csv(bad_row), config_error);

  CHECK_THROWS_AS(emit_csv(recs, "/nonexistent_dir/out.csv"), config_error);
}

TEST_CASE("run_experiment is deterministic and ordered by sweep then trial", "[harness]") {
  const ExperimentConfig cfg = tiny_se_config();
  const std::vector<ResultRecord> a = run_experiment(cfg);
  const std::vector<ResultRecord> b = run_experiment(cfg);
  CHECK(same_records(a, b));

  REQUIRE(a.size() == std::size_t(2 * 2 * 3));  // sweep x trial x method
  // (sweep, trial) lexicographic, methods in config order within each pair
  std::size_t i = 0;
  for (double sweep : {0.0, 20.0})
    for (int trial : {0, 1})
      for (const char* method : {"proposed", "coherent_eigenvector", "optimal_svd"}) {
        CAPTURE(i);
        CHECK(a[i].sweep == sweep);
        CHECK(a[i].trial == trial);
        CHECK(a[i].method == method);
        CHECK(a[i].seed == cfg.base_seed + std::uint64_t(trial));
        CHECK(a[i].metric == "mean_se_bps_hz");
        CHECK(a[i].value > 0.0);
        ++i;
      }

  // Uniqueness of the record key.
  std::set<std::tuple<std::string, std::string, double, int, std::string>> keys;
  for (const ResultRecord& r : a)
    keys.insert({r.experiment, r.method, r.sweep, r.trial, r.metric});
  CHECK(keys.size() == a.size());

  // Byte-identical CSV across runs.
  std::ostringstream ca, cb;
  emit_csv(a, ca);
  emit_csv(b, cb);
  CHECK(ca.str() == cb.str());
}

TEST_CASE("trials are exchangeable: a trial's rows depend only on its seed", "[harness]") {
  ExperimentConfig two = tiny_se_config();
  two.base_seed = 7;
  two.trials = 2;
  ExperimentConfig one = tiny_se_config();
  one.base_seed = 8;  // = two.base_seed + 1, so it replays trial 1
  one.trials = 1;

  const std::vector<ResultRecord> ra = run_experiment(two);
  const std::vector<ResultRecord> rb = run_experiment(one);
  std::vector<ResultRecord> a1;
  for (const ResultRecord& r : ra)
    if (r.trial == 1) a1.push_back(r);
  REQUIRE(a1.size() == rb.size());
  for (std::size_t i = 0; i < a1.size(); ++i) {
    CHECK(a1[i].trial == 1);
    CHECK(rb[i].trial == 0);
    CHECK(a1[i].seed == rb[i].seed);
    CHECK(a1[i].method == rb[i].method);
    CHECK(a1[i].sweep == rb[i].sweep);
    CHECK(a1[i].value == rb[i].value);
  }
}

TEST_CASE("spectral-efficiency sweep keeps the optimal benchmark on top", "[harness]") {
  const ExperimentConfig cfg = tiny_se_config();
  const std::vector<ResultRecord> recs = run_experiment(cfg);
  for (double sweep : cfg.sweep)
    for (int trial = 0; trial < cfg.trials; ++trial) {
      double prop = -1.0, opt = -1.0;
      for (const ResultRecord& r : recs) {
        if (r.sweep != sweep || r.trial != trial) continue;
        if (r.method == "proposed") prop = r.value;
        if (r.method == "optimal_svd") opt = r.value;
      }
      CAPTURE(sweep, trial);
      REQUIRE(prop >= 0.0);
      REQUIRE(opt >= 0.0);
      CHECK(opt >= prop * (1.0 - 1e-9));
    }
}

TEST_CASE("si suppression shows up as a large sinr gap at 60 dB", "[harness]") {
  ExperimentConfig cfg = default_config(ExperimentId::sinr_vs_si);
  cfg.system.n_subcarriers = 8;
  cfg.trials = 1;
  cfg.base_seed = 3;
  cfg.sweep = {60.0};
  cfg.methods = {"proposed+bcd", "coherent_eigenvector+identity"};
  const std::vector<ResultRecord> recs = run_experiment(cfg);
  REQUIRE(recs.size() == 2);
  double bcd = 0.0, ident = 0.0;
  for (const ResultRecord& r : recs) {
    CHECK(r.metric == "radar_sinr_db");
    if (r.method == "proposed+bcd") bcd = r.value;
    if (r.method == "coherent_eigenvector+identity") ident = r.value;
  }
  CAPTURE(bcd, ident);
  CHECK(bcd - ident > 10.0);
}

TEST_CASE("radar_maps emits per-target recovery records", "[harness]") {
  ExperimentConfig cfg = default_config(ExperimentId::radar_maps);
  cfg.system.n_subcarriers = 16;
  cfg.trials = 1;
  cfg.base_seed = 5;
  // Angles sit in the band where the transmit gain threshold is attainable,
  // matching the operating region of the default four-target scene.
  cfg.scenario.targets = {TargetPlacement{-50.0, 50.0, 10.0, 10.0},
                          TargetPlacement{46.0, 60.0, 15.0, 10.0}};
  const std::vector<ResultRecord> recs = run_experiment(cfg);
  REQUIRE(recs.size() == std::size_t(2 * 5));

  const double range_bin = speed_of_light / (2.0 * cfg.mbar() * 120e3);
  const double vel_bin_physical =
      0.5 * cfg.system.wavelength() / (cfg.nbar() * cfg.system.symbol_duration_s);

  for (const TargetPlacement& t : cfg.scenario.targets) {
    double range = -1, range_err = 1e9, vel = -1e9, vel_err = 1e9, prof = -1;
    for (const ResultRecord& r : recs) {
      if (r.sweep != t.angle_deg) continue;
      CHECK(r.method == "proposed+bcd");
      if (r.metric == "range_m") range = r.value;
      if (r.metric == "range_error_m") range_err = r.value;
      if (r.metric == "velocity_mps") vel = r.value;
      if (r.metric == "velocity_error_mps") vel_err = r.value;
      if (r.metric == "profile_range_m") prof = r.value;
    }
    CAPTURE(t.angle_deg, range, vel, prof);
    CHECK(range >= 0.0);
    CHECK(std::abs(range - t.range_m) <= 2.0 * range_bin);
    CHECK(std::abs(range_err) <= 2.0 * range_bin);
    CHECK(std::abs(vel - t.velocity_mps) <= 2.0 * vel_bin_physical);
    CHECK(std::abs(vel_err) <= 2.0 * vel_bin_physical);
    CHECK(std::abs(prof - t.range_m) <= 2.0 * range_bin);
  }
}
