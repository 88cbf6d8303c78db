#include <catch2/catch_amalgamated.hpp>

#include "fdjrc/propagation.hpp"

using namespace fdjrc;

namespace {

UlaSpec test_ula(int n, double spacing_wl = 0.5) {
  UlaSpec s;
  s.n_ant = n;
  s.wavelength = 0.0107;  // arbitrary but fixed
  s.element_spacing = spacing_wl * s.wavelength;
  return s;
}

SystemParams desk_params() {
  SystemParams p;
  p.n_subcarriers = 16;
  return p;
}

}  // namespace

TEST_CASE("ula_response broadside, endfire and norm", "[propagation]") {
  const CVec broadside = ula_response(test_ula(4), 0.0);
  for (int k = 0; k < 4; ++k) CHECK(std::abs(broadside(k) - cplx(1, 0)) <= 1e-15);

  const CVec endfire = ula_response(test_ula(2), pi / 2);
  CHECK(std::abs(endfire(0) - cplx(1, 0)) <= 1e-12);
  CHECK(std::abs(endfire(1) - cplx(-1, 0)) <= 1e-12);

  const CVec a = ula_response(test_ula(8), 0.37);
  CHECK(std::abs(a.squaredNorm() - 8.0) <= 1e-14);
}

TEST_CASE("ula_response inner product matches the geometric series", "[propagation]") {
  const UlaSpec spec = test_ula(8);
  const CVec a1 = ula_response(spec, 0.3);
  const CVec a2 = ula_response(spec, 0.5);
  // a1^H a2 = sum_k e^{j k d}, d = pi (sin 0.5 - sin 0.3) for half-wavelength spacing.
  const double d = pi * (std::sin(0.5) - std::sin(0.3));
  const cplx ratio = std::polar(1.0, d);
  const cplx geometric = (1.0 - std::pow(ratio, 8)) / (1.0 - ratio);
  CHECK(std::abs((a1.adjoint() * a2)(0) - geometric) <= 1e-12);
}

TEST_CASE("si_channel normalization, diagonal structure and symmetry", "[propagation]") {
  const double lambda = 0.0107;
  UlaSpec tx = test_ula(16);
  UlaSpec rx = test_ula(16);
  rx.origin = {0.0, 0.0, 6.0 * lambda};

  const CMat h = si_channel(tx, rx);
  CHECK(std::abs(h.squaredNorm() - 256.0) <= 1e-10 * 256.0);

  // Same-index elements are all separated by exactly 6 lambda: equal, real, positive.
  for (int p = 0; p < 16; ++p) {
    CHECK(std::abs(h(p, p) - h(0, 0)) <= 1e-12);
    CHECK(h(p, p).real() > 0.0);
    CHECK(std::abs(h(p, p).imag()) <= 1e-12 * std::abs(h(p, p)));
  }
  CHECK((h - h.transpose()).norm() <= 1e-12 * h.norm());

  UlaSpec overlapping = test_ula(16);
  CHECK_THROWS_AS(si_channel(tx, overlapping), contract_error);
}

TEST_CASE("downlink_channels single-path cases", "[propagation]") {
  const UlaSpec bs = test_ula(8);
  const UlaSpec ms = test_ula(4);
  const double df = 120e3;

  PathSpec p;
  p.gain = 1.0;
  p.delay = 0.0;
  p.aoa = 0.2;
  p.aod = -0.4;
  const auto h0 = downlink_channels({p}, bs, ms, 3, df);
  const CMat expect = ula_response(ms, p.aoa) * ula_response(bs, p.aod).adjoint();
  for (int m = 0; m < 3; ++m) CHECK((h0[m] - expect).norm() <= 1e-12 * expect.norm());
  Eigen::JacobiSVD<CMat> svd(h0[0]);
  CHECK(svd.singularValues()(1) <= 1e-12 * svd.singularValues()(0));
}

TEST_CASE("downlink_channels half-period delay flips the sign at m=1", "[propagation]") {
  const UlaSpec bs = test_ula(8);
  const UlaSpec ms = test_ula(4);
  const double df = 120e3;
  PathSpec p;
  p.gain = 1.0;
  p.delay = 1.0 / (2.0 * df);
  p.aoa = 0.2;
  p.aod = -0.4;
  const auto h = downlink_channels({p}, bs, ms, 2, df);
  const CMat expect = ula_response(ms, p.aoa) * ula_response(bs, p.aod).adjoint();
  CHECK((h[1] + expect).norm() <= 1e-9 * expect.norm());
}

TEST_CASE("downlink_channels matches the term-by-term sum", "[propagation]") {
  const UlaSpec bs = test_ula(8);
  const UlaSpec ms = test_ula(4);
  const double df = 120e3;
  Rng rng(31);
  std::vector<PathSpec> paths;
  for (int l = 0; l < 5; ++l) {
    PathSpec p;
    p.gain = rng.cnormal(1.0);
    p.delay = rng.uniform(0.0, 400e-9);
    p.aoa = rng.uniform(-1.2, 1.2);
    p.aod = rng.uniform(-1.2, 1.2);
    paths.push_back(p);
  }
  const auto h = downlink_channels(paths, bs, ms, 6, df);
  for (int m = 0; m < 6; ++m) {
    CMat oracle = CMat::Zero(4, 8);
    for (const auto& p : paths)
      oracle += p.gain * std::polar(1.0, -2.0 * pi * m * p.delay * df) *
                (ula_response(ms, p.aoa) * ula_response(bs, p.aod).adjoint());
    CHECK((h[m] - oracle).norm() <= 1e-11 * std::max(1.0, oracle.norm()));
  }
  CHECK_THROWS_AS(downlink_channels({}, bs, ms, 2, df), contract_error);
}

TEST_CASE("target_channel static target and phase progression", "[propagation]") {
  const UlaSpec bs = test_ula(8);
  TargetSpec t;
  t.reflection = cplx(0.3, -0.1);
  t.doppler = 0.0;
  t.round_trip = 0.0;
  t.angle = 0.5;
  const CMat h00 = target_channel({t}, bs, 0, 0, 120e3, 8.92e-6);
  const CMat h53 = target_channel({t}, bs, 5, 3, 120e3, 8.92e-6);
  const CVec a = ula_response(bs, t.angle);
  const CMat expect = t.reflection * (a * a.adjoint());
  CHECK((h00 - expect).norm() <= 1e-12 * expect.norm());
  CHECK((h53 - expect).norm() <= 1e-12 * expect.norm());

  t.doppler = 3500.0;
  t.round_trip = 2.0 * 40.0 / speed_of_light;
  const double T = 8.92e-6;
  const CMat hn = target_channel({t}, bs, 2, 3, 120e3, T);
  const CMat hn1 = target_channel({t}, bs, 2, 4, 120e3, T);
  const cplx expected_ratio = std::polar(1.0, 2.0 * pi * T * t.doppler);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      CHECK(std::abs(hn1(i, j) / hn(i, j) - expected_ratio) <= 1e-10);
}

TEST_CASE("target_channel three targets: rank bound and term-by-term oracle",
          "[propagation]") {
  const UlaSpec bs = test_ula(8);
  Rng rng(32);
  std::vector<TargetSpec> targets;
  for (int k = 0; k < 3; ++k) {
    TargetSpec t;
    t.reflection = rng.cnormal(1.0);
    t.doppler = rng.uniform(0.0, 5000.0);
    t.round_trip = rng.uniform(0.0, 1e-6);
    t.angle = rng.uniform(-1.0, 1.0);
    targets.push_back(t);
  }
  const int m = 7, n = 4;
  const double df = 120e3, T = 8.92e-6;
  const CMat h = target_channel(targets, bs, m, n, df, T);

  CMat oracle = CMat::Zero(8, 8);
  for (const auto& t : targets) {
    const CVec a = ula_response(bs, t.angle);
    oracle += t.reflection *
              std::polar(1.0, 2.0 * pi * (n * T * t.doppler - m * t.round_trip * df)) *
              (a * a.adjoint());
  }
  CHECK((h - oracle).norm() <= 1e-11 * oracle.norm());

  Eigen::JacobiSVD<CMat> svd(h);
  CHECK(svd.singularValues()(3) <= 1e-10 * svd.singularValues()(0));
}

TEST_CASE("generate_scenario is deterministic and respects configured ranges",
          "[propagation]") {
  SystemParams sys = desk_params();
  ScenarioConfig cfg;
  cfg.targets.push_back({45.0, 40.0, 10.0, 10.0});

  const Scenario a = generate_scenario(cfg, sys, 77);
  const Scenario b = generate_scenario(cfg, sys, 77);
  REQUIRE(a.paths.size() == 5);
  REQUIRE(a.paths.size() == b.paths.size());
  for (std::size_t l = 0; l < a.paths.size(); ++l) {
    CHECK(a.paths[l].gain == b.paths[l].gain);
    CHECK(a.paths[l].delay == b.paths[l].delay);
    CHECK(a.paths[l].aoa == b.paths[l].aoa);
    CHECK(a.paths[l].aod == b.paths[l].aod);
  }
  CHECK(a.targets[0].reflection == b.targets[0].reflection);

  CHECK(std::abs(rad_to_deg(a.paths[0].aod)) <= 60.0);
  const double los_mag = std::abs(a.paths[0].gain);
  const double lambda = sys.wavelength();
  CHECK(std::abs(los_mag - lambda / (4.0 * pi * 50.0)) <= 1e-15);
  for (std::size_t l = 1; l < a.paths.size(); ++l) {
    const double ratio_db = 20.0 * std::log10(std::abs(a.paths[l].gain) / los_mag);
    CHECK(ratio_db <= -5.0);
    CHECK(ratio_db >= -15.0);
    CHECK(a.paths[l].delay >= a.paths[0].delay);
  }
}

TEST_CASE("generate_scenario target obeys the radar range equation", "[propagation]") {
  SystemParams sys = desk_params();
  ScenarioConfig cfg;
  cfg.targets.push_back({10.0, 40.0, 5.0, 10.0});
  const Scenario sc = generate_scenario(cfg, sys, 5);
  const TargetSpec& t = sc.targets[0];

  const double lambda = sys.wavelength();
  const double expect = std::sqrt(lambda * lambda * 10.0 /
                                  (std::pow(4.0 * pi, 3) * std::pow(40.0, 4)));
  CHECK(std::abs(std::abs(t.reflection) - expect) <= 1e-15);
  // Frozen magnitude for the 28 GHz / 40 m / 10 m^2 point: 4.7504e-7.
  CHECK(std::abs(std::abs(t.reflection) - 4.7504e-7) <= 1e-3 * 4.7504e-7);
  CHECK(std::abs(t.round_trip - 2.0 * 40.0 / speed_of_light) <= 1e-12 * t.round_trip);
  CHECK(std::abs(t.doppler - 2.0 * 5.0 / lambda) <= 1e-9);

  ScenarioConfig bad = cfg;
  bad.ms_distance_m = -1.0;
  CHECK_THROWS_AS(generate_scenario(bad, sys, 1), config_error);
  bad = cfg;
  bad.targets[0].range_m = 0.0;
  CHECK_THROWS_AS(generate_scenario(bad, sys, 1), config_error);
}

TEST_CASE("generate_scenario distributions stay inside their bands over many seeds",
          "[propagation]") {
  SystemParams sys = desk_params();
  ScenarioConfig cfg;
  double lo_aod = 1e9, hi_aod = -1e9;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const Scenario sc = generate_scenario(cfg, sys, seed);
    const double aod_deg = rad_to_deg(sc.paths[0].aod);
    lo_aod = std::min(lo_aod, aod_deg);
    hi_aod = std::max(hi_aod, aod_deg);
    const double los_mag = std::abs(sc.paths[0].gain);
    for (std::size_t l = 1; l < sc.paths.size(); ++l) {
      const double db = 20.0 * std::log10(std::abs(sc.paths[l].gain) / los_mag);
      REQUIRE(db <= -5.0);
      REQUIRE(db >= -15.0);
    }
  }
  CHECK(lo_aod >= -60.0);
  CHECK(hi_aod <= 60.0);
  // The draw actually exercises most of the admissible interval.
  CHECK(lo_aod <= -55.0);
  CHECK(hi_aod >= 55.0);
}

TEST_CASE("build_channels assembles a consistent ChannelSet", "[propagation]") {
  SystemParams sys = desk_params();
  ScenarioConfig cfg;
  cfg.los_aod_deg = 10.0;
  cfg.targets.push_back({45.0, 40.0, 10.0, 10.0});
  const Scenario sc = generate_scenario(cfg, sys, 9);
  const ChannelSet ch = build_channels(sc, sys);

  REQUIRE(int(ch.downlink.size()) == sys.n_subcarriers);
  CHECK(ch.h(0).rows() == sys.n_ms);
  CHECK(ch.h(0).cols() == sys.n_bs);
  const double n2 = double(sys.n_bs) * double(sys.n_bs);
  CHECK(std::abs(ch.si.squaredNorm() - n2) <= 1e-8 * n2);
  CHECK(ch.target(3, 2).rows() == sys.n_bs);
  CHECK(std::abs(rad_to_deg(sc.paths[0].aod) - 10.0) <= 1e-12);
  // rho at the default 60 dB SI-to-noise.
  CHECK(std::abs(sc.si_power - sys.noise_w() * 1e6) <= 1e-9 * sc.si_power);
}
