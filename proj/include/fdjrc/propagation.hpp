#ifndef FDJRC_PROPAGATION_HPP
#define FDJRC_PROPAGATION_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "fdjrc/common.hpp"

namespace fdjrc {

/// Uniform linear array described in absolute coordinates.
struct UlaSpec {
  int n_ant = 0;
  double element_spacing = 0.0;  ///< meters
  double wavelength = 0.0;       ///< meters
  std::array<double, 3> origin = {0.0, 0.0, 0.0};
  std::array<double, 3> axis = {1.0, 0.0, 0.0};  ///< unit vector
};

/// One geometric downlink path.
struct PathSpec {
  cplx gain;          ///< alpha_l
  double delay = 0.0; ///< seconds
  double aoa = 0.0;   ///< radians at the MS
  double aod = 0.0;   ///< radians at the BS
};

/// One point target observed by the collocated BS arrays.
struct TargetSpec {
  cplx reflection;          ///< alpha_t
  double doppler = 0.0;     ///< Hz, two-way: f_D = 2 v / lambda
  double round_trip = 0.0;  ///< seconds, 2 * range / c
  double angle = 0.0;       ///< radians, AoA = AoD
  double range = 0.0;       ///< meters
  double velocity = 0.0;    ///< m/s
  double rcs = 0.0;         ///< m^2
};

/// Wanted target placement before random phases are drawn.
struct TargetPlacement {
  double angle_deg = 0.0;
  double range_m = 0.0;
  double velocity_mps = 0.0;
  double rcs_m2 = 10.0;
};

/// System-level constants shared by every module.
struct SystemParams {
  int n_bs = 32;
  int n_ms = 16;
  int n_rf_bs = 4;
  int n_rf_ms = 4;
  int n_streams = 4;
  int n_subcarriers = 792;
  int n_symbols = 14;
  double subcarrier_spacing_hz = 120e3;
  double symbol_duration_s = 8.92e-6;
  double carrier_hz = 28e9;
  double bandwidth_hz = 100e6;
  double spacing_wavelengths = 0.5;
  double si_separation_wavelengths = 6.0;
  double tx_power_dbm = 20.0;
  double noise_dbm = -93.8;

  double wavelength() const { return speed_of_light / carrier_hz; }
  double tx_power_w() const { return dbm_to_watt(tx_power_dbm); }
  double noise_w() const { return dbm_to_watt(noise_dbm); }
};

/// Random-scenario knobs; angles in degrees at this interface.
struct ScenarioConfig {
  double ms_distance_m = 50.0;
  double los_aod_limit_deg = 60.0;
  std::optional<double> los_aod_deg;  ///< fixed LoS departure when set
  int n_paths = 5;                    ///< total including the LoS path
  double nlos_excess_db_min = 5.0;
  double nlos_excess_db_max = 15.0;
  double nlos_max_excess_delay_s = 200e-9;
  double si_to_noise_db = 60.0;
  std::vector<TargetPlacement> targets;
};

struct Scenario {
  UlaSpec bs_tx;
  UlaSpec bs_rx;
  UlaSpec ms;
  std::vector<PathSpec> paths;  ///< paths[0] is the LoS path
  std::vector<TargetSpec> targets;
  double si_power = 0.0;  ///< rho, linear
  std::uint64_t seed = 0;
};

/**
 * @brief Array response for a ULA: entry k = exp(j 2 pi (d/lambda) k sin(angle)).
 *
 * Phases are referenced to element 0, so the array origin does not appear.
 */
inline CVec ula_response(const UlaSpec& spec, double angle) {
  require(spec.n_ant >= 1, "ula_response: array must have at least one element");
  require(spec.element_spacing > 0 && spec.wavelength > 0,
          "ula_response: spacing and wavelength must be positive");
  require(std::abs(angle) <= pi / 2 + 1e-12, "ula_response: |angle| must be <= pi/2");

  const double step = 2.0 * pi * (spec.element_spacing / spec.wavelength) * std::sin(angle);
  CVec a(spec.n_ant);
  for (int k = 0; k < spec.n_ant; ++k) a(k) = std::polar(1.0, step * k);
  return a;
}

namespace detail {

inline std::array<double, 3> element_position(const UlaSpec& s, int k) {
  return {s.origin[0] + k * s.element_spacing * s.axis[0],
          s.origin[1] + k * s.element_spacing * s.axis[1],
          s.origin[2] + k * s.element_spacing * s.axis[2]};
}

inline double distance(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace detail

/**
 * @brief Near-field LoS self-interference channel between collocated arrays.
 *
 * Entry (p, q) is (gamma / d_pq) exp(-j 2 pi d_pq / lambda) with d_pq the
 * distance from receive element p to transmit element q, and gamma scaled so
 * that ||H_SI||_F^2 = n_ant^2.
 */
inline CMat si_channel(const UlaSpec& tx, const UlaSpec& rx) {
  require(tx.n_ant == rx.n_ant, "si_channel: arrays must have matching sizes");
  require(tx.n_ant >= 1, "si_channel: empty array");
  require(tx.wavelength > 0, "si_channel: wavelength must be positive");

  const int n = tx.n_ant;
  CMat h(n, n);
  for (int p = 0; p < n; ++p) {
    const auto rp = detail::element_position(rx, p);
    for (int q = 0; q < n; ++q) {
      const double d = detail::distance(rp, detail::element_position(tx, q));
      if (d <= 0.0)
        throw contract_error("si_channel: coincident transmit/receive elements");
      h(p, q) = std::polar(1.0 / d, -2.0 * pi * d / tx.wavelength);
    }
  }
  return (static_cast<double>(n) / h.norm()) * h;
}

/// Per-subcarrier downlink channels H_m = sum_l alpha_l e^{-j2pi m tau_l df} a_MS a_BS^H.
inline std::vector<CMat> downlink_channels(const std::vector<PathSpec>& paths,
                                           const UlaSpec& bs, const UlaSpec& ms,
                                           int n_subcarriers, double subcarrier_spacing) {
  require(!paths.empty(), "downlink_channels: path list must be non-empty");
  require(n_subcarriers >= 1, "downlink_channels: need at least one subcarrier");

  std::vector<CVec> a_ms, a_bs;
  a_ms.reserve(paths.size());
  a_bs.reserve(paths.size());
  for (const auto& p : paths) {
    a_ms.push_back(ula_response(ms, p.aoa));
    a_bs.push_back(ula_response(bs, p.aod));
  }

  std::vector<CMat> h(n_subcarriers);
  for (int m = 0; m < n_subcarriers; ++m) {
    CMat hm = CMat::Zero(ms.n_ant, bs.n_ant);
    for (std::size_t l = 0; l < paths.size(); ++l) {
      const cplx w = paths[l].gain *
                     std::polar(1.0, -2.0 * pi * m * paths[l].delay * subcarrier_spacing);
      hm.noalias() += w * (a_ms[l] * a_bs[l].adjoint());
    }
    h[m] = std::move(hm);
  }
  return h;
}

/// Target channel at subcarrier m, symbol n: sum_k alpha_k e^{j2pi(nT f_D - m tau df)} a a^H.
inline CMat target_channel(const std::vector<TargetSpec>& targets, const UlaSpec& bs,
                           int m, int n, double subcarrier_spacing,
                           double symbol_duration) {
  require(m >= 0 && n >= 0, "target_channel: indices must be non-negative");
  CMat h = CMat::Zero(bs.n_ant, bs.n_ant);
  for (const auto& t : targets) {
    const CVec a = ula_response(bs, t.angle);
    const double phase = 2.0 * pi * (n * symbol_duration * t.doppler -
                                     m * t.round_trip * subcarrier_spacing);
    h.noalias() += (t.reflection * std::polar(1.0, phase)) * (a * a.adjoint());
  }
  return h;
}

/// Immutable bundle of everything the designers and the radar chain consume.
struct ChannelSet {
  std::vector<CMat> downlink;  ///< M entries, N_MS x N_BS
  CMat si;                     ///< N_BS x N_BS, Frobenius norm N_BS
  std::vector<TargetSpec> targets;
  std::vector<CVec> target_steering;  ///< cached a_BS(theta_k)
  UlaSpec bs_rx;
  double subcarrier_spacing = 0.0;
  double symbol_duration = 0.0;
  int n_subcarriers = 0;
  int n_symbols = 0;

  const CMat& h(int m) const { return downlink.at(static_cast<std::size_t>(m)); }

  CMat target(int m, int n) const {
    return target_channel(targets, bs_rx, m, n, subcarrier_spacing, symbol_duration);
  }
};

inline ChannelSet build_channels(const Scenario& sc, const SystemParams& sys) {
  ChannelSet out;
  out.downlink = downlink_channels(sc.paths, sc.bs_tx, sc.ms, sys.n_subcarriers,
                                   sys.subcarrier_spacing_hz);
  out.si = si_channel(sc.bs_tx, sc.bs_rx);
  out.targets = sc.targets;
  out.bs_rx = sc.bs_rx;
  out.target_steering.reserve(sc.targets.size());
  for (const auto& t : sc.targets) out.target_steering.push_back(ula_response(sc.bs_rx, t.angle));
  out.subcarrier_spacing = sys.subcarrier_spacing_hz;
  out.symbol_duration = sys.symbol_duration_s;
  out.n_subcarriers = sys.n_subcarriers;
  out.n_symbols = sys.n_symbols;
  for (const auto& m : out.downlink) require_finite(m, "downlink channel");
  require_finite(out.si, "self-interference channel");
  return out;
}

namespace detail {

inline void validate_scenario_config(const ScenarioConfig& cfg) {
  if (cfg.ms_distance_m <= 0)
    throw config_error("scenario: ms_distance_m must be positive");
  if (cfg.los_aod_limit_deg <= 0 || cfg.los_aod_limit_deg > 90)
    throw config_error("scenario: los_aod_limit_deg must be in (0, 90]");
  if (cfg.los_aod_deg && std::abs(*cfg.los_aod_deg) > 90)
    throw config_error("scenario: los_aod_deg must be within [-90, 90]");
  if (cfg.n_paths < 1) throw config_error("scenario: n_paths must be at least 1");
  if (cfg.nlos_excess_db_min < 0 || cfg.nlos_excess_db_max < cfg.nlos_excess_db_min)
    throw config_error("scenario: NLoS excess-dB band is invalid");
  if (cfg.nlos_max_excess_delay_s < 0)
    throw config_error("scenario: nlos_max_excess_delay_s must be non-negative");
  for (const auto& t : cfg.targets) {
    if (t.range_m <= 0) throw config_error("scenario: target range must be positive");
    if (t.rcs_m2 < 0) throw config_error("scenario: target rcs must be non-negative");
    if (std::abs(t.angle_deg) > 90)
      throw config_error("scenario: target angle must be within [-90, 90] degrees");
  }
}

}  // namespace detail

/**
 * @brief Seeded random scenario draw.
 *
 * Draw order is part of the determinism contract: LoS departure angle (unless
 * fixed by the config), LoS arrival angle, LoS phase; then per NLoS path
 * departure, arrival, excess attenuation in dB, phase, excess delay; then one
 * reflection phase per target.  LoS magnitude follows free-space path loss
 * lambda/(4 pi d); target reflection magnitudes follow the radar range
 * equation sqrt(lambda^2 rcs / ((4 pi)^3 d^4)).
 */
inline Scenario generate_scenario(const ScenarioConfig& cfg, const SystemParams& sys,
                                  std::uint64_t seed) {
  detail::validate_scenario_config(cfg);
  const double lambda = sys.wavelength();
  const double spacing = sys.spacing_wavelengths * lambda;

  Scenario sc;
  sc.seed = seed;
  sc.bs_tx = {sys.n_bs, spacing, lambda, {0, 0, 0}, {1, 0, 0}};
  sc.bs_rx = {sys.n_bs, spacing, lambda,
              {0, 0, sys.si_separation_wavelengths * lambda}, {1, 0, 0}};
  sc.ms = {sys.n_ms, spacing, lambda, {cfg.ms_distance_m, 0, 0}, {1, 0, 0}};
  sc.si_power = sys.noise_w() * db_to_linear(cfg.si_to_noise_db);

  Rng rng(seed);

  PathSpec los;
  los.aod = cfg.los_aod_deg ? deg_to_rad(*cfg.los_aod_deg)
                            : deg_to_rad(rng.uniform(-cfg.los_aod_limit_deg,
                                                     cfg.los_aod_limit_deg));
  los.aoa = deg_to_rad(rng.uniform(-90.0, 90.0));
  const double los_mag = lambda / (4.0 * pi * cfg.ms_distance_m);
  los.gain = std::polar(los_mag, rng.uniform(0.0, 2.0 * pi));
  los.delay = cfg.ms_distance_m / speed_of_light;
  sc.paths.push_back(los);

  for (int l = 1; l < cfg.n_paths; ++l) {
    PathSpec p;
    p.aod = deg_to_rad(rng.uniform(-90.0, 90.0));
    p.aoa = deg_to_rad(rng.uniform(-90.0, 90.0));
    const double excess_db = rng.uniform(cfg.nlos_excess_db_min, cfg.nlos_excess_db_max);
    const double phase = rng.uniform(0.0, 2.0 * pi);
    p.gain = std::polar(los_mag * std::pow(10.0, -excess_db / 20.0), phase);
    p.delay = los.delay + rng.uniform(0.0, cfg.nlos_max_excess_delay_s);
    sc.paths.push_back(p);
  }

  for (const auto& tp : cfg.targets) {
    TargetSpec t;
    t.angle = deg_to_rad(tp.angle_deg);
    t.range = tp.range_m;
    t.velocity = tp.velocity_mps;
    t.rcs = tp.rcs_m2;
    const double mag = std::sqrt(lambda * lambda * tp.rcs_m2 /
                                 (std::pow(4.0 * pi, 3) * std::pow(tp.range_m, 4)));
    t.reflection = std::polar(mag, rng.uniform(0.0, 2.0 * pi));
    t.doppler = 2.0 * tp.velocity_mps / lambda;
    t.round_trip = 2.0 * tp.range_m / speed_of_light;
    sc.targets.push_back(t);
  }
  return sc;
}

}  // namespace fdjrc

#endif  // FDJRC_PROPAGATION_HPP
