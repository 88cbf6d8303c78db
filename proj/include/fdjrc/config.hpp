#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "common.hpp"
#include "propagation.hpp"
#include "txdesign.hpp"

namespace fdjrc {

/// The three bundled experiment protocols.
enum class ExperimentId { se_vs_power, sinr_vs_si, radar_maps };

inline const char* to_string(ExperimentId id) {
  switch (id) {
    case ExperimentId::se_vs_power: return "se_vs_power";
    case ExperimentId::sinr_vs_si: return "sinr_vs_si";
    case ExperimentId::radar_maps: return "radar_maps";
  }
  return "?";
}

inline ExperimentId parse_experiment_id(const std::string& s) {
  if (s == "se_vs_power") return ExperimentId::se_vs_power;
  if (s == "sinr_vs_si") return ExperimentId::sinr_vs_si;
  if (s == "radar_maps") return ExperimentId::radar_maps;
  throw config_error("unknown experiment '" + s +
                     "'; valid values: se_vs_power, sinr_vs_si, radar_maps");
}

/// Receive-side combiner stage of a method pipeline.
enum class CombinerKind { none, bcd, nsp, steering, identity };

inline const char* to_string(CombinerKind k) {
  switch (k) {
    case CombinerKind::none: return "none";
    case CombinerKind::bcd: return "bcd";
    case CombinerKind::nsp: return "nsp";
    case CombinerKind::steering: return "steering";
    case CombinerKind::identity: return "identity";
  }
  return "?";
}

inline CombinerKind parse_combiner_kind(const std::string& s) {
  if (s == "bcd") return CombinerKind::bcd;
  if (s == "nsp") return CombinerKind::nsp;
  if (s == "steering") return CombinerKind::steering;
  if (s == "identity") return CombinerKind::identity;
  throw config_error("unknown combiner '" + s +
                     "'; valid values: bcd, nsp, steering, identity");
}

/**
 * @brief One method pipeline: a precoder design, optionally paired with a
 * BS combiner as "precoder+combiner" (e.g. "proposed+bcd").
 *
 * label keeps the user's spelling for result records.
 */
struct MethodSpec {
  PrecoderMethod precoder = PrecoderMethod::proposed;
  CombinerKind combiner = CombinerKind::none;
  std::string label;
};

inline MethodSpec parse_method_spec(const std::string& s) {
  MethodSpec spec;
  spec.label = s;
  const auto plus = s.find('+');
  if (plus == std::string::npos) {
    spec.precoder = parse_precoder_method(s);
    return spec;
  }
  if (s.find('+', plus + 1) != std::string::npos)
    throw config_error("malformed method '" + s + "'; expected 'precoder+combiner'");
  spec.precoder = parse_precoder_method(s.substr(0, plus));
  spec.combiner = parse_combiner_kind(s.substr(plus + 1));
  return spec;
}

/// Map-processing grid: transform sizes as multiples of the frame dimensions.
struct RadarGrid {
  int range_oversample = 10;     ///< rows of the oversampled map per subcarrier
  int doppler_oversample = 200;  ///< columns of the oversampled map per symbol
  std::vector<double> angle_grid_deg;  ///< probe grid; empty = the target angles
};

/**
 * @brief Complete description of one experiment run.
 *
 * Defaults (and the bundled presets) follow the evaluation setup: 32-antenna
 * BS arrays with 4 RF chains, 16-antenna MS, 4 streams, 792 subcarriers at
 * 120 kHz over 14 symbols of 8.92 us, 28 GHz carrier, -93.8 dBm noise,
 * thresholds tau_T = 0.3 or 0.35 and tau_R = 0.7 as fractions of the array
 * size, eps1 = 0.1, eps2 = 0.3, and 10x/200x map oversampling.
 */
struct ExperimentConfig {
  ExperimentId experiment = ExperimentId::se_vs_power;
  int trials = 100;
  std::uint64_t base_seed = 1;
  std::vector<std::string> methods;
  std::vector<double> sweep;  ///< P_t in dBm, or SI-to-noise in dB; unused for maps
  SystemParams system;
  DesignConfig design;
  ScenarioConfig scenario;
  RadarGrid radar;

  int mbar() const { return radar.range_oversample * system.n_subcarriers; }
  int nbar() const { return radar.doppler_oversample * system.n_symbols; }
};

/// Receive gain threshold as an amplitude bound on |w^H a| for unit-modulus w.
inline double rx_gain_threshold(const ExperimentConfig& cfg) {
  return amplitude_threshold(cfg.design.tau_r_fraction, cfg.design.gain_semantics,
                             cfg.system.n_bs, std::sqrt(double(cfg.system.n_bs)));
}

/**
 * @brief Baseline configuration for each experiment.
 *
 * se_vs_power / sinr_vs_si use the link-evaluation scene: one 10 m^2 target
 * at 45 deg and 40 m, the MS at 50 m with a random LoS angle in +-60 deg.
 * radar_maps fixes the MS LoS at 10 deg and probes four 10 m^2 targets, one
 * frame per target. The SINR and map experiments raise tau_T to 0.35.
 */
inline ExperimentConfig default_config(ExperimentId id) {
  ExperimentConfig cfg;
  cfg.experiment = id;
  cfg.scenario.targets = {TargetPlacement{45.0, 40.0, 10.0, 10.0}};
  switch (id) {
    case ExperimentId::se_vs_power:
      cfg.methods = {"proposed", "coherent_eigenvector", "optimal_svd"};
      cfg.sweep = {-10, -5, 0, 5, 10, 15, 20, 25, 30};
      break;
    case ExperimentId::sinr_vs_si:
      cfg.methods = {"proposed+bcd", "proposed+nsp", "coherent_eigenvector+bcd",
                     "coherent_eigenvector+steering", "coherent_eigenvector+identity"};
      cfg.sweep = {0, 10, 20, 30, 40, 50, 60, 70, 80, 90};
      cfg.design.tau_t_fraction = 0.35;
      break;
    case ExperimentId::radar_maps:
      cfg.methods = {"proposed+bcd"};
      cfg.sweep = {};
      cfg.trials = 1;
      cfg.design.tau_t_fraction = 0.35;
      cfg.scenario.los_aod_deg = 10.0;
      // Target azimuths sit where the per-column transmit gain threshold is
      // attainable alongside the SI null: for this array geometry the steering
      // vector decorrelates from the SI channel only beyond roughly +-43 deg.
      cfg.scenario.targets = {
          TargetPlacement{-58.0, 25.0, 8.0, 10.0},
          TargetPlacement{-50.0, 40.0, 12.0, 10.0},
          TargetPlacement{46.0, 55.0, 16.0, 10.0},
          TargetPlacement{54.0, 70.0, 20.0, 10.0},
      };
      break;
  }
  return cfg;
}

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& ctx,
                       std::initializer_list<const char*> allowed) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        known = true;
        break;
      }
    if (!known) {
      std::string msg = "unknown key '" + item.key() + "' in " + ctx + "; known keys:";
      for (const char* k : allowed) {
        msg += ' ';
        msg += k;
      }
      throw config_error(msg);
    }
  }
}

inline void require_object(const nlohmann::json& j, const std::string& ctx) {
  if (!j.is_object()) throw config_error(ctx + " must be a JSON object");
}

template <typename T>
T get_as(const nlohmann::json& j, const std::string& ctx) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw config_error(ctx + ": " + e.what());
  }
}

/// Assigns dst from j[key] when present; key must already be whitelisted.
template <typename T>
void maybe(const nlohmann::json& j, const char* key, const std::string& ctx, T& dst) {
  if (j.contains(key)) dst = get_as<T>(j.at(key), ctx + "." + key);
}

}  // namespace detail

/// Field-level sanity checks shared by the loader and run_experiment.
inline void validate_config(const ExperimentConfig& cfg) {
  const SystemParams& s = cfg.system;
  if (cfg.trials < 1) throw config_error("trials must be at least 1");
  if (s.n_bs < 1 || s.n_ms < 1) throw config_error("system: array sizes must be positive");
  if (s.n_rf_bs < 1 || s.n_rf_bs > s.n_bs)
    throw config_error("system: need 1 <= n_rf <= n_bs");
  if (s.n_rf_ms < 1 || s.n_rf_ms > s.n_ms)
    throw config_error("system: need 1 <= n_rf <= n_ms");
  if (s.n_streams < 1 || s.n_streams > s.n_rf_bs || s.n_streams > s.n_rf_ms)
    throw config_error("system: need 1 <= n_streams <= n_rf");
  if (s.n_subcarriers < 1 || s.n_symbols < 1)
    throw config_error("system: subcarriers and symbols must be positive");
  if (!(s.subcarrier_spacing_hz > 0) || !(s.symbol_duration_s > 0) || !(s.carrier_hz > 0))
    throw config_error("system: spacing, duration, and carrier must be positive");
  if (!(s.spacing_wavelengths > 0))
    throw config_error("system: element_spacing_wavelengths must be positive");

  const DesignConfig& d = cfg.design;
  if (!(d.tau_t_fraction > 0) || d.tau_t_fraction > 1.0)
    throw config_error("design: tau_t_fraction must lie in (0, 1]");
  if (!(d.tau_r_fraction > 0) || d.tau_r_fraction > 1.0)
    throw config_error("design: tau_r_fraction must lie in (0, 1]");
  if (d.ridge < 0) throw config_error("design: ridge must be non-negative");
  if (d.eps1 < 0) throw config_error("design: eps1 must be non-negative");
  if (!(d.eps2 > 0)) throw config_error("design: eps2 must be positive");
  if (!(d.block_fraction > 0) || d.block_fraction > 1.0)
    throw config_error("design: block_fraction must lie in (0, 1]");
  if (d.bcd_outer_iters < 1 || d.altmin_max_iter < 1)
    throw config_error("design: iteration counts must be at least 1");
  if (!(d.nsp_energy_threshold > 0) || d.nsp_energy_threshold > 1.0)
    throw config_error("design: nsp_energy_threshold must lie in (0, 1]");

  if (cfg.radar.range_oversample < 1 || cfg.radar.doppler_oversample < 1)
    throw config_error("radar: oversample factors must be at least 1");

  if (cfg.scenario.targets.empty())
    throw config_error("scenario: need at least one target (the radar-gain direction)");
  for (const TargetPlacement& t : cfg.scenario.targets) {
    if (!(t.range_m > 0)) throw config_error("scenario: target range_m must be positive");
    if (!(t.rcs_m2 > 0)) throw config_error("scenario: target rcs_m2 must be positive");
  }

  if (cfg.methods.empty()) throw config_error("methods must be non-empty");
  for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
    const MethodSpec spec = parse_method_spec(cfg.methods[i]);
    if (cfg.experiment == ExperimentId::se_vs_power) {
      if (spec.combiner != CombinerKind::none)
        throw config_error(
            "method '" + spec.label +
            "': se_vs_power takes precoder-only methods; valid values: proposed, "
            "coherent_eigenvector, optimal_svd");
    } else if (spec.combiner == CombinerKind::none) {
      throw config_error("method '" + spec.label + "': " +
                         std::string(to_string(cfg.experiment)) +
                         " takes 'precoder+combiner' methods; valid combiners: bcd, "
                         "nsp, steering, identity");
    }
    for (std::size_t k = 0; k < i; ++k)
      if (cfg.methods[k] == cfg.methods[i])
        throw config_error("duplicate method '" + cfg.methods[i] + "'");
  }

  if (cfg.experiment != ExperimentId::radar_maps) {
    if (cfg.sweep.empty()) throw config_error("sweep must be non-empty");
    for (std::size_t i = 0; i < cfg.sweep.size(); ++i)
      for (std::size_t k = 0; k < i; ++k)
        if (cfg.sweep[k] == cfg.sweep[i])
          throw config_error("duplicate sweep value (records would collide)");
  } else {
    // Each target is keyed by its angle in the result records.
    const auto& ts = cfg.scenario.targets;
    for (std::size_t i = 0; i < ts.size(); ++i)
      for (std::size_t k = 0; k < i; ++k)
        if (ts[k].angle_deg == ts[i].angle_deg)
          throw config_error("radar_maps: target angles must be distinct");
  }
}

/**
 * @brief Builds a config from parsed JSON.
 *
 * The experiment id selects the defaults; every other key overrides one
 * field. Unknown keys anywhere in the document are rejected.
 */
inline ExperimentConfig load_config(const nlohmann::json& j) {
  detail::require_object(j, "config");
  detail::check_keys(j, "config",
                     {"experiment", "trials", "base_seed", "methods", "sweep", "system",
                      "design", "scenario", "radar"});

  ExperimentId id = ExperimentId::se_vs_power;
  if (j.contains("experiment"))
    id = parse_experiment_id(detail::get_as<std::string>(j.at("experiment"), "experiment"));
  ExperimentConfig cfg = default_config(id);

  detail::maybe(j, "trials", "config", cfg.trials);
  detail::maybe(j, "base_seed", "config", cfg.base_seed);
  detail::maybe(j, "methods", "config", cfg.methods);
  detail::maybe(j, "sweep", "config", cfg.sweep);

  if (j.contains("system")) {
    const nlohmann::json& js = j.at("system");
    detail::require_object(js, "system");
    detail::check_keys(js, "system",
                       {"n_bs", "n_ms", "n_rf", "n_streams", "subcarriers", "symbols",
                        "subcarrier_spacing_hz", "symbol_duration_s", "carrier_hz",
                        "bandwidth_hz", "element_spacing_wavelengths",
                        "array_separation_wavelengths", "tx_power_dbm", "noise_dbm"});
    SystemParams& s = cfg.system;
    detail::maybe(js, "n_bs", "system", s.n_bs);
    detail::maybe(js, "n_ms", "system", s.n_ms);
    if (js.contains("n_rf")) {
      s.n_rf_bs = detail::get_as<int>(js.at("n_rf"), "system.n_rf");
      s.n_rf_ms = s.n_rf_bs;
    }
    detail::maybe(js, "n_streams", "system", s.n_streams);
    detail::maybe(js, "subcarriers", "system", s.n_subcarriers);
    detail::maybe(js, "symbols", "system", s.n_symbols);
    detail::maybe(js, "subcarrier_spacing_hz", "system", s.subcarrier_spacing_hz);
    detail::maybe(js, "symbol_duration_s", "system", s.symbol_duration_s);
    detail::maybe(js, "carrier_hz", "system", s.carrier_hz);
    detail::maybe(js, "bandwidth_hz", "system", s.bandwidth_hz);
    detail::maybe(js, "element_spacing_wavelengths", "system", s.spacing_wavelengths);
    detail::maybe(js, "array_separation_wavelengths", "system",
                  s.si_separation_wavelengths);
    detail::maybe(js, "tx_power_dbm", "system", s.tx_power_dbm);
    detail::maybe(js, "noise_dbm", "system", s.noise_dbm);
  }

  if (j.contains("design")) {
    const nlohmann::json& jd = j.at("design");
    detail::require_object(jd, "design");
    detail::check_keys(jd, "design",
                       {"tau_t_fraction", "tau_r_fraction", "gain_semantics", "eps1",
                        "eps2", "ridge", "block_fraction", "bcd_outer_iters",
                        "nsp_energy_threshold", "altmin_max_iter", "altmin_tol"});
    DesignConfig& d = cfg.design;
    detail::maybe(jd, "tau_t_fraction", "design", d.tau_t_fraction);
    detail::maybe(jd, "tau_r_fraction", "design", d.tau_r_fraction);
    if (jd.contains("gain_semantics"))
      d.gain_semantics = parse_gain_semantics(
          detail::get_as<std::string>(jd.at("gain_semantics"), "design.gain_semantics"));
    detail::maybe(jd, "eps1", "design", d.eps1);
    detail::maybe(jd, "eps2", "design", d.eps2);
    detail::maybe(jd, "ridge", "design", d.ridge);
    detail::maybe(jd, "block_fraction", "design", d.block_fraction);
    detail::maybe(jd, "bcd_outer_iters", "design", d.bcd_outer_iters);
    detail::maybe(jd, "nsp_energy_threshold", "design", d.nsp_energy_threshold);
    detail::maybe(jd, "altmin_max_iter", "design", d.altmin_max_iter);
    detail::maybe(jd, "altmin_tol", "design", d.altmin_tol);
  }

  if (j.contains("scenario")) {
    const nlohmann::json& jc = j.at("scenario");
    detail::require_object(jc, "scenario");
    detail::check_keys(jc, "scenario",
                       {"ms_distance_m", "los_aod_limit_deg", "los_aod_deg", "n_paths",
                        "nlos_excess_db_min", "nlos_excess_db_max",
                        "nlos_max_excess_delay_s", "si_to_noise_db", "targets"});
    ScenarioConfig& c = cfg.scenario;
    detail::maybe(jc, "ms_distance_m", "scenario", c.ms_distance_m);
    detail::maybe(jc, "los_aod_limit_deg", "scenario", c.los_aod_limit_deg);
    if (jc.contains("los_aod_deg")) {
      if (jc.at("los_aod_deg").is_null())
        c.los_aod_deg.reset();
      else
        c.los_aod_deg = detail::get_as<double>(jc.at("los_aod_deg"), "scenario.los_aod_deg");
    }
    detail::maybe(jc, "n_paths", "scenario", c.n_paths);
    detail::maybe(jc, "nlos_excess_db_min", "scenario", c.nlos_excess_db_min);
    detail::maybe(jc, "nlos_excess_db_max", "scenario", c.nlos_excess_db_max);
    detail::maybe(jc, "nlos_max_excess_delay_s", "scenario", c.nlos_max_excess_delay_s);
    detail::maybe(jc, "si_to_noise_db", "scenario", c.si_to_noise_db);
    if (jc.contains("targets")) {
      const nlohmann::json& jt = jc.at("targets");
      if (!jt.is_array()) throw config_error("scenario.targets must be an array");
      c.targets.clear();
      for (const nlohmann::json& e : jt) {
        detail::require_object(e, "scenario.targets[]");
        detail::check_keys(e, "scenario.targets[]",
                           {"angle_deg", "range_m", "velocity_mps", "rcs_m2"});
        TargetPlacement t;
        detail::maybe(e, "angle_deg", "scenario.targets[]", t.angle_deg);
        detail::maybe(e, "range_m", "scenario.targets[]", t.range_m);
        detail::maybe(e, "velocity_mps", "scenario.targets[]", t.velocity_mps);
        detail::maybe(e, "rcs_m2", "scenario.targets[]", t.rcs_m2);
        c.targets.push_back(t);
      }
    }
  }

  if (j.contains("radar")) {
    const nlohmann::json& jr = j.at("radar");
    detail::require_object(jr, "radar");
    detail::check_keys(jr, "radar",
                       {"range_oversample", "doppler_oversample", "angle_grid_deg"});
    detail::maybe(jr, "range_oversample", "radar", cfg.radar.range_oversample);
    detail::maybe(jr, "doppler_oversample", "radar", cfg.radar.doppler_oversample);
    detail::maybe(jr, "angle_grid_deg", "radar", cfg.radar.angle_grid_deg);
  }

  validate_config(cfg);
  return cfg;
}

/// Parses JSON text; origin names the source in error messages.
inline ExperimentConfig parse_config_text(const std::string& text,
                                          const std::string& origin) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(origin + ": " + e.what());
  }
  return load_config(j);
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

}  // namespace fdjrc
