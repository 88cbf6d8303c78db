#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "config.hpp"
#include "hybridize.hpp"
#include "metrics.hpp"
#include "propagation.hpp"
#include "radarproc.hpp"
#include "rxcombiner.hpp"
#include "txdesign.hpp"

namespace fdjrc {

/// One scalar measurement; (experiment, method, sweep, trial, metric) is unique.
struct ResultRecord {
  std::string experiment;
  std::string method;
  double sweep = 0.0;
  int trial = 0;
  std::string metric;
  double value = 0.0;
  std::uint64_t seed = 0;
};

namespace detail {

/// FNV-1a hash of the method label; keeps per-method random substreams
/// independent of the position of the method in the config list.
inline std::uint64_t method_tag(const std::string& label) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : label) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Digital design followed by the hybrid factorization actually transmitted.
struct PipelinePrecoders {
  PrecoderSet digital;
  std::vector<CMat> effective;  ///< analog * digital per subcarrier
};

inline PipelinePrecoders pipeline_precoders(const ChannelSet& ch, const CMat& w0,
                                            double angle, const SystemParams& sys,
                                            const DesignConfig& dc, PrecoderMethod pm) {
  PipelinePrecoders out;
  out.digital = design_precoders(ch, w0, angle, sys, dc, pm);
  const HybridFactorization fact =
      pe_altmin(out.digital.mats, sys.n_rf_bs, dc.altmin_max_iter, dc.altmin_tol);
  out.effective.reserve(fact.digital.size());
  for (std::size_t m = 0; m < fact.digital.size(); ++m)
    out.effective.push_back(apply_hybrid(fact, m));
  return out;
}

inline CMat make_combiner(CombinerKind kind, const CMat& h_si,
                          const std::vector<CMat>& precoders, const UlaSpec& bs,
                          double angle, const ExperimentConfig& cfg,
                          std::uint64_t bcd_seed) {
  switch (kind) {
    case CombinerKind::bcd:
      return bcd_combiner(h_si, precoders, bs, angle, rx_gain_threshold(cfg),
                          cfg.design.eps1, cfg.design.eps2, cfg.design.block_fraction,
                          cfg.design.bcd_outer_iters, bcd_seed);
    case CombinerKind::nsp:
      return nsp_combiner(h_si, precoders, bs, angle, cfg.system.n_rf_bs,
                          cfg.design.nsp_energy_threshold);
    case CombinerKind::steering:
      return steering_combiner(bs, angle, cfg.system.n_rf_bs);
    case CombinerKind::identity:
      return identity_combiner(cfg.system.n_bs, cfg.system.n_rf_bs);
    case CombinerKind::none: break;
  }
  throw contract_error("make_combiner: method has no combiner stage");
}

inline LinkBudget base_budget(const SystemParams& sys) {
  LinkBudget b;
  b.tx_power = sys.tx_power_w();
  b.noise_ms = sys.noise_w();
  b.noise_bs = sys.noise_w();
  b.n_streams = sys.n_streams;
  b.si_power = 0.0;
  return b;
}

inline std::vector<MethodSpec> parse_methods(const ExperimentConfig& cfg) {
  std::vector<MethodSpec> specs;
  specs.reserve(cfg.methods.size());
  for (const std::string& s : cfg.methods) specs.push_back(parse_method_spec(s));
  return specs;
}

/// Mean downlink spectral efficiency per method over a transmit-power sweep.
/// The channel realization and the MS combiners are shared across methods.
inline std::vector<ResultRecord> run_se_vs_power(const ExperimentConfig& cfg) {
  const std::vector<MethodSpec> specs = parse_methods(cfg);
  const SystemParams& sys = cfg.system;
  std::vector<ResultRecord> recs;
  for (int t = 0; t < cfg.trials; ++t) {
    const std::uint64_t seed = cfg.base_seed + std::uint64_t(t);
    const Scenario sc = generate_scenario(cfg.scenario, sys, seed);
    const ChannelSet ch = build_channels(sc, sys);
    const double angle = ch.targets.at(0).angle;
    const CMat w0 = steering_combiner(ch.bs_rx, angle, sys.n_rf_bs);

    std::vector<CMat> wms;
    wms.reserve(std::size_t(sys.n_subcarriers));
    for (int m = 0; m < sys.n_subcarriers; ++m)
      wms.push_back(ms_combiner(ch.h(m), sys.n_streams));

    for (const MethodSpec& spec : specs) {
      const PipelinePrecoders pp =
          pipeline_precoders(ch, w0, angle, sys, cfg.design, spec.precoder);
      for (double p_dbm : cfg.sweep) {
        LinkBudget budget = base_budget(sys);
        budget.tx_power = dbm_to_watt(p_dbm);
        double acc = 0.0;
        for (int m = 0; m < sys.n_subcarriers; ++m)
          acc += spectral_efficiency(ch.h(m), pp.effective[std::size_t(m)],
                                     wms[std::size_t(m)], budget);
        recs.push_back({to_string(cfg.experiment), spec.label, p_dbm, t,
                        "mean_se_bps_hz", acc / double(sys.n_subcarriers), seed});
      }
    }
  }
  return recs;
}

/// Radar SINR per pipeline over an SI-to-noise sweep. Designs are reused
/// across the sweep: the SI level only rescales the interference term.
inline std::vector<ResultRecord> run_sinr_vs_si(const ExperimentConfig& cfg) {
  const std::vector<MethodSpec> specs = parse_methods(cfg);
  const SystemParams& sys = cfg.system;
  std::vector<ResultRecord> recs;
  for (int t = 0; t < cfg.trials; ++t) {
    const std::uint64_t seed = cfg.base_seed + std::uint64_t(t);
    const Scenario sc = generate_scenario(cfg.scenario, sys, seed);
    const ChannelSet ch = build_channels(sc, sys);
    const double angle = ch.targets.at(0).angle;
    const CMat w0 = steering_combiner(ch.bs_rx, angle, sys.n_rf_bs);

    for (const MethodSpec& spec : specs) {
      const PipelinePrecoders pp =
          pipeline_precoders(ch, w0, angle, sys, cfg.design, spec.precoder);
      const CMat w = make_combiner(spec.combiner, ch.si, pp.effective, ch.bs_rx, angle,
                                   cfg, derive_seed(seed, method_tag(spec.label)));
      for (double si_db : cfg.sweep) {
        LinkBudget budget = base_budget(sys);
        budget.si_power = sys.noise_w() * db_to_linear(si_db);
        const double sinr = radar_sinr(w, ch, pp.effective, budget, 0, 0);
        recs.push_back({to_string(cfg.experiment), spec.label, si_db, t,
                        "radar_sinr_db", linear_to_db(sinr), seed});
      }
    }
  }
  return recs;
}

/// One frame per target: redesign toward the target, receive, match, and read
/// the map peak. Also probes the per-target range profile of the angle-range
/// image built from the same designs. Sweep column = target angle in degrees.
inline std::vector<ResultRecord> run_radar_maps(const ExperimentConfig& cfg) {
  const std::vector<MethodSpec> specs = parse_methods(cfg);
  const SystemParams& sys = cfg.system;
  const int n_targets = int(cfg.scenario.targets.size());
  std::vector<ResultRecord> recs;
  for (int t = 0; t < cfg.trials; ++t) {
    const std::uint64_t seed = cfg.base_seed + std::uint64_t(t);
    const Scenario sc = generate_scenario(cfg.scenario, sys, seed);
    const ChannelSet ch = build_channels(sc, sys);
    const std::vector<CMat> symbols =
        pilot_symbols(sys.n_subcarriers, sys.n_symbols, sys.n_streams,
                      sys.tx_power_w() / double(sys.n_streams), derive_seed(seed, 1));
    LinkBudget budget = base_budget(sys);
    budget.si_power = sc.si_power;

    for (const MethodSpec& spec : specs) {
      const std::uint64_t tag = method_tag(spec.label);
      std::vector<RadarDesign> designs(static_cast<std::size_t>(n_targets));
      for (int k = 0; k < n_targets; ++k) {
        const double angle = ch.targets.at(std::size_t(k)).angle;
        const CMat w0 = steering_combiner(ch.bs_rx, angle, sys.n_rf_bs);
        PipelinePrecoders pp =
            pipeline_precoders(ch, w0, angle, sys, cfg.design, spec.precoder);
        CMat w = make_combiner(spec.combiner, ch.si, pp.effective, ch.bs_rx, angle,
                               cfg, derive_seed(seed, tag + std::uint64_t(k)));
        designs[std::size_t(k)] = RadarDesign{std::move(pp.effective), std::move(w)};
      }

      for (int k = 0; k < n_targets; ++k) {
        const TargetSpec& target = ch.targets.at(std::size_t(k));
        const RadarDesign& d = designs[std::size_t(k)];
        const std::vector<CMat> frame =
            rx_frame(ch, d.combiner, d.precoders, symbols, budget,
                     derive_seed(seed, tag ^ (0x1000 + std::uint64_t(k))));
        const CMat z =
            build_z(frame, d.combiner, d.precoders, symbols, ch.bs_rx, target.angle);
        const RangeDopplerMap map =
            range_doppler(z, cfg.mbar(), cfg.nbar(), sys.subcarrier_spacing_hz,
                          sys.symbol_duration_s, sys.wavelength());
        const double sweep = cfg.scenario.targets[std::size_t(k)].angle_deg;
        const char* id = to_string(cfg.experiment);
        recs.push_back({id, spec.label, sweep, t, "range_m", map.range(), seed});
        recs.push_back(
            {id, spec.label, sweep, t, "range_error_m", map.range() - target.range, seed});
        recs.push_back(
            {id, spec.label, sweep, t, "velocity_mps", map.velocity_physical(), seed});
        recs.push_back({id, spec.label, sweep, t, "velocity_error_mps",
                        map.velocity_physical() - target.velocity, seed});
      }

      // Range profiles along the per-target beams, one image row each.
      std::vector<double> angles;
      for (int k = 0; k < n_targets; ++k)
        angles.push_back(ch.targets.at(std::size_t(k)).angle);
      const auto design_at = [&](double a) {
        for (int k = 0; k < n_targets; ++k)
          if (angles[std::size_t(k)] == a) return designs[std::size_t(k)];
        throw contract_error("radar_maps: probe angle outside the design cache");
      };
      const AngleRangeMap arm =
          angle_range_map(ch, design_at, angles, cfg.mbar(), symbols, budget,
                          derive_seed(seed, tag ^ 0x2000));
      for (int k = 0; k < n_targets; ++k) {
        int best = 0;
        for (int p = 1; p < arm.magnitudes.cols(); ++p)
          if (arm.magnitudes(k, p) > arm.magnitudes(k, best)) best = p;
        recs.push_back({to_string(cfg.experiment), spec.label,
                        cfg.scenario.targets[std::size_t(k)].angle_deg, t,
                        "profile_range_m", best * arm.range_bin, seed});
      }
    }
  }
  return recs;
}

}  // namespace detail

/**
 * @brief Runs the configured experiment; deterministic given the config.
 *
 * Trial t draws its scenario from base_seed + t, shared by every method
 * (paired comparisons). Records are ordered by (sweep, trial), then by the
 * method order of the config.
 */
inline std::vector<ResultRecord> run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  std::vector<ResultRecord> recs;
  switch (cfg.experiment) {
    case ExperimentId::se_vs_power: recs = detail::run_se_vs_power(cfg); break;
    case ExperimentId::sinr_vs_si: recs = detail::run_sinr_vs_si(cfg); break;
    case ExperimentId::radar_maps: recs = detail::run_radar_maps(cfg); break;
  }
  std::stable_sort(recs.begin(), recs.end(),
                   [](const ResultRecord& a, const ResultRecord& b) {
                     if (a.sweep != b.sweep) return a.sweep < b.sweep;
                     return a.trial < b.trial;
                   });
  return recs;
}

/// Writes records as CSV: fixed header, 9 significant digits, LF endings.
inline void emit_csv(const std::vector<ResultRecord>& records, std::ostream& out) {
  out << "experiment,method,sweep,trial,metric,value,seed\n";
  char num[40];
  for (const ResultRecord& r : records) {
    std::snprintf(num, sizeof num, "%.9g", r.sweep);
    out << r.experiment << ',' << r.method << ',' << num << ',' << r.trial << ','
        << r.metric << ',';
    std::snprintf(num, sizeof num, "%.9g", r.value);
    out << num << ',' << r.seed << '\n';
  }
}

inline void emit_csv(const std::vector<ResultRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot open '" + path + "' for writing");
  emit_csv(records, out);
  out.flush();
  if (!out) throw numeric_error("write failed for '" + path + "'");
}

/// Inverse of emit_csv for the bundled record schema.
inline std::vector<ResultRecord> parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw config_error("results csv: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "experiment,method,sweep,trial,metric,value,seed")
    throw config_error("results csv: unexpected header '" + line + "'");
  std::vector<ResultRecord> out;
  for (int lineno = 2; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i)
      if (i == line.size() || line[i] == ',') {
        f.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    if (f.size() != 7)
      throw config_error("results csv line " + std::to_string(lineno) +
                         ": expected 7 fields");
    try {
      ResultRecord r;
      r.experiment = f[0];
      r.method = f[1];
      r.sweep = std::stod(f[2]);
      r.trial = std::stoi(f[3]);
      r.metric = f[4];
      r.value = std::stod(f[5]);
      r.seed = std::stoull(f[6]);
      out.push_back(std::move(r));
    } catch (const std::exception&) {
      throw config_error("results csv line " + std::to_string(lineno) +
                         ": malformed number");
    }
  }
  return out;
}

inline std::vector<ResultRecord> parse_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open '" + path + "' for reading");
  return parse_csv(in);
}

}  // namespace fdjrc
