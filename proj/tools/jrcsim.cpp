// jrcsim: command-line front end for the fdjrc library.
//
//   jrcsim design     --config cfg.json --angle 45 --out design.csv
//   jrcsim radar      --config cfg.json --out-prefix maps/run1
//   jrcsim experiment --config cfg.json --out results.csv
//
// --seed overrides the config's base_seed. Exit codes: 0 success, 2 invalid
// configuration or command line, 1 runtime failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fdjrc/experiment.hpp"

namespace {

using namespace fdjrc;

/// Mean over subcarriers of ||W^H H_SI F_m||_F / (||W^H H_SI||_F ||F_m||_F).
double mean_relative_si(const CMat& w, const CMat& h_si,
                        const std::vector<CMat>& precoders) {
  const CMat wh = w.adjoint() * h_si;
  const double whn = wh.norm();
  double acc = 0.0;
  for (const CMat& f : precoders) {
    const double scale = whn * f.norm();
    acc += scale > 0.0 ? (wh * f).norm() / scale : 0.0;
  }
  return acc / double(precoders.size());
}

/**
 * @brief One design pass per configured method, all aimed at angle_deg.
 *
 * Emits record-schema CSV (experiment column "design", sweep column = angle in
 * degrees) so the output plugs into the same tooling as experiment runs.
 * Per method: per-column transmit gain of the hybrid precoders, mean mixing
 * weight, whether any subcarrier missed the transmit threshold, and relative
 * SI leakage after the digital and hybrid stages. Methods with a combiner
 * stage add the receive gain, post-combiner leakage, and radar SINR under the
 * scenario's SI level.
 */
int run_design(const ExperimentConfig& cfg, double angle_deg,
               const std::string& out_path) {
  if (!(std::abs(angle_deg) <= 90.0))
    throw config_error("design: --angle must lie in [-90, 90] degrees");
  const double angle = deg_to_rad(angle_deg);
  const SystemParams& sys = cfg.system;
  const std::uint64_t seed = cfg.base_seed;

  const Scenario sc = generate_scenario(cfg.scenario, sys, seed);
  const ChannelSet ch = build_channels(sc, sys);
  LinkBudget budget = detail::base_budget(sys);
  budget.si_power = sc.si_power;

  std::vector<ResultRecord> recs;
  for (const std::string& s : cfg.methods) {
    const MethodSpec spec = parse_method_spec(s);
    const auto push = [&](const char* metric, double v) {
      recs.push_back({"design", spec.label, angle_deg, 0, metric, v, seed});
    };

    const CMat w0 = steering_combiner(ch.bs_rx, angle, sys.n_rf_bs);
    const detail::PipelinePrecoders pp =
        detail::pipeline_precoders(ch, w0, angle, sys, cfg.design, spec.precoder);

    double gmin = std::numeric_limits<double>::infinity();
    double gsum = 0.0;
    std::size_t gcount = 0;
    for (const CMat& f : pp.effective) {
      const RVec g = tx_radar_gain(f, ch.bs_rx, angle);
      gmin = std::min(gmin, g.minCoeff());
      gsum += g.sum();
      gcount += std::size_t(g.size());
    }
    push("tx_gain_min", gmin);
    push("tx_gain_mean", gsum / double(gcount));

    double ksum = 0.0;
    for (double k : pp.digital.kappa) ksum += k;
    push("kappa_mean", ksum / double(pp.digital.kappa.size()));
    push("gain_warning", pp.digital.gain_warning ? 1.0 : 0.0);
    push("si_digital_rel", mean_relative_si(w0, ch.si, pp.digital.mats));
    push("si_hybrid_rel", mean_relative_si(w0, ch.si, pp.effective));

    if (spec.combiner != CombinerKind::none) {
      const CMat w = detail::make_combiner(
          spec.combiner, ch.si, pp.effective, ch.bs_rx, angle, cfg,
          derive_seed(seed, detail::method_tag(spec.label)));
      push("rx_gain_min", rx_radar_gain(w, ch.bs_rx, angle).minCoeff());
      push("si_combined_rel", mean_relative_si(w, ch.si, pp.effective));
      push("radar_sinr_db",
           linear_to_db(radar_sinr(w, ch, pp.effective, budget, 0, 0)));
    }
  }
  emit_csv(recs, out_path);
  std::cout << "wrote " << out_path << " (" << recs.size() << " records)\n";
  return 0;
}

/**
 * @brief Exports the radar images for the first trial of the config.
 *
 * Per method: one range-velocity map per target (the frame re-aimed at that
 * target) and one angle-range image over radar.angle_grid_deg (the target
 * angles when the grid is empty). Seeds match the radar_maps experiment, so
 * the exported maps are the ones behind its records. With several methods the
 * method label joins the prefix.
 */
int run_radar(const ExperimentConfig& cfg, const std::string& prefix) {
  const std::vector<MethodSpec> specs = detail::parse_methods(cfg);
  for (const MethodSpec& spec : specs)
    if (spec.combiner == CombinerKind::none)
      throw config_error("method '" + spec.label +
                         "': radar takes 'precoder+combiner' methods; valid "
                         "combiners: bcd, nsp, steering, identity");
  for (double deg : cfg.radar.angle_grid_deg)
    if (!(std::abs(deg) <= 90.0))
      throw config_error("radar: angle_grid_deg entries must lie in [-90, 90]");

  const SystemParams& sys = cfg.system;
  const int n_targets = int(cfg.scenario.targets.size());
  const std::uint64_t seed = cfg.base_seed;

  const Scenario sc = generate_scenario(cfg.scenario, sys, seed);
  const ChannelSet ch = build_channels(sc, sys);
  const std::vector<CMat> symbols =
      pilot_symbols(sys.n_subcarriers, sys.n_symbols, sys.n_streams,
                    sys.tx_power_w() / double(sys.n_streams), derive_seed(seed, 1));
  LinkBudget budget = detail::base_budget(sys);
  budget.si_power = sc.si_power;

  for (const MethodSpec& spec : specs) {
    const std::uint64_t tag = detail::method_tag(spec.label);
    const std::string stem = specs.size() == 1 ? prefix : prefix + "_" + spec.label;

    std::vector<RadarDesign> designs(static_cast<std::size_t>(n_targets));
    for (int k = 0; k < n_targets; ++k) {
      const double angle = ch.targets.at(std::size_t(k)).angle;
      const CMat w0 = steering_combiner(ch.bs_rx, angle, sys.n_rf_bs);
      detail::PipelinePrecoders pp =
          detail::pipeline_precoders(ch, w0, angle, sys, cfg.design, spec.precoder);
      CMat w = detail::make_combiner(spec.combiner, ch.si, pp.effective, ch.bs_rx,
                                     angle, cfg, derive_seed(seed, tag + std::uint64_t(k)));
      designs[std::size_t(k)] = RadarDesign{std::move(pp.effective), std::move(w)};
    }

    for (int k = 0; k < n_targets; ++k) {
      const RadarDesign& d = designs[std::size_t(k)];
      const std::vector<CMat> frame =
          rx_frame(ch, d.combiner, d.precoders, symbols, budget,
                   derive_seed(seed, tag ^ (0x1000 + std::uint64_t(k))));
      const CMat z = build_z(frame, d.combiner, d.precoders, symbols, ch.bs_rx,
                             ch.targets.at(std::size_t(k)).angle);
      const RangeDopplerMap map =
          range_doppler(z, cfg.mbar(), cfg.nbar(), sys.subcarrier_spacing_hz,
                        sys.symbol_duration_s, sys.wavelength());
      const std::string path =
          stem + "_range_velocity_target" + std::to_string(k + 1) + ".csv";
      export_range_velocity_csv(map, path);
      std::cout << "wrote " << path << " (peak " << map.range() << " m, "
                << map.velocity_physical() << " m/s)\n";
    }

    std::vector<double> grid;
    if (cfg.radar.angle_grid_deg.empty())
      for (int k = 0; k < n_targets; ++k)
        grid.push_back(ch.targets.at(std::size_t(k)).angle);
    else
      for (double deg : cfg.radar.angle_grid_deg) grid.push_back(deg_to_rad(deg));

    // Probe angles matching a target reuse its cached design (and its seeds);
    // any other grid angle gets a full redesign aimed there.
    const auto design_at = [&](double a) -> RadarDesign {
      for (int k = 0; k < n_targets; ++k)
        if (ch.targets.at(std::size_t(k)).angle == a) return designs[std::size_t(k)];
      const auto it = std::find(grid.begin(), grid.end(), a);
      const std::uint64_t idx = std::uint64_t(it - grid.begin());
      const CMat w0 = steering_combiner(ch.bs_rx, a, sys.n_rf_bs);
      detail::PipelinePrecoders pp =
          detail::pipeline_precoders(ch, w0, a, sys, cfg.design, spec.precoder);
      CMat w = detail::make_combiner(spec.combiner, ch.si, pp.effective, ch.bs_rx,
                                     a, cfg, derive_seed(seed, tag ^ (0x4000 + idx)));
      return RadarDesign{std::move(pp.effective), std::move(w)};
    };
    const AngleRangeMap arm = angle_range_map(ch, design_at, grid, cfg.mbar(),
                                              symbols, budget,
                                              derive_seed(seed, tag ^ 0x2000));
    const std::string path = stem + "_angle_range.csv";
    export_angle_range_csv(arm, path);
    std::cout << "wrote " << path << " (" << grid.size() << " probe angles)\n";
  }
  return 0;
}

int run_experiment_cmd(const ExperimentConfig& cfg, const std::string& out_path) {
  const std::vector<ResultRecord> recs = run_experiment(cfg);
  emit_csv(recs, out_path);
  std::cout << "wrote " << out_path << " (" << recs.size() << " records)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"full-duplex joint radar-communication link simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::string prefix;
  double angle_deg = 0.0;
  std::uint64_t seed_override = 0;

  CLI::App* design = app.add_subcommand(
      "design", "one-shot beamformer design toward an angle, metrics as CSV");
  design->add_option("--config", config_path, "JSON config path")->required();
  design->add_option("--angle", angle_deg, "design angle in degrees")->required();
  design->add_option("--out", out_path, "output CSV path")->required();
  CLI::Option* design_seed =
      design->add_option("--seed", seed_override, "override base_seed");

  CLI::App* radar = app.add_subcommand(
      "radar", "range-velocity and angle-range map CSVs for the configured scene");
  radar->add_option("--config", config_path, "JSON config path")->required();
  radar->add_option("--out-prefix", prefix, "output path prefix")->required();
  CLI::Option* radar_seed =
      radar->add_option("--seed", seed_override, "override base_seed");

  CLI::App* experiment = app.add_subcommand(
      "experiment", "run the configured experiment, records as CSV");
  experiment->add_option("--config", config_path, "JSON config path")->required();
  experiment->add_option("--out", out_path, "output CSV path")->required();
  CLI::Option* experiment_seed =
      experiment->add_option("--seed", seed_override, "override base_seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the parse error
    return code == 0 ? 0 : 2;
  }

  try {
    fdjrc::ExperimentConfig cfg = fdjrc::load_config_file(config_path);
    if (design->parsed()) {
      if (design_seed->count() > 0) cfg.base_seed = seed_override;
      return run_design(cfg, angle_deg, out_path);
    }
    if (radar->parsed()) {
      if (radar_seed->count() > 0) cfg.base_seed = seed_override;
      return run_radar(cfg, prefix);
    }
    if (experiment_seed->count() > 0) cfg.base_seed = seed_override;
    return run_experiment_cmd(cfg, out_path);
  } catch (const fdjrc::config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
