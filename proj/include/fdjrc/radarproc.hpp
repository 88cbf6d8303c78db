#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "fdjrc/common.hpp"
#include "fdjrc/metrics.hpp"
#include "fdjrc/numkernels.hpp"
#include "fdjrc/propagation.hpp"

namespace fdjrc {

/**
 * @brief Seeded unit-modulus QPSK-like pilot block.
 *
 * symbols[m] is an N_s x N matrix whose entries have squared modulus
 * per_stream_power and phases drawn uniformly from {pi/4, 3pi/4, 5pi/4,
 * 7pi/4}.  Draw order: subcarrier, then symbol, then stream.
 */
inline std::vector<CMat> pilot_symbols(int n_subcarriers, int n_symbols, int n_streams,
                                       double per_stream_power, std::uint64_t seed) {
  require(n_subcarriers >= 1 && n_symbols >= 1 && n_streams >= 1,
          "pilot_symbols: dimensions must be positive");
  require(per_stream_power > 0.0, "pilot_symbols: per_stream_power must be positive");
  const double amp = std::sqrt(per_stream_power);
  Rng rng(seed);
  std::vector<CMat> symbols;
  symbols.reserve(std::size_t(n_subcarriers));
  for (int m = 0; m < n_subcarriers; ++m) {
    CMat s(n_streams, n_symbols);
    for (int n = 0; n < n_symbols; ++n)
      for (int i = 0; i < n_streams; ++i)
        s(i, n) = std::polar(amp, pi / 4.0 + (pi / 2.0) * double(rng.integer(4)));
    symbols.push_back(std::move(s));
  }
  return symbols;
}

/**
 * @brief Received BS frame: y = W^H H_t F s + sqrt(rho) W^H H_SI F s + W^H n.
 *
 * Returns M matrices of shape N_RF x N (chain by symbol).  rho is
 * budget.si_power and the per-antenna noise variance is budget.noise_bs; the
 * noise is drawn from `noise_seed` in (subcarrier, symbol, antenna) order, so
 * equal seeds give bit-identical frames.
 */
inline std::vector<CMat> rx_frame(const ChannelSet& channels, const CMat& w,
                                  const std::vector<CMat>& precoders,
                                  const std::vector<CMat>& symbols,
                                  const LinkBudget& budget, std::uint64_t noise_seed) {
  validate_budget(budget);
  const int n_subc = channels.n_subcarriers;
  const int n_sym = channels.n_symbols;
  const int n_bs = int(channels.si.rows());
  require(int(precoders.size()) == n_subc, "rx_frame: need one precoder per subcarrier");
  require(int(symbols.size()) == n_subc, "rx_frame: need one symbol block per subcarrier");
  require(w.rows() == n_bs, "rx_frame: combiner height must match the receive array");

  const CMat w_si = w.adjoint() * channels.si;  // N_RF x N_BS, reused per sample
  std::vector<CVec> w_steer(channels.targets.size());
  for (std::size_t k = 0; k < channels.targets.size(); ++k)
    w_steer[std::size_t(k)] = w.adjoint() * channels.target_steering[k];

  const double sqrt_rho = std::sqrt(budget.si_power);
  Rng rng(noise_seed);
  CVec noise(n_bs);

  std::vector<CMat> received;
  received.reserve(std::size_t(n_subc));
  for (int m = 0; m < n_subc; ++m) {
    const CMat& fm = precoders[std::size_t(m)];
    require(fm.rows() == n_bs, "rx_frame: precoder height must match the array");
    require(symbols[std::size_t(m)].rows() == fm.cols(),
            "rx_frame: stream count mismatch between precoder and symbols");
    require(symbols[std::size_t(m)].cols() == n_sym,
            "rx_frame: symbol block must cover all OFDM symbols");

    CMat y(w.cols(), n_sym);
    for (int n = 0; n < n_sym; ++n) {
      const CVec x = fm * symbols[std::size_t(m)].col(n);
      CVec ym = sqrt_rho * (w_si * x);
      // H_t(m, n) = sum_k c_k(m, n) a_k a_k^H; apply it through the cached
      // steering vectors instead of forming the N_BS x N_BS matrix.
      for (std::size_t k = 0; k < channels.targets.size(); ++k) {
        const auto& t = channels.targets[k];
        const double phase =
            2.0 * pi * (n * channels.symbol_duration * t.doppler -
                        m * t.round_trip * channels.subcarrier_spacing);
        const cplx ck = t.reflection * std::polar(1.0, phase);
        ym += (ck * (channels.target_steering[k].adjoint() * x)(0)) * w_steer[k];
      }
      for (int i = 0; i < n_bs; ++i) noise(i) = rng.cnormal(budget.noise_bs);
      ym += w.adjoint() * noise;
      y.col(n) = ym;
    }
    received.push_back(std::move(y));
  }
  return received;
}

/**
 * @brief Matched matrix for subcarrier-domain radar processing.
 *
 * Z[m, n] = sum over chains of y_chain(m, n) / d_chain(m, n) with the
 * reference beam response d_chain = (w_chain^H a(theta)) (a^H(theta) F_m
 * s_{m,n}).  Dividing by the response itself (not its conjugate) cancels the
 * pilot phase, so a single on-grid scatterer leaves the pure progressive
 * phase exp(j 2 pi (n T f_D - m tau df)) with constant modulus.
 *
 * @throws numeric_error naming the chain when any |d_chain| falls below the
 *         guard (default 1e-12 * N_BS * per-stream symbol amplitude), i.e.
 *         when a combiner column nulls the probed direction.
 */
inline CMat build_z(const std::vector<CMat>& received, const CMat& w,
                    const std::vector<CMat>& precoders,
                    const std::vector<CMat>& symbols, const UlaSpec& bs_rx,
                    double angle, double guard = -1.0) {
  const int n_subc = int(received.size());
  require(n_subc >= 1, "build_z: received frame is empty");
  require(int(precoders.size()) == n_subc && int(symbols.size()) == n_subc,
          "build_z: received/precoders/symbols must agree on the subcarrier count");
  const int n_sym = int(received[0].cols());
  const int n_rf = int(w.cols());
  require(bs_rx.n_ant == w.rows(), "build_z: combiner height must match the array");

  const CVec a = ula_response(bs_rx, angle);
  CVec wa(n_rf);
  for (int c = 0; c < n_rf; ++c) wa(c) = (w.col(c).adjoint() * a)(0);

  if (guard < 0.0) {
    const double sym_amp = std::abs(symbols[0](0, 0));
    guard = 1e-12 * double(bs_rx.n_ant) * sym_amp;
  }

  CMat z(n_subc, n_sym);
  for (int m = 0; m < n_subc; ++m) {
    require(int(received[std::size_t(m)].rows()) == n_rf &&
                int(received[std::size_t(m)].cols()) == n_sym,
            "build_z: ragged received tensor");
    const Eigen::RowVectorXcd af = a.adjoint() * precoders[std::size_t(m)];
    for (int n = 0; n < n_sym; ++n) {
      const cplx beta = (af * symbols[std::size_t(m)].col(n))(0);
      cplx acc(0.0, 0.0);
      for (int c = 0; c < n_rf; ++c) {
        const cplx d = wa(c) * beta;
        if (std::abs(d) <= guard)
          throw numeric_error("build_z: beam response for chain " + std::to_string(c) +
                              " at subcarrier " + std::to_string(m) + ", symbol " +
                              std::to_string(n) + " is degenerate (|d| <= guard)");
        acc += received[std::size_t(m)](c, n) / d;
      }
      z(m, n) = acc;
    }
  }
  return z;
}

/**
 * @brief Oversampled range-Doppler image with peak bookkeeping.
 *
 * range_bin = c / (2 Mbar df) meters per row; velocity_bin = lambda /
 * (Nbar T) m/s per column.  velocity() follows that printed axis; with the
 * two-way Doppler convention f_D = 2 v / lambda the physical speed is half
 * of it, reported by velocity_physical().
 */
struct RangeDopplerMap {
  RMat magnitudes;  ///< Mbar x Nbar, entrywise non-negative
  double range_bin = 0.0;
  double velocity_bin = 0.0;
  int peak_m = 0;
  int peak_n = 0;

  double range() const { return peak_m * range_bin; }
  double velocity() const { return peak_n * velocity_bin; }
  double velocity_physical() const { return 0.5 * velocity(); }
};

/**
 * @brief Oversampled 2-D transform of Z and peak extraction.
 *
 * magnitudes = |sum_{m,n} Z[m,n] e^{+j2pi m p / Mbar} e^{-j2pi n q / Nbar}|.
 * The peak maximizes the magnitude; ties break to the lexicographically
 * smallest (row, column) index pair.  Columns past Nbar/2 alias to negative
 * Doppler shifts.
 */
inline RangeDopplerMap range_doppler(const CMat& z, int mbar, int nbar,
                                     double subcarrier_spacing, double symbol_duration,
                                     double wavelength) {
  require(mbar >= z.rows() && nbar >= z.cols(),
          "range_doppler: oversampled grid must be at least the input size");
  require(subcarrier_spacing > 0.0 && symbol_duration > 0.0 && wavelength > 0.0,
          "range_doppler: spacing, duration, and wavelength must be positive");

  RangeDopplerMap map;
  map.range_bin = speed_of_light / (2.0 * double(mbar) * subcarrier_spacing);
  map.velocity_bin = wavelength / (double(nbar) * symbol_duration);
  map.magnitudes = dft_padded_2d(z, mbar, nbar).cwiseAbs();

  double best = -1.0;
  for (int p = 0; p < mbar; ++p) {
    for (int q = 0; q < nbar; ++q) {
      if (map.magnitudes(p, q) > best) {  // strict: keeps the first (lexicographic) max
        best = map.magnitudes(p, q);
        map.peak_m = p;
        map.peak_n = q;
      }
    }
  }
  return map;
}

/// Precoders plus combiner produced by one design pass at a probe angle.
struct RadarDesign {
  std::vector<CMat> precoders;
  CMat combiner;
};

/// Range profiles stacked over a probe-angle grid (rows follow the grid).
struct AngleRangeMap {
  RMat magnitudes;  ///< n_angles x Mbar
  std::vector<double> angles_rad;
  double range_bin = 0.0;
};

/**
 * @brief Angle-range image via one full redesign per probe angle.
 *
 * For each grid angle the caller's design_at produces the precoders and
 * combiner aimed there, a frame is received and matched, and the Doppler-bin-0
 * range profile (the zero-frequency column across symbols, equal to the
 * oversampled transform of the symbol-summed rows) becomes one image row.
 * Noise for angle k is drawn from derive_seed(noise_seed, k).
 */
inline AngleRangeMap angle_range_map(const ChannelSet& channels,
                                     const std::function<RadarDesign(double)>& design_at,
                                     const std::vector<double>& angle_grid, int mbar,
                                     const std::vector<CMat>& symbols,
                                     const LinkBudget& budget,
                                     std::uint64_t noise_seed) {
  require(!angle_grid.empty(), "angle_range_map: angle grid must be non-empty");
  require(design_at != nullptr, "angle_range_map: design callback must be set");
  require(mbar >= channels.n_subcarriers,
          "angle_range_map: oversampled grid must be at least the subcarrier count");

  AngleRangeMap map;
  map.angles_rad = angle_grid;
  map.range_bin = speed_of_light / (2.0 * double(mbar) * channels.subcarrier_spacing);
  map.magnitudes.resize(Eigen::Index(angle_grid.size()), mbar);

  for (std::size_t k = 0; k < angle_grid.size(); ++k) {
    const double angle = angle_grid[k];
    const RadarDesign design = design_at(angle);
    const std::vector<CMat> received =
        rx_frame(channels, design.combiner, design.precoders, symbols, budget,
                 derive_seed(noise_seed, std::uint64_t(k)));
    const CMat z = build_z(received, design.combiner, design.precoders, symbols,
                           channels.bs_rx, angle);
    const CVec profile = dft_padded_1d(z.rowwise().sum(), mbar, +1);
    map.magnitudes.row(Eigen::Index(k)) = profile.cwiseAbs().transpose();
  }
  return map;
}

namespace detail {

inline double magnitude_db(double mag) {
  return 20.0 * std::log10(std::max(mag, 1e-300));
}

inline std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace detail

/// CSV triplets (range_m, velocity_mps, magnitude_db), row-major, LF endings.
inline void export_range_velocity_csv(const RangeDopplerMap& map, std::ostream& os) {
  os << "range_m,velocity_mps,magnitude_db\n";
  for (Eigen::Index p = 0; p < map.magnitudes.rows(); ++p)
    for (Eigen::Index q = 0; q < map.magnitudes.cols(); ++q)
      os << detail::csv_number(double(p) * map.range_bin) << ','
         << detail::csv_number(double(q) * map.velocity_bin) << ','
         << detail::csv_number(detail::magnitude_db(map.magnitudes(p, q))) << '\n';
}

/// CSV triplets (angle_deg, range_m, magnitude_db), row-major, LF endings.
inline void export_angle_range_csv(const AngleRangeMap& map, std::ostream& os) {
  os << "angle_deg,range_m,magnitude_db\n";
  for (Eigen::Index k = 0; k < map.magnitudes.rows(); ++k)
    for (Eigen::Index p = 0; p < map.magnitudes.cols(); ++p)
      os << detail::csv_number(rad_to_deg(map.angles_rad[std::size_t(k)])) << ','
         << detail::csv_number(double(p) * map.range_bin) << ','
         << detail::csv_number(detail::magnitude_db(map.magnitudes(k, p))) << '\n';
}

inline void export_range_velocity_csv(const RangeDopplerMap& map,
                                      const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw config_error("cannot open '" + path + "' for writing");
  export_range_velocity_csv(map, os);
}

inline void export_angle_range_csv(const AngleRangeMap& map, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw config_error("cannot open '" + path + "' for writing");
  export_angle_range_csv(map, os);
}

}  // namespace fdjrc
