#ifndef FDJRC_TXDESIGN_HPP
#define FDJRC_TXDESIGN_HPP

#include <string>
#include <vector>

#include "fdjrc/metrics.hpp"
#include "fdjrc/numkernels.hpp"
#include "fdjrc/propagation.hpp"

namespace fdjrc {

/// How fraction-of-array gain thresholds translate to Eq.-style amplitudes.
enum class GainSemantics { power, amplitude };

inline GainSemantics parse_gain_semantics(const std::string& s) {
  if (s == "power") return GainSemantics::power;
  if (s == "amplitude") return GainSemantics::amplitude;
  throw config_error("gain_semantics must be 'power' or 'amplitude', got '" + s + "'");
}

/**
 * @brief Amplitude threshold for a gain spec given as a fraction of the array size.
 *
 * power: |col^H a|^2 >= fraction * n_bs * ||col||^2, i.e. the threshold scales
 * with the per-column power budget (col_norm = 1 for unit-Frobenius-average
 * precoder columns, sqrt(n_bs) for unit-modulus combiner columns).
 * amplitude: the printed form |col^H a| >= fraction * n_bs, independent of the
 * column norm; may be unattainable, in which case designs degrade gracefully.
 */
inline double amplitude_threshold(double fraction, GainSemantics sem, int n_bs,
                                  double col_norm) {
  require(fraction >= 0, "gain threshold fraction must be non-negative");
  return sem == GainSemantics::power
             ? std::sqrt(fraction * n_bs) * col_norm
             : fraction * n_bs;
}

/// Knobs for the precoder/combiner design stages; thresholds as fractions.
struct DesignConfig {
  double tau_t_fraction = 0.3;
  double tau_r_fraction = 0.7;
  GainSemantics gain_semantics = GainSemantics::power;
  /// Diagonal loading of the SI metric, relative to its mean eigenvalue: the
  /// pencils see C + ridge*(trace(C)/N_BS)*I (ridge itself when trace(C) = 0).
  /// Small values pin the designs to the SI near-null space; larger values
  /// trade suppression depth for beam gain headroom.
  double ridge = 1e-8;
  double eps1 = 0.1;
  double eps2 = 0.3;
  double block_fraction = 0.25;
  int bcd_outer_iters = 50;
  double nsp_energy_threshold = 1.0 - 1e-10;
  int altmin_max_iter = 200;
  double altmin_tol = 1e-6;
};

enum class PrecoderMethod { proposed, coherent_eigenvector, optimal_svd };

inline PrecoderMethod parse_precoder_method(const std::string& s) {
  if (s == "proposed") return PrecoderMethod::proposed;
  if (s == "coherent_eigenvector") return PrecoderMethod::coherent_eigenvector;
  if (s == "optimal_svd") return PrecoderMethod::optimal_svd;
  throw config_error(
      "unknown precoder method '" + s +
      "'; valid values: proposed, coherent_eigenvector, optimal_svd");
}

/// Per-subcarrier fully digital precoders plus design metadata.
struct PrecoderSet {
  std::vector<CMat> mats;     ///< M entries, N_BS x N_s, each with ||F||_F^2 = N_s
  std::vector<double> kappa;  ///< mixing weight actually used per subcarrier
  std::string method;
  bool gain_warning = false;  ///< true when some subcarrier could not reach tau_T
};

/// SI-space covariance observed through the BS combiner: C = H_SI^H W W^H H_SI.
inline CMat si_covariance(const CMat& h_si, const CMat& w_bs) {
  require(h_si.rows() == w_bs.rows(), "si_covariance: non-conformable shapes");
  const CMat t = h_si.adjoint() * w_bs;
  CMat c = t * t.adjoint();
  return (c + c.adjoint().eval()) / 2.0;
}

/// Spectral-efficiency-maximizing columns constrained away from the SI space.
inline CMat gev_precoder(const CMat& h_m, const CMat& c, int n_streams, double ridge) {
  require(h_m.cols() == c.rows(), "gev_precoder: channel/covariance shapes disagree");
  CMat a = h_m.adjoint() * h_m;
  a = (a + a.adjoint().eval()) / 2.0;
  return gev_top_k(a, c, n_streams, ridge);
}

/// Max-gain beam toward `angle` under the same SI metric: top GEV of (a a^H, C).
inline CVec target_beam(const CVec& steering, const CMat& c, double ridge) {
  require(steering.size() == c.rows(), "target_beam: steering/covariance shapes disagree");
  const CMat b = steering * steering.adjoint();
  return gev_top_k(b, c, 1, ridge).col(0);
}

struct CoherentCombineResult {
  CMat f;           ///< N_BS x N_s, ||f||_F^2 = N_s
  double kappa = 1.0;
  bool warning = false;  ///< tau_T unattainable even at kappa = 0
};

namespace detail {

/// Mix, rescale to the power budget, and report the minimum column gain.
inline CMat coherent_mix(const CMat& f_gev, const std::vector<CVec>& aligned,
                         double kappa, int n_streams) {
  CMat f(f_gev.rows(), f_gev.cols());
  for (Eigen::Index c = 0; c < f_gev.cols(); ++c)
    f.col(c) = kappa * f_gev.col(c) + (1.0 - kappa) * aligned[std::size_t(c)];
  const double norm = f.norm();
  if (norm > 0) f *= std::sqrt(double(n_streams)) / norm;
  return f;
}

inline double min_column_gain(const CMat& f, const CVec& steering) {
  double g = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < f.cols(); ++c)
    g = std::min(g, std::abs((f.col(c).adjoint() * steering)(0)));
  return g;
}

}  // namespace detail

/**
 * @brief Coherent combination F = kappa F_gev + (1-kappa) e^{j psi} f per column.
 *
 * psi_c aligns f with the c-th GEV column so the mixture adds constructively.
 * kappa is the largest value in [0, 1] whose rescaled mixture keeps the minimum
 * column gain toward `steering` at or above tau_amp - tol (bisection; the gain
 * is monotone non-increasing in kappa after alignment).  If even kappa = 0
 * misses the threshold the beam-only design is returned with a warning.
 */
inline CoherentCombineResult coherent_combine(const CMat& f_gev, const CVec& beam,
                                              const CVec& steering, double tau_amp,
                                              double tol) {
  require(f_gev.rows() == beam.size() && f_gev.rows() == steering.size(),
          "coherent_combine: shape mismatch");
  require(tau_amp >= 0, "coherent_combine: tau_amp must be non-negative");
  require(tol > 0, "coherent_combine: tol must be positive");

  const int n_streams = int(f_gev.cols());
  std::vector<CVec> aligned;
  aligned.reserve(std::size_t(n_streams));
  for (Eigen::Index c = 0; c < f_gev.cols(); ++c) {
    const cplx inner = (beam.adjoint() * f_gev.col(c))(0);
    const double psi = std::abs(inner) > 0 ? std::arg(inner) : 0.0;
    aligned.push_back(std::polar(1.0, psi) * beam);
  }

  const auto gain_at = [&](double kappa) {
    return detail::min_column_gain(detail::coherent_mix(f_gev, aligned, kappa, n_streams),
                                   steering);
  };

  CoherentCombineResult out;
  if (gain_at(1.0) >= tau_amp - tol) {
    out.kappa = 1.0;
  } else if (gain_at(0.0) < tau_amp - tol) {
    out.kappa = 0.0;
    out.warning = true;
  } else {
    double lo = 0.0, hi = 1.0;  // gain(lo) feasible, gain(hi) infeasible
    for (int it = 0; it < 100 && hi - lo > 1e-12; ++it) {
      const double mid = (lo + hi) / 2.0;
      (gain_at(mid) >= tau_amp - tol ? lo : hi) = mid;
    }
    out.kappa = lo;
  }
  out.f = detail::coherent_mix(f_gev, aligned, out.kappa, n_streams);
  return out;
}

/// MS combiner: dominant left singular subspace of the subcarrier channel.
inline CMat ms_combiner(const CMat& h_m, int n_streams) {
  require(n_streams >= 1 && n_streams <= std::min(h_m.rows(), h_m.cols()),
          "ms_combiner: n_streams out of range");
  return svd_truncated(h_m, n_streams).u;
}

/**
 * @brief Fully digital per-subcarrier precoders for one of the three methods.
 *
 * proposed: GEV precoder and target beam under the SI metric built from w_bs,
 * coherently combined to meet the transmit gain threshold.
 * coherent_eigenvector: the same pipeline with the SI term removed (C = 0).
 * optimal_svd: dominant right singular vectors of each subcarrier channel.
 */
inline PrecoderSet design_precoders(const ChannelSet& channels, const CMat& w_bs,
                                    double angle, const SystemParams& sys,
                                    const DesignConfig& cfg, PrecoderMethod method) {
  const int n_streams = sys.n_streams;
  const CVec steering = ula_response(channels.bs_rx, angle);
  const double tau_amp =
      amplitude_threshold(cfg.tau_t_fraction, cfg.gain_semantics, sys.n_bs, 1.0);
  const double tol = 1e-4 * sys.n_bs;

  PrecoderSet out;
  out.mats.reserve(std::size_t(channels.n_subcarriers));
  out.kappa.reserve(std::size_t(channels.n_subcarriers));

  if (method == PrecoderMethod::optimal_svd) {
    out.method = "optimal_svd";
    for (int m = 0; m < channels.n_subcarriers; ++m) {
      CMat f = svd_truncated(channels.h(m), n_streams).v;
      f *= std::sqrt(double(n_streams)) / f.norm();
      out.mats.push_back(std::move(f));
      out.kappa.push_back(1.0);
    }
    return out;
  }

  const bool with_si = method == PrecoderMethod::proposed;
  out.method = with_si ? "proposed" : "coherent_eigenvector";
  const CMat c = with_si ? si_covariance(channels.si, w_bs)
                         : CMat::Zero(sys.n_bs, sys.n_bs);
  require(cfg.ridge >= 0, "design_precoders: ridge must be non-negative");
  const double tr = c.trace().real();
  const double ridge_abs = tr > 0.0 ? cfg.ridge * tr / double(sys.n_bs) : cfg.ridge;
  const CVec beam = target_beam(steering, c, ridge_abs);

  for (int m = 0; m < channels.n_subcarriers; ++m) {
    const CMat f_gev = gev_precoder(channels.h(m), c, n_streams, ridge_abs);
    CoherentCombineResult cc = coherent_combine(f_gev, beam, steering, tau_amp, tol);
    out.gain_warning = out.gain_warning || cc.warning;
    out.mats.push_back(std::move(cc.f));
    out.kappa.push_back(cc.kappa);
  }
  return out;
}

}  // namespace fdjrc

#endif  // FDJRC_TXDESIGN_HPP
