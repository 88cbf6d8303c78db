#ifndef FDJRC_METRICS_HPP
#define FDJRC_METRICS_HPP

#include <vector>

#include "fdjrc/numkernels.hpp"
#include "fdjrc/propagation.hpp"

namespace fdjrc {

/// Powers are linear Watts; si_power is the linear SI-to-thermal ratio rho.
struct LinkBudget {
  double tx_power = 0.1;
  double noise_ms = dbm_to_watt(-93.8);
  double noise_bs = dbm_to_watt(-93.8);
  double si_power = 0.0;
  int n_streams = 4;
};

inline void validate_budget(const LinkBudget& b) {
  require(b.tx_power > 0, "link budget: tx_power must be positive");
  require(b.noise_ms >= 0 && b.noise_bs >= 0, "link budget: noise powers must be non-negative");
  require(b.si_power >= 0, "link budget: si_power must be non-negative");
  require(b.n_streams >= 1, "link budget: n_streams must be at least 1");
}

/**
 * @brief Downlink spectral efficiency for one subcarrier, bits/s/Hz.
 *
 * Computes log2 det(I + (P_t / (sigma^2 N_s)) W^+ H F F^H H^H W) with W^+ the
 * Moore-Penrose pseudoinverse.  The determinant is evaluated through the
 * equivalent positive semidefinite form L^-1 (W^H H F), with W^H W = L L^H,
 * which is numerically stable and manifestly real.
 */
inline double spectral_efficiency(const CMat& h, const CMat& f, const CMat& w,
                                  const LinkBudget& budget) {
  validate_budget(budget);
  require(budget.noise_ms > 0, "spectral_efficiency: noise_ms must be positive");
  require(h.rows() == w.rows() && h.cols() == f.rows(),
          "spectral_efficiency: non-conformable shapes");
  require(f.cols() == w.cols(), "spectral_efficiency: stream counts disagree");

  Eigen::JacobiSVD<CMat> wsvd(w);
  const double smax = wsvd.singularValues()(0);
  const double smin = wsvd.singularValues()(w.cols() - 1);
  if (smax <= 0 || smin <= 1e-12 * smax)
    throw numeric_error("spectral_efficiency: combiner W_m is rank-deficient");

  const CMat gram = w.adjoint() * w;
  Eigen::LLT<CMat> llt(gram);
  if (llt.info() != Eigen::Success)
    throw numeric_error("spectral_efficiency: combiner Gram factorization failed");
  const CMat u = llt.matrixL().solve(w.adjoint() * h * f);

  const double c = budget.tx_power / (budget.noise_ms * budget.n_streams);
  Eigen::JacobiSVD<CMat> usvd(u);
  double se = 0.0;
  for (Eigen::Index i = 0; i < usvd.singularValues().size(); ++i) {
    const double s = usvd.singularValues()(i);
    se += std::log2(1.0 + c * s * s);
  }
  return se;
}

/// Transmit radar gain per stream: |F[:, i]^H a(angle)|.
inline RVec tx_radar_gain(const CMat& f, const CVec& steering) {
  require(f.rows() == steering.size(), "tx_radar_gain: steering length mismatch");
  RVec g(f.cols());
  for (Eigen::Index i = 0; i < f.cols(); ++i)
    g(i) = std::abs((f.col(i).adjoint() * steering)(0));
  return g;
}

inline RVec tx_radar_gain(const CMat& f, const UlaSpec& bs, double angle) {
  return tx_radar_gain(f, ula_response(bs, angle));
}

/// Receive radar gain per RF chain: |W[:, i]^H a(angle)|.
inline RVec rx_radar_gain(const CMat& w, const CVec& steering) {
  return tx_radar_gain(w, steering);
}

inline RVec rx_radar_gain(const CMat& w, const UlaSpec& bs, double angle) {
  return tx_radar_gain(w, ula_response(bs, angle));
}

/// Single-subcarrier radar SINR observed at one RF chain (linear ratio).
inline double radar_sinr_subcarrier(const CMat& w, const ChannelSet& channels,
                                    const std::vector<CMat>& precoders,
                                    const LinkBudget& budget, int chain, int symbol,
                                    int m) {
  validate_budget(budget);
  require(chain >= 0 && chain < w.cols(), "radar_sinr: chain index out of range");
  require(m >= 0 && m < int(precoders.size()), "radar_sinr: subcarrier index out of range");

  const CVec wc = w.col(chain);
  const double ps = budget.tx_power / budget.n_streams;
  const double num = ps * (wc.adjoint() * channels.target(m, symbol) *
                           precoders[std::size_t(m)]).squaredNorm();
  const double si = ps * budget.si_power *
                    (wc.adjoint() * channels.si * precoders[std::size_t(m)]).squaredNorm();
  const double noise = budget.noise_bs * wc.squaredNorm();
  return num / (si + noise);
}

/**
 * @brief Radar SINR at one RF chain aggregated over all subcarriers.
 *
 * Numerator and denominator energies are summed over m before the ratio; the
 * thermal term appears once per accumulated subcarrier, so it contributes
 * M * sigma^2 * ||w_chain||^2.
 */
inline double radar_sinr(const CMat& w, const ChannelSet& channels,
                         const std::vector<CMat>& precoders, const LinkBudget& budget,
                         int chain, int symbol) {
  validate_budget(budget);
  require(chain >= 0 && chain < w.cols(), "radar_sinr: chain index out of range");
  require(int(precoders.size()) == channels.n_subcarriers,
          "radar_sinr: precoder count must equal the subcarrier count");

  const CVec wc = w.col(chain);
  const double ps = budget.tx_power / budget.n_streams;
  double num = 0.0, si = 0.0;

  // H_t(m, n) = sum_k c_k(m, n) a_k a_k^H; only the scalars depend on (m, n).
  std::vector<cplx> wa(channels.targets.size());
  for (std::size_t k = 0; k < channels.targets.size(); ++k)
    wa[k] = (wc.adjoint() * channels.target_steering[k])(0);
  const CVec w_si = (wc.adjoint() * channels.si).adjoint();

  for (int m = 0; m < channels.n_subcarriers; ++m) {
    const CMat& fm = precoders[std::size_t(m)];
    Eigen::RowVectorXcd row = Eigen::RowVectorXcd::Zero(fm.cols());
    for (std::size_t k = 0; k < channels.targets.size(); ++k) {
      const auto& t = channels.targets[k];
      const double phase = 2.0 * pi * (symbol * channels.symbol_duration * t.doppler -
                                       m * t.round_trip * channels.subcarrier_spacing);
      const cplx ck = t.reflection * std::polar(1.0, phase);
      row += (ck * wa[k]) * (channels.target_steering[k].adjoint() * fm);
    }
    num += ps * row.squaredNorm();
    si += ps * budget.si_power * (w_si.adjoint() * fm).squaredNorm();
  }
  const double noise = budget.noise_bs * channels.n_subcarriers * wc.squaredNorm();
  return num / (si + noise);
}

}  // namespace fdjrc

#endif  // FDJRC_METRICS_HPP
