#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "fdjrc/common.hpp"
#include "fdjrc/numkernels.hpp"

namespace fdjrc {

/**
 * @brief Frequency-flat analog matrix plus per-subcarrier digital matrices.
 *
 * Produced by pe_altmin.  The analog factor has exactly unit-modulus entries;
 * every product analog*digital[m] carries squared Frobenius norm n_streams
 * after the final rescale.  residuals holds the alternating objective
 * sum_m ||target_m - analog*digital_m||_F^2 recorded after each digital step,
 * before the rescale; the sequence is non-increasing by construction.
 * zero_phase_count is the log of arg(0) entries that fell back to phase 0
 * (during initialization or analog updates).
 */
struct HybridFactorization {
  CMat analog;
  std::vector<CMat> digital;
  std::vector<double> residuals;
  double target_norm_sq = 0.0;
  int zero_phase_count = 0;

  /// Final objective relative to the stacked target energy.
  double relative_residual() const {
    if (residuals.empty()) return 0.0;
    return residuals.back() / std::max(target_norm_sq, 1e-300);
  }
};

namespace detail {

/// Elementwise phase matrix exp(j*arg(g)); zero entries map to phase 0.
inline CMat phase_matrix(const CMat& g, int& zero_count) {
  CMat a(g.rows(), g.cols());
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      const cplx v = g(i, j);
      if (v == cplx(0.0, 0.0)) {
        a(i, j) = cplx(1.0, 0.0);
        ++zero_count;
      } else {
        a(i, j) = std::polar(1.0, std::arg(v));
      }
    }
  }
  return a;
}

/// Objective sum_m ||F_m - A D_m||^2 = e - 2 Re tr(A^H g) + tr(A^H A p).
inline double altmin_objective(const CMat& a, const CMat& g, const CMat& p,
                               double energy) {
  const double lin = (a.conjugate().cwiseProduct(g)).sum().real();
  const double quad = (a.adjoint() * a).cwiseProduct(p.transpose()).sum().real();
  return energy - 2.0 * lin + quad;
}

/**
 * One cyclic sweep of exact per-entry minimization over the unit-modulus
 * analog matrix.  Each update a_ij = exp(j*arg(g_ij - sum_{j'!=j} a_ij' p_j'j))
 * is the closed-form scalar minimizer, so the objective never increases.
 * When p is a multiple of the identity the update collapses to the plain
 * phase extraction exp(j*arg(g_ij)).
 */
inline void entrywise_phase_sweep(CMat& a, const CMat& g, const CMat& p) {
  CMat ap = a * p;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const cplx coeff = g(i, j) - (ap(i, j) - a(i, j) * p(j, j));
      if (coeff == cplx(0.0, 0.0)) continue;  // flat direction, keep the entry
      const cplx fresh = std::polar(1.0, std::arg(coeff));
      const cplx delta = fresh - a(i, j);
      if (delta != cplx(0.0, 0.0)) ap.row(i) += delta * p.row(j);
      a(i, j) = fresh;
    }
  }
}

}  // namespace detail

/**
 * @brief Phase-extraction alternating minimization.
 *
 * Splits per-subcarrier matrices target_m (n_ant x n_streams) into one shared
 * unit-modulus analog matrix (n_ant x n_rf) and per-subcarrier digital
 * matrices (n_rf x n_streams).  Alternates a least-squares digital step
 * digital_m = pinv(analog)*target_m with a phase-extraction analog step
 * analog = exp(j*arg(sum_m target_m*digital_m^H)).  The analog matrix starts
 * from the phases of the dominant left singular vectors of the horizontally
 * stacked targets, so the routine is deterministic.
 *
 * The objective is recorded after every digital step.  The plain phase
 * extraction is the exact analog-step minimizer only when the stacked digital
 * Gram matrix is a multiple of the identity; otherwise it can increase the
 * objective.  Each analog step therefore keeps the extraction candidate only
 * when it does not increase the objective and then applies one cyclic sweep
 * of exact per-entry phase minimization, which coincides with the extraction
 * in the orthogonal case and guarantees a non-increasing recorded sequence.
 * Iteration stops early once the relative objective decrease falls below tol.
 * Finally each digital matrix is rescaled so that
 * ||analog*digital_m||_F^2 = n_streams.
 *
 * @throws contract_error unless n_streams <= n_rf <= n_ant and max_iter >= 1.
 * @throws numeric_error if a final product has zero norm (untransmittable).
 */
inline HybridFactorization pe_altmin(const std::vector<CMat>& targets, int n_rf,
                                     int max_iter = 200, double tol = 1e-6) {
  require(!targets.empty(), "pe_altmin: need at least one target matrix");
  const Eigen::Index n_ant = targets[0].rows();
  const Eigen::Index n_s = targets[0].cols();
  require(n_s <= n_rf && n_rf <= n_ant,
          "pe_altmin: require n_streams <= n_rf <= n_ant");
  require(max_iter >= 1, "pe_altmin: max_iter must be at least 1");
  for (const CMat& t : targets)
    require(t.rows() == n_ant && t.cols() == n_s,
            "pe_altmin: all targets must share one shape");

  const std::size_t n_sub = targets.size();
  HybridFactorization fact;
  fact.target_norm_sq = 0.0;
  for (const CMat& t : targets) fact.target_norm_sq += t.squaredNorm();

  // Initialization: phases of the dominant left singular vectors of the
  // stacked targets.  When fewer singular vectors exist than RF chains, the
  // spare columns fall back to phase 0 (all ones).
  CMat stacked(n_ant, Eigen::Index(n_sub) * n_s);
  for (std::size_t m = 0; m < n_sub; ++m)
    stacked.middleCols(Eigen::Index(m) * n_s, n_s) = targets[m];
  const int k_avail = int(std::min<Eigen::Index>(n_rf, std::min(n_ant, stacked.cols())));
  const SvdResult svd = svd_truncated(stacked, k_avail);
  CMat analog(n_ant, n_rf);
  analog.leftCols(k_avail) = detail::phase_matrix(svd.u, fact.zero_phase_count);
  for (int j = k_avail; j < n_rf; ++j)  // spare chains: distinct DFT phases
    for (Eigen::Index i = 0; i < n_ant; ++i)
      analog(i, j) = std::polar(1.0, 2.0 * pi * double(i) * double(j) / double(n_ant));

  std::vector<CMat> digital(n_sub);
  CMat best_analog = analog;
  std::vector<CMat> best_digital;
  double best_obj = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < max_iter; ++iter) {
    const CMat analog_pinv = pinv(analog);
    double obj = 0.0;
    for (std::size_t m = 0; m < n_sub; ++m) {
      digital[m].noalias() = analog_pinv * targets[m];
      obj += (targets[m] - analog * digital[m]).squaredNorm();
    }

    if (obj > best_obj) break;  // safety net; the analog step cannot increase
    fact.residuals.push_back(obj);
    best_analog = analog;
    best_digital = digital;
    const double prev = best_obj;
    best_obj = obj;
    if (std::isfinite(prev) && prev - obj <= tol * prev) break;

    CMat g = CMat::Zero(n_ant, n_rf);
    CMat p = CMat::Zero(n_rf, n_rf);
    for (std::size_t m = 0; m < n_sub; ++m) {
      g.noalias() += targets[m] * digital[m].adjoint();
      p.noalias() += digital[m] * digital[m].adjoint();
    }
    p = 0.5 * (p + p.adjoint()).eval();
    const CMat candidate = detail::phase_matrix(g, fact.zero_phase_count);
    if (detail::altmin_objective(candidate, g, p, fact.target_norm_sq) <= obj)
      analog = candidate;
    detail::entrywise_phase_sweep(analog, g, p);
  }

  fact.analog = best_analog;
  fact.digital = std::move(best_digital);
  for (std::size_t m = 0; m < n_sub; ++m) {
    const double norm = (fact.analog * fact.digital[m]).norm();
    if (norm < 1e-300)
      throw numeric_error("pe_altmin: zero-power product for subcarrier " +
                          std::to_string(m));
    fact.digital[m] *= std::sqrt(double(n_s)) / norm;
  }
  return fact;
}

/**
 * @brief Materialize the effective precoder analog*digital[m].
 * @throws contract_error if m is out of range.
 */
inline CMat apply_hybrid(const HybridFactorization& fact, std::size_t m) {
  require(m < fact.digital.size(), "apply_hybrid: subcarrier index out of range");
  return fact.analog * fact.digital[m];
}

}  // namespace fdjrc
