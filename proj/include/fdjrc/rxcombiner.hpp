#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <utility>
#include <vector>

#include "fdjrc/common.hpp"
#include "fdjrc/metrics.hpp"
#include "fdjrc/numkernels.hpp"
#include "fdjrc/propagation.hpp"

namespace fdjrc {

/**
 * @brief Iterate bookkeeping for the block-coordinate-descent combiner.
 *
 * combiner is the current unit-modulus iterate; best_combiner/best_objective
 * snapshot the best feasible iterate seen so far (gain-tier first, then SI
 * objective).  warning flags at least one inner solve that hit its iteration
 * cap without meeting the relative tolerance.
 */
struct BcdState {
  CMat combiner;
  int iteration = 0;
  std::vector<double> objective_history;
  CMat best_combiner;
  double best_objective = std::numeric_limits<double>::infinity();
  std::uint64_t rng_seed = 0;
  bool warning = false;
};

namespace detail {

/// SI quadratic form sum_m ||W^H H_SI F_m||_F^2 = tr(W^H Q W).
inline double si_objective(const CMat& w, const CMat& q) {
  return (w.adjoint() * q * w).trace().real();
}

/// Q = sum_m (H_SI F_m)(H_SI F_m)^H, the PSD kernel of the SI objective.
inline CMat si_quadratic_kernel(const CMat& h_si, const std::vector<CMat>& precoders) {
  require(!precoders.empty(), "bcd: need at least one precoder");
  CMat q = CMat::Zero(h_si.rows(), h_si.rows());
  for (const CMat& f : precoders) {
    const CMat hf = h_si * f;
    q.noalias() += hf * hf.adjoint();
  }
  return 0.5 * (q + q.adjoint()).eval();
}

/// Clip free-entry moduli to the relaxed bound 1 + eps1, preserving phase.
inline void project_modulus(CMat& w, const std::vector<std::pair<int, int>>& free_idx,
                            double eps1) {
  const double cap = 1.0 + eps1;
  for (const auto& [i, j] : free_idx) {
    const double mag = std::abs(w(i, j));
    if (mag > cap) w(i, j) *= cap / mag;
  }
}

/// Shrink the stacked free entries onto the eps2 ball around the previous iterate.
inline void project_trust_region(CMat& w, const CMat& prev,
                                 const std::vector<std::pair<int, int>>& free_idx,
                                 double eps2) {
  double dist_sq = 0.0;
  for (const auto& [i, j] : free_idx) dist_sq += std::norm(w(i, j) - prev(i, j));
  const double dist = std::sqrt(dist_sq);
  if (dist <= eps2 || dist == 0.0) return;
  const double t = eps2 / dist;
  for (const auto& [i, j] : free_idx)
    w(i, j) = prev(i, j) + t * (w(i, j) - prev(i, j));
}

/**
 * Exact minimal-norm projection of one column's free entries onto the
 * gain-loss cone |n_bs - w_col^H a| <= n_bs - tau_r.  The functional
 * w_col^H a is antilinear in the free entries, so the constraint is a disc
 * on u = a_free^H z and the projection moves z along a_free only.
 */
inline void project_gain_cone(CMat& w, const CVec& a, int col,
                              const std::vector<int>& free_rows, double tau_r) {
  if (free_rows.empty()) return;
  const double n_bs = double(a.size());
  const double radius = n_bs - tau_r;
  const cplx s_full = (w.col(col).adjoint() * a)(0);
  cplx s_free(0.0, 0.0);
  double a_norm_sq = 0.0;
  for (int i : free_rows) {
    s_free += std::conj(w(i, col)) * a(i);
    a_norm_sq += std::norm(a(i));
  }
  const cplx center = std::conj(cplx(n_bs, 0.0) - (s_full - s_free));
  const cplx u = std::conj(s_free);
  const double dev = std::abs(u - center);
  if (dev <= radius) return;
  const cplx u_new = center + (radius / dev) * (u - center);
  const cplx shift = (u_new - u) / a_norm_sq;
  for (int i : free_rows) w(i, col) += shift * a(i);
}

/**
 * Constraint satisfaction with small numerical slack.  The gain cone is
 * checked only on columns holding free entries: a fixed column cannot be
 * repaired inside this subproblem, and full-matrix gain feasibility is owned
 * by the outer best-iterate tiers.
 */
inline bool bcd_feasible(const CMat& w, const CMat& prev, const CVec& a,
                         const std::vector<std::pair<int, int>>& free_idx,
                         const std::vector<std::vector<int>>& free_rows,
                         double tau_r, double eps1, double eps2) {
  const double n_bs = double(a.size());
  for (const auto& [i, j] : free_idx)
    if (std::abs(w(i, j)) > (1.0 + eps1) * (1.0 + 1e-10)) return false;
  double dist_sq = 0.0;
  for (const auto& [i, j] : free_idx) dist_sq += std::norm(w(i, j) - prev(i, j));
  if (std::sqrt(dist_sq) > eps2 * (1.0 + 1e-9) + 1e-12) return false;
  for (Eigen::Index c = 0; c < w.cols(); ++c) {
    if (free_rows[std::size_t(c)].empty()) continue;
    const cplx s = (w.col(c).adjoint() * a)(0);
    if (std::abs(cplx(n_bs, 0.0) - s) > n_bs - tau_r + 1e-8 * n_bs) return false;
  }
  return true;
}

struct InnerResult {
  bool feasible = false;
  bool converged = false;
  double objective = std::numeric_limits<double>::infinity();
};

/**
 * Projected-gradient solve of the convex subproblem over the free entries:
 * minimize tr(W^H Q W) subject to the relaxed modulus box, the eps2 trust
 * region around the previous iterate, and the per-column gain cone.  Each
 * iteration takes one Lipschitz-safe gradient step (step 1/lambda_max on
 * Q W) and a few cyclic passes of exact projections.  The best feasible
 * iterate is tracked, so the reported objective never increases.
 */
inline InnerResult solve_subproblem_core(CMat& w, const CVec& a, const CMat& q,
                                         double lambda_max,
                                         const std::vector<std::pair<int, int>>& free_idx,
                                         double tau_r, double eps1, double eps2,
                                         int max_inner, double rel_tol,
                                         int pocs_cycles) {
  const CMat prev = w;
  std::vector<std::vector<int>> free_rows(std::size_t(w.cols()));
  for (const auto& [i, j] : free_idx) free_rows[std::size_t(j)].push_back(i);

  const auto pocs = [&](CMat& x, int cycles) {
    for (int cyc = 0; cyc < cycles; ++cyc) {
      project_modulus(x, free_idx, eps1);
      for (Eigen::Index c = 0; c < x.cols(); ++c)
        project_gain_cone(x, a, int(c), free_rows[std::size_t(c)], tau_r);
      project_trust_region(x, prev, free_idx, eps2);
    }
  };

  InnerResult res;
  CMat best = w;
  const double step = lambda_max > 0.0 ? 1.0 / lambda_max : 0.0;
  double last_feasible_obj = std::numeric_limits<double>::infinity();

  for (int it = 0; it < max_inner; ++it) {
    if (step > 0.0) {
      const CMat grad = q * w;
      for (const auto& [i, j] : free_idx) w(i, j) -= step * grad(i, j);
    }
    pocs(w, pocs_cycles);
    if (!bcd_feasible(w, prev, a, free_idx, free_rows, tau_r, eps1, eps2)) continue;
    const double obj = si_objective(w, q);
    if (obj < res.objective) {
      res.objective = obj;
      res.feasible = true;
      best = w;
    }
    const double improvement = last_feasible_obj - obj;
    if (std::isfinite(last_feasible_obj) && improvement >= 0.0 &&
        improvement <= rel_tol * std::max(last_feasible_obj, 1e-300)) {
      res.converged = true;
      break;
    }
    last_feasible_obj = obj;
    if (step == 0.0) break;  // zero objective: any feasible point is optimal
  }

  if (res.feasible) {
    w = best;
  } else {
    // No feasible point found: hand back the feasible projection of the
    // previous iterate (best effort when the intersection is empty).
    w = prev;
    pocs(w, 5 * pocs_cycles);
  }
  return res;
}

}  // namespace detail

/**
 * @brief One convex BCD subproblem over an explicit free-entry set.
 *
 * Minimizes the SI objective over the free entries of state.combiner subject
 * to the modulus box |w_ij| <= 1 + eps1, the trust region
 * ||W_free - W_prev,free|| <= eps2, and the per-column gain cone
 * |N_BS - w_col^H a(angle)| <= N_BS - tau_r.  Returns the updated full
 * matrix; converged (when given) reports whether the relative objective
 * tolerance of 1e-6 was met within the iteration cap.
 */
inline CMat solve_bcd_subproblem(const BcdState& state,
                                 const std::vector<std::pair<int, int>>& indices,
                                 const CMat& h_si, const std::vector<CMat>& precoders,
                                 const UlaSpec& bs, double angle, double tau_r,
                                 double eps1, double eps2, bool* converged = nullptr,
                                 int max_inner = 200, double rel_tol = 1e-6) {
  require(!indices.empty(), "bcd subproblem: free index set must be non-empty");
  for (const auto& [i, j] : indices)
    require(i >= 0 && i < state.combiner.rows() && j >= 0 && j < state.combiner.cols(),
            "bcd subproblem: index out of range");
  require(eps1 > 0.0 && eps2 > 0.0, "bcd subproblem: eps1, eps2 must be positive");

  const CVec a = ula_response(bs, angle);
  const CMat q = detail::si_quadratic_kernel(h_si, precoders);
  const double lambda_max = std::max(herm_eig(q).values(0), 0.0);
  CMat w = state.combiner;
  const auto res = detail::solve_subproblem_core(w, a, q, lambda_max, indices, tau_r,
                                                 eps1, eps2, max_inner, rel_tol, 10);
  if (converged != nullptr) *converged = res.converged;
  return w;
}

/**
 * @brief Analog SI-minimizing combiner via block coordinate descent.
 *
 * Starts from steering-vector columns (maximal receive gain, feasible for any
 * tau_r <= N_BS), then repeats: draw ceil(block_fraction*N_BS*N_RF) free
 * entries with the seeded generator, solve the convex subproblem over them,
 * and renormalize every entry to unit modulus.  Iterates are ranked by gain
 * tier first (strict: gain >= tau_r - 1e-9*N_BS, then slack 1e-3*N_BS), then
 * by SI objective; the best iterate is returned in best_combiner.  Strict
 * preference keeps the tau_r = N_BS corner exact: only the steering vector
 * itself attains the full gain under unit modulus.
 *
 * tau_r is an amplitude threshold on |w_col^H a|, which spans [0, N_BS] for
 * unit-modulus columns.
 *
 * @throws config_error if tau_r > N_BS.
 * @throws contract_error on invalid block_fraction, eps, or iteration counts.
 */
inline BcdState bcd_run(const CMat& h_si, const std::vector<CMat>& precoders,
                        const UlaSpec& bs, double angle, double tau_r, double eps1,
                        double eps2, double block_fraction = 0.25,
                        int outer_iters = 50, std::uint64_t seed = 0) {
  const int n_bs = int(h_si.rows());
  const int n_rf = int(precoders.empty() ? 0 : precoders[0].cols());
  require(!precoders.empty(), "bcd: need at least one precoder");
  require(h_si.cols() == precoders[0].rows(), "bcd: H_SI/precoder shape mismatch");
  if (tau_r > double(n_bs))
    throw config_error("bcd: tau_r exceeds the maximal receive gain N_BS");
  require(block_fraction > 0.0 && block_fraction <= 1.0,
          "bcd: block_fraction must lie in (0, 1]");
  require(eps1 > 0.0 && eps2 > 0.0, "bcd: eps1, eps2 must be positive");
  require(outer_iters >= 1, "bcd: outer_iters must be at least 1");
  require(bs.n_ant == n_bs, "bcd: array size does not match H_SI");

  const CVec a = ula_response(bs, angle);
  const CMat q = detail::si_quadratic_kernel(h_si, precoders);
  const double lambda_max = std::max(herm_eig(q).values(0), 0.0);
  const double strict_slack = 1e-9 * n_bs;
  const double loose_slack = 1e-3 * n_bs;

  BcdState state;
  state.rng_seed = seed;
  state.combiner = CMat(n_bs, n_rf);
  for (int c = 0; c < n_rf; ++c) state.combiner.col(c) = a;

  const auto gain_tier = [&](const CMat& w) {
    const double gain = rx_radar_gain(w, a).minCoeff();
    if (gain >= tau_r - strict_slack) return 0;
    if (gain >= tau_r - loose_slack) return 1;
    return 2;
  };

  int best_tier = gain_tier(state.combiner);
  state.best_combiner = state.combiner;
  state.best_objective = detail::si_objective(state.combiner, q);
  state.objective_history.push_back(state.best_objective);

  Rng rng(seed);
  const int total = n_bs * n_rf;
  const int block = int(std::ceil(block_fraction * double(total)));
  std::vector<int> pool(static_cast<std::size_t>(total), 0);

  for (int outer = 0; outer < outer_iters; ++outer) {
    for (int k = 0; k < total; ++k) pool[std::size_t(k)] = k;
    std::vector<std::pair<int, int>> free_idx;
    free_idx.reserve(std::size_t(block));
    for (int k = 0; k < block; ++k) {  // partial Fisher-Yates draw
      const std::uint64_t pick = k + rng.integer(std::uint64_t(total - k));
      std::swap(pool[std::size_t(k)], pool[std::size_t(pick)]);
      free_idx.emplace_back(pool[std::size_t(k)] % n_bs, pool[std::size_t(k)] / n_bs);
    }
    std::sort(free_idx.begin(), free_idx.end());

    CMat w = state.combiner;
    const auto res = detail::solve_subproblem_core(w, a, q, lambda_max, free_idx,
                                                   tau_r, eps1, eps2, 200, 1e-6, 10);
    if (!res.converged) state.warning = true;

    for (Eigen::Index i = 0; i < w.rows(); ++i) {  // renormalize to unit modulus
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        const double mag = std::abs(w(i, j));
        w(i, j) = mag > 0.0 ? w(i, j) / mag : cplx(1.0, 0.0);
      }
    }

    state.combiner = w;
    state.iteration = outer + 1;
    const double obj = detail::si_objective(w, q);
    state.objective_history.push_back(obj);
    const int tier = gain_tier(w);
    if (tier < best_tier || (tier == best_tier && obj < state.best_objective)) {
      best_tier = tier;
      state.best_objective = obj;
      state.best_combiner = w;
    }
  }
  return state;
}

/// Best unit-modulus combiner from a full BCD run.
inline CMat bcd_combiner(const CMat& h_si, const std::vector<CMat>& precoders,
                         const UlaSpec& bs, double angle, double tau_r, double eps1,
                         double eps2, double block_fraction = 0.25,
                         int outer_iters = 50, std::uint64_t seed = 0) {
  return bcd_run(h_si, precoders, bs, angle, tau_r, eps1, eps2, block_fraction,
                 outer_iters, seed)
      .best_combiner;
}

/**
 * @brief Null-space-projection benchmark combiner (fully digital).
 *
 * Stacks {H_SI F_m} over subcarriers, keeps the smallest dominant left
 * singular subspace holding energy_threshold of the squared singular-value
 * mass, and projects the steering vector onto its orthogonal complement.
 * Columns are replicated across RF chains and normalized to norm
 * sqrt(N_BS), the same column norm as a unit-modulus combiner.
 *
 * @throws contract_error if energy_threshold is outside (0, 1].
 * @throws numeric_error if the projected steering vector is numerically zero
 *         (steering direction inside the SI subspace).
 */
inline CMat nsp_combiner(const CMat& h_si, const std::vector<CMat>& precoders,
                         const UlaSpec& bs, double angle, int n_rf,
                         double energy_threshold = 1.0 - 1e-10) {
  require(!precoders.empty(), "nsp: need at least one precoder");
  require(energy_threshold > 0.0 && energy_threshold <= 1.0,
          "nsp: energy_threshold must lie in (0, 1]");
  require(n_rf >= 1, "nsp: n_rf must be at least 1");

  const Eigen::Index n_bs = h_si.rows();
  const Eigen::Index n_s = precoders[0].cols();
  CMat stacked(n_bs, Eigen::Index(precoders.size()) * n_s);
  for (std::size_t m = 0; m < precoders.size(); ++m)
    stacked.middleCols(Eigen::Index(m) * n_s, n_s) = h_si * precoders[m];

  const Eigen::Index k_max = std::min(n_bs, stacked.cols());
  Eigen::JacobiSVD<CMat> svd(stacked, Eigen::ComputeThinU);
  const RVec sigma = svd.singularValues();
  const double total = sigma.array().square().sum();
  Eigen::Index rank = k_max;
  if (total > 0.0) {
    double cum = 0.0;
    for (Eigen::Index i = 0; i < k_max; ++i) {
      cum += sigma(i) * sigma(i);
      if (cum >= energy_threshold * total) {
        rank = i + 1;
        break;
      }
    }
  } else {
    rank = 0;  // zero SI: nothing to null
  }

  const CVec a = ula_response(bs, angle);
  CVec w = a;
  if (rank > 0) {
    const CMat u = svd.matrixU().leftCols(rank);
    w -= u * (u.adjoint() * a);
  }
  if (w.norm() <= 1e-12 * a.norm())
    throw numeric_error(
        "nsp: steering vector lies inside the SI subspace (degenerate geometry)");
  w *= std::sqrt(double(n_bs)) / w.norm();

  CMat out(n_bs, n_rf);
  for (int c = 0; c < n_rf; ++c) out.col(c) = w;
  return out;
}

/// Benchmark combiner: every RF chain listens on the steering vector.
inline CMat steering_combiner(const UlaSpec& bs, double angle, int n_rf) {
  require(n_rf >= 1, "steering_combiner: n_rf must be at least 1");
  const CVec a = ula_response(bs, angle);
  CMat w(bs.n_ant, n_rf);
  for (int c = 0; c < n_rf; ++c) w.col(c) = a;
  return w;
}

/// Benchmark combiner: each RF chain taps one antenna (no beamforming).
inline CMat identity_combiner(int n_bs, int n_rf) {
  require(n_rf >= 1 && n_rf <= n_bs, "identity_combiner: need 1 <= n_rf <= n_bs");
  return CMat::Identity(n_bs, n_rf);
}

}  // namespace fdjrc
