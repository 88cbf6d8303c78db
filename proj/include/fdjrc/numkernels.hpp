#ifndef FDJRC_NUMKERNELS_HPP
#define FDJRC_NUMKERNELS_HPP

#include <algorithm>
#include <mutex>
#include <vector>

#include <Eigen/Dense>
#include <fftw3.h>

#include "fdjrc/common.hpp"

namespace fdjrc {

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.
struct EigPair {
  RVec values;   ///< real eigenvalues, values(0) is the largest
  CMat vectors;  ///< orthonormal columns, vectors.col(i) pairs with values(i)
};

struct SvdResult {
  CMat u;
  RVec s;  ///< singular values, descending
  CMat v;
};

namespace detail {

inline bool is_hermitian(const CMat& a, double rel_tol) {
  const double scale = a.norm();
  return (a - a.adjoint()).norm() <= rel_tol * std::max(1.0, scale);
}

/// FFTW plan creation/destruction is not thread-safe; execution is.
inline std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

inline EigPair herm_eig(const CMat& a) {
  require(a.rows() == a.cols(), "herm_eig: matrix must be square");
  require(detail::is_hermitian(a, 1e-10), "herm_eig: matrix is not Hermitian");
  require_finite(a, "herm_eig input");

  Eigen::SelfAdjointEigenSolver<CMat> es(a);
  if (es.info() != Eigen::Success)
    throw numeric_error("herm_eig: eigendecomposition failed to converge");

  const Eigen::Index n = a.rows();
  EigPair out;
  out.values = es.eigenvalues().reverse();
  out.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    out.vectors.col(i) = es.eigenvectors().col(n - 1 - i);
  return out;
}

inline SvdResult svd_truncated(const CMat& h, Eigen::Index k) {
  require(k >= 1 && k <= std::min(h.rows(), h.cols()),
          "svd_truncated: k must be in [1, min(rows, cols)]");
  require_finite(h, "svd_truncated input");

  Eigen::JacobiSVD<CMat> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdResult out;
  out.u = svd.matrixU().leftCols(k);
  out.s = svd.singularValues().head(k);
  out.v = svd.matrixV().leftCols(k);
  return out;
}

/// Moore-Penrose pseudoinverse via a rank-revealing decomposition.
inline CMat pinv(const CMat& a) {
  require_finite(a, "pinv input");
  Eigen::CompleteOrthogonalDecomposition<CMat> cod(a);
  return cod.pseudoInverse();
}

/**
 * @brief Top-k generalized eigenvectors of the pencil (A, C + ridge I).
 *
 * A must be Hermitian and C Hermitian positive semidefinite.  A negative
 * ridge requests the default loading of 1e-8 * trace(C)/n (1e-8 absolute when
 * C has zero trace).  The returned n-by-k matrix F satisfies
 * A F = (C + ridge I) F diag(lambda) for the k largest lambda and
 * F^H (C + ridge I) F = I.
 */
inline CMat gev_top_k(const CMat& a, const CMat& c, Eigen::Index k,
                      double ridge = -1.0) {
  const Eigen::Index n = a.rows();
  require(a.rows() == a.cols() && c.rows() == c.cols() && c.rows() == n,
          "gev_top_k: A and C must be square with matching sizes");
  require(k >= 1 && k <= n, "gev_top_k: k must be in [1, n]");
  require(detail::is_hermitian(a, 1e-10), "gev_top_k: A is not Hermitian");
  require(detail::is_hermitian(c, 1e-10), "gev_top_k: C is not Hermitian");
  require_finite(a, "gev_top_k A");
  require_finite(c, "gev_top_k C");

  if (ridge < 0.0) {
    const double tr = c.real().trace();
    ridge = tr > 0.0 ? 1e-8 * tr / static_cast<double>(n) : 1e-8;
  }
  CMat cp = c + ridge * CMat::Identity(n, n);
  cp = (cp + cp.adjoint().eval()) / 2.0;

  Eigen::SelfAdjointEigenSolver<CMat> cond(cp);
  if (cond.info() != Eigen::Success)
    throw numeric_error("gev_top_k: conditioning check failed to converge");
  const double emin = cond.eigenvalues()(0);
  const double emax = cond.eigenvalues()(n - 1);
  if (emax <= 0.0 || emin < 1e-14 * emax)
    throw numeric_error(
        "gev_top_k: C + ridge I is numerically singular; increase the ridge");

  Eigen::LLT<CMat> llt(cp);
  if (llt.info() != Eigen::Success)
    throw numeric_error("gev_top_k: Cholesky factorization failed; increase the ridge");
  const CMat l = llt.matrixL();

  // Whiten: S = L^-1 A L^-H is Hermitian with the pencil's eigenvalues.
  CMat t = l.triangularView<Eigen::Lower>().solve(a);
  CMat s = l.triangularView<Eigen::Lower>().solve(t.adjoint().eval());
  s = (s + s.adjoint().eval()) / 2.0;

  Eigen::SelfAdjointEigenSolver<CMat> es(s);
  if (es.info() != Eigen::Success)
    throw numeric_error("gev_top_k: eigendecomposition failed to converge");

  CMat vk(n, k);
  for (Eigen::Index i = 0; i < k; ++i)
    vk.col(i) = es.eigenvectors().col(n - 1 - i);
  return l.adjoint().triangularView<Eigen::Upper>().solve(vk);
}

/**
 * @brief Zero-padded 2-D DFT with mixed sign conventions.
 *
 * out(p, q) = sum_{m,n} z(m, n) * exp(+j 2 pi m p / m_out)
 *                              * exp(-j 2 pi n q / n_out).
 * The positive sign along rows and negative sign along columns match the
 * phase progression of a delayed, Doppler-shifted multicarrier echo, so an
 * on-grid tone produces a single real peak.
 */
inline CMat dft_padded_2d(const CMat& z, Eigen::Index m_out, Eigen::Index n_out) {
  require(z.rows() >= 1 && z.cols() >= 1, "dft_padded_2d: input must be non-empty");
  require(m_out >= z.rows() && n_out >= z.cols(),
          "dft_padded_2d: output grid must be at least the input size");
  require_finite(z, "dft_padded_2d input");

  std::vector<cplx> buf(static_cast<std::size_t>(m_out) * n_out, cplx(0, 0));
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = 0; j < z.cols(); ++j)
      buf[static_cast<std::size_t>(i) * n_out + j] = z(i, j);

  auto* data = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(detail::fftw_mutex());
    plan = fftw_plan_dft_2d(static_cast<int>(m_out), static_cast<int>(n_out),
                            data, data, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  if (plan == nullptr) throw numeric_error("dft_padded_2d: FFTW plan creation failed");
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(detail::fftw_mutex());
    fftw_destroy_plan(plan);
  }

  // The forward transform has e^{-j...} on both axes; flipping the row index
  // converts the row axis to the e^{+j...} convention.
  CMat out(m_out, n_out);
  for (Eigen::Index p = 0; p < m_out; ++p) {
    const Eigen::Index src = (m_out - p) % m_out;
    for (Eigen::Index q = 0; q < n_out; ++q)
      out(p, q) = buf[static_cast<std::size_t>(src) * n_out + q];
  }
  return out;
}

/// Zero-padded 1-D DFT; sign +1 uses exp(+j 2 pi m p / n_out), -1 the conjugate.
inline CVec dft_padded_1d(const CVec& z, Eigen::Index n_out, int sign) {
  require(z.size() >= 1, "dft_padded_1d: input must be non-empty");
  require(n_out >= z.size(), "dft_padded_1d: output length must be at least the input");
  require(sign == 1 || sign == -1, "dft_padded_1d: sign must be +1 or -1");
  require_finite(z, "dft_padded_1d input");

  std::vector<cplx> buf(static_cast<std::size_t>(n_out), cplx(0, 0));
  for (Eigen::Index i = 0; i < z.size(); ++i) buf[static_cast<std::size_t>(i)] = z(i);

  auto* data = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(detail::fftw_mutex());
    plan = fftw_plan_dft_1d(static_cast<int>(n_out), data, data,
                            sign == 1 ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
  }
  if (plan == nullptr) throw numeric_error("dft_padded_1d: FFTW plan creation failed");
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(detail::fftw_mutex());
    fftw_destroy_plan(plan);
  }

  CVec out(n_out);
  for (Eigen::Index i = 0; i < n_out; ++i) out(i) = buf[static_cast<std::size_t>(i)];
  return out;
}

}  // namespace fdjrc

#endif  // FDJRC_NUMKERNELS_HPP
