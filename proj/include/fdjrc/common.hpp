#ifndef FDJRC_COMMON_HPP
#define FDJRC_COMMON_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace fdjrc {

using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using cplx = std::complex<double>;

inline constexpr double speed_of_light = 299792458.0;
inline constexpr double pi = 3.141592653589793238462643383279502884;

/// Invalid user-supplied configuration (CLI maps this to exit code 2).
class config_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition.
class contract_error : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// A numerically degenerate input that the algorithm cannot recover from.
class numeric_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw contract_error(msg);
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const std::string& name) {
  if (!m.allFinite()) throw numeric_error(name + " contains non-finite entries");
}

inline double deg_to_rad(double d) { return d * pi / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / pi; }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }
inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

/**
 * @brief Deterministic random stream used everywhere randomness is needed.
 *
 * All draws are implemented directly on top of the 64-bit Mersenne Twister
 * output so that sequences are bit-identical across platforms and standard
 * library versions (std::normal_distribution and friends are not portable).
 */
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(state_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; consumes exactly two raw draws.
  double normal() {
    const double u1 = static_cast<double>((state_() >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi * u2);
  }

  /// Circularly symmetric complex Gaussian with E|z|^2 = variance.
  cplx cnormal(double variance) {
    const double s = std::sqrt(variance / 2.0);
    const double re = s * normal();
    const double im = s * normal();
    return {re, im};
  }

  /// Uniform integer in [0, n); rejection sampling, no modulo bias.
  std::uint64_t integer(std::uint64_t n) {
    if (n == 0) throw contract_error("Rng::integer requires n > 0");
    const std::uint64_t rem = (std::numeric_limits<std::uint64_t>::max() % n + 1) % n;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - rem;
    std::uint64_t x;
    do {
      x = state_();
    } while (x > limit);
    return x % n;
  }

  std::uint64_t raw() { return state_(); }

private:
  std::mt19937_64 state_;
};

/// Splitmix64 finalizer; decorrelates substreams derived from one base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace fdjrc

#endif  // FDJRC_COMMON_HPP
