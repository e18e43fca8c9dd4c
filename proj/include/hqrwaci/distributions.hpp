#pragma once

#include <cstdint>
#include <random>

namespace hqrwaci {

/// Standard normal quantile function (inverse CDF), Wichura's AS241 PPND16
/// rational approximations, accurate to ~1e-15 over (0, 1). Throws
/// std::invalid_argument outside (0, 1).
[[nodiscard]] double normal_quantile(double p);

/// Regularized incomplete beta function I_x(a, b), continued-fraction
/// evaluation (modified Lentz). Domain: a, b > 0, x in [0, 1].
[[nodiscard]] double regularized_incomplete_beta(double a, double b, double x);

/// CDF of Student's t distribution with dof degrees of freedom.
[[nodiscard]] double student_t_cdf(double t, int dof);

/// p-quantile of Student's t with dof degrees of freedom, found by bisection
/// on student_t_cdf to absolute tolerance 1e-12. Throws std::invalid_argument
/// when p is outside (0, 1) or dof < 1.
[[nodiscard]] double t_critical(double p, int dof);

/// Derives a stream seed from a master seed and an index (splitmix64 of
/// master + golden-gamma * (index + 1)); stable across platforms.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Deterministic uniform(0,1) stream: mt19937_64 bits mapped to the open
/// interval as ((x >> 11) + 0.5) * 2^-53, so 0 and 1 never occur and
/// inverse-CDF transforms stay finite.
class UniformStream {
 public:
  explicit UniformStream(std::uint64_t seed) : engine_(seed) {}
  [[nodiscard]] double next() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1p-53;
  }
  /// Standard normal draw via inverse-CDF transform of next().
  [[nodiscard]] double next_normal() { return normal_quantile(next()); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace hqrwaci
