/* common.hpp: error taxonomy, deterministic RNG, summation helpers.
 *
 * Everything random in the library funnels through Rng so that a run is
 * reproducible bit for bit from its recorded seed. std::mt19937_64 drives the
 * stream, but the uniform/normal shaping is done by hand because the standard
 * distributions are implementation-defined.
 */

#ifndef VPME_COMMON_HPP
#define VPME_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace vpme {

inline constexpr const char* kVersion = "0.1.0";

/* Two error families matter to callers: configuration problems (rejected
 * before any compute, CLI exit 2) and runtime failures. NoConvergence gets
 * its own type so the CLI can map it to exit 3. */
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};
struct ParseError : ConfigError {
  using ConfigError::ConfigError;
};
struct UnknownKey : ConfigError {
  using ConfigError::ConfigError;
};
struct UnknownKind : ConfigError {
  using ConfigError::ConfigError;
};
struct UnresolvableWidth : ConfigError {
  using ConfigError::ConfigError;
};

struct DomainError : Error {
  using Error::Error;
};
struct GridMismatch : DomainError {
  using DomainError::DomainError;
};
struct NonUnitMass : DomainError {
  using DomainError::DomainError;
};
struct MassMismatch : DomainError {
  using DomainError::DomainError;
};
struct TooLarge : DomainError {
  using DomainError::DomainError;
};

struct NoConvergence : Error {
  int iters;
  double residual;
  NoConvergence(const std::string& what, int it, double res)
      : Error(what), iters(it), residual(res) {}
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(splitmix64(seed)) {}

  /* uniform in [0, 1), 53-bit resolution */
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /* standard normal via Box-Muller; the second value of each pair is kept */
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double rad = std::sqrt(-2.0 * std::log(u1));
    double ang = 6.283185307179586476925286766559 * u2;
    spare_ = rad * std::sin(ang);
    have_spare_ = true;
    return rad * std::cos(ang);
  }

  /* uniform integer in [0, n) without modulo bias */
  uint64_t index(uint64_t n) {
    if (n == 0) throw DomainError("Rng::index: n must be positive");
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/* Fixed-order pairwise summation. Used for every reduction whose value ends
 * up in an output file or a tolerance check: the bracketing is a pure
 * function of n, so results do not depend on chunking or thread count, and
 * the roundoff is O(log n) rather than O(n). */
inline double pairwise_sum(const double* a, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i];
    return s;
  }
  std::size_t half = n / 2;
  return pairwise_sum(a, half) + pairwise_sum(a + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& a) {
  return pairwise_sum(a.data(), a.size());
}

/* Sum f(i) for i in [0, n) with the same fixed bracketing. */
template <class F>
double pairwise_sum_indexed(std::size_t lo, std::size_t n, F&& f) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += f(lo + i);
    return s;
  }
  std::size_t half = n / 2;
  return pairwise_sum_indexed(lo, half, f) +
         pairwise_sum_indexed(lo + half, n - half, f);
}

template <class F>
double pairwise_sum_indexed(std::size_t n, F&& f) {
  return pairwise_sum_indexed<F>(0, n, std::forward<F>(f));
}

}  // namespace vpme

#endif
