#pragma once

// Special functions and adaptive quadrature. Everything here is deterministic,
// allocation-light and free of lookup tables beyond fixed series coefficients.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "dirnet/errors.hpp"

namespace dirnet {

namespace detail {

inline bool is_nonpositive_integer(double x) { return x <= 0.0 && x == std::nearbyint(x); }

// sin(pi x) with exact argument reduction, so sin_pi(k) == 0 for integer k.
inline double sin_pi(double x) {
  double r = std::fmod(x, 2.0);
  if (r < 0.0) r += 2.0;
  if (r == 0.0 || r == 1.0) return 0.0;
  if (r == 0.5) return 1.0;
  if (r == 1.5) return -1.0;
  return std::sin(std::numbers::pi * r);
}

// Stirling series for log Gamma, accurate to double precision for x >= 15.
inline double log_gamma_stirling(double x) {
  // B_{2k} / (2k (2k-1)) for k = 1..8
  constexpr std::array<double, 8> coeff = {
      1.0 / 12.0,          -1.0 / 360.0,          1.0 / 1260.0,      -1.0 / 1680.0,
      1.0 / 1188.0,        -691.0 / 360360.0,     1.0 / 156.0,       -3617.0 / 122400.0};
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  double series = 0.0;
  double power = inv;
  for (double c : coeff) {
    series += c * power;
    power *= inv2;
  }
  return (x - 0.5) * std::log(x) - x + 0.5 * std::log(2.0 * std::numbers::pi) + series;
}

constexpr double stirling_threshold = 15.0;

// Gamma on the positive axis.
inline double gamma_positive(double x) {
  if (x == std::nearbyint(x) && x <= 23.0) {
    double factorial = 1.0;  // exact through 22!
    for (double k = 2.0; k < x; k += 1.0) factorial *= k;
    return factorial;
  }
  if (x >= stirling_threshold) return std::exp(log_gamma_stirling(x));
  double shifted = x;
  double product = 1.0;
  while (shifted < stirling_threshold) {
    product *= shifted;
    shifted += 1.0;
  }
  return std::exp(log_gamma_stirling(shifted)) / product;
}

// Gamma on the whole real line except the poles.
inline double gamma_any(double x) {
  if (is_nonpositive_integer(x)) throw domain_error("gamma: pole at non-positive integer");
  if (x > 0.0) return gamma_positive(x);
  return std::numbers::pi / (sin_pi(x) * gamma_positive(1.0 - x));
}

// 1/Gamma(x), zero at the poles.
inline double rgamma(double x) {
  if (is_nonpositive_integer(x)) return 0.0;
  if (x > 0.0) return 1.0 / gamma_positive(x);
  return sin_pi(x) * gamma_positive(1.0 - x) / std::numbers::pi;
}

}  // namespace detail

/// Natural log of Gamma(x) for x > 0.
inline double log_gamma(double x) {
  if (!(x > 0.0)) throw domain_error("log_gamma: argument must be positive");
  if (x >= detail::stirling_threshold) return detail::log_gamma_stirling(x);
  double shifted = x;
  double log_product = 0.0;
  while (shifted < detail::stirling_threshold) {
    log_product += std::log(shifted);
    shifted += 1.0;
  }
  return detail::log_gamma_stirling(shifted) - log_product;
}

/// Gamma(x) for x > 0. Overflows to +inf beyond x ~ 171.6.
inline double gamma_fn(double x) {
  if (!(x > 0.0)) throw domain_error("gamma_fn: argument must be positive");
  return detail::gamma_positive(x);
}

/// Digamma psi(x) = Gamma'(x)/Gamma(x), any real x except the poles.
inline double digamma(double x) {
  if (detail::is_nonpositive_integer(x)) throw domain_error("digamma: pole at non-positive integer");
  if (x < 0.0) {
    // psi(x) = psi(1 - x) - pi cot(pi x)
    const double s = detail::sin_pi(x);
    const double c = detail::sin_pi(x + 0.5);
    return digamma(1.0 - x) - std::numbers::pi * c / s;
  }
  double result = 0.0;
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  // B_{2k} / (2k) for k = 1..7
  constexpr std::array<double, 7> coeff = {1.0 / 12.0,   -1.0 / 120.0, 1.0 / 252.0,       -1.0 / 240.0,
                                           1.0 / 132.0, -691.0 / 32760.0, 1.0 / 12.0};
  const double inv2 = 1.0 / (x * x);
  double power = inv2;
  double series = 0.0;
  for (double c : coeff) {
    series += c * power;
    power *= inv2;
  }
  return result + std::log(x) - 0.5 / x - series;
}

// ---------------------------------------------------------------------------
// Error function family

namespace detail {

constexpr double erfc_split = 2.0;

// erf(x) for 0 <= x < erfc_split via the everywhere-positive series
// erf(x) = 2/sqrt(pi) e^{-x^2} sum_n (2x^2)^n x / (1*3*...*(2n+1)).
inline double erf_series(double x) {
  const double x2 = x * x;
  double term = x;
  double sum = x;
  for (int n = 0; n < 200; ++n) {
    term *= 2.0 * x2 / (2.0 * n + 3.0);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return 2.0 / std::sqrt(std::numbers::pi) * std::exp(-x2) * sum;
}

// e^{x^2} erfc(x) for x >= erfc_split by the Laplace continued fraction,
// evaluated with the modified Lentz method.
inline double erfcx_continued_fraction(double x) {
  constexpr double tiny = 1e-300;
  double f = x;
  double c = x;
  double d = 0.0;
  for (int k = 1; k < 5000; ++k) {
    const double a = 0.5 * k;
    d = x + a * d;
    if (d == 0.0) d = tiny;
    c = x + a / c;
    if (c == 0.0) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return 1.0 / (std::sqrt(std::numbers::pi) * f);
}

}  // namespace detail

/// Complementary error function.
inline double erfc(double x) {
  if (std::isnan(x)) return x;
  if (x < 0.0) return 2.0 - erfc(-x);
  if (x < detail::erfc_split) return 1.0 - detail::erf_series(x);
  if (x > 27.3) return 0.0;
  return std::exp(-x * x) * detail::erfcx_continued_fraction(x);
}

inline double erf(double x) { return 1.0 - erfc(x); }

/// Scaled complementary error function e^{x^2} erfc(x); finite for large x.
inline double erfcx(double x) {
  if (x < detail::erfc_split) return std::exp(x * x) * erfc(x);
  return detail::erfcx_continued_fraction(x);
}

// ---------------------------------------------------------------------------
// Gauss hypergeometric function 2F1(a, b; c; z) for real z <= 1.

namespace detail {

// Neumaier-compensated accumulator; long series near z = 1 need it.
struct compensated_sum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      carry += (sum - t) + v;
    else
      carry += (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

inline double hyp2f1_power_series(double a, double b, double c, double z, long max_terms) {
  compensated_sum acc;
  acc.add(1.0);
  double term = 1.0;
  int small_run = 0;
  for (long n = 0; n < max_terms; ++n) {
    term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * z;
    acc.add(term);
    if (term == 0.0) return acc.value();
    if (std::abs(term) <= 1e-17 * std::abs(acc.value())) {
      if (++small_run >= 3) return acc.value();
    } else {
      small_run = 0;
    }
  }
  throw domain_error("hyp2f1: power series did not converge");
}

// Terminating series when a or b is a non-positive integer.
inline double hyp2f1_polynomial(double a, double b, double c, double z) {
  const double m = is_nonpositive_integer(a) ? (is_nonpositive_integer(b) ? std::max(a, b) : a) : b;
  const long terms = static_cast<long>(-m);
  double term = 1.0;
  double sum = 1.0;
  for (long n = 0; n < terms; ++n) {
    term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * z;
    sum += term;
  }
  return sum;
}

// 1 - z linear transformation, excess m = c - a - b not an integer.
inline double hyp2f1_linear_one(double a, double b, double c, double z) {
  const double w = 1.0 - z;
  const double m = c - a - b;
  const double gc = gamma_any(c);
  double first = 0.0;
  const double coef1 = gc * gamma_any(m) * rgamma(c - a) * rgamma(c - b);
  if (coef1 != 0.0) first = coef1 * hyp2f1_power_series(a, b, 1.0 - m, w, 100000);
  double second = 0.0;
  const double coef2 = gc * gamma_any(-m) * rgamma(a) * rgamma(b);
  if (coef2 != 0.0) second = coef2 * std::pow(w, m) * hyp2f1_power_series(c - a, c - b, m + 1.0, w, 100000);
  return first + second;
}

// 1 - z transformation for integer excess c = a + b + m, m >= 0
// (logarithmic case).
inline double hyp2f1_linear_one_integer(double a, double b, int m, double z) {
  const double w = 1.0 - z;
  const double c = a + b + m;
  double finite = 0.0;
  if (m > 0) {
    double term = 1.0;
    double sum = 1.0;
    for (int n = 0; n + 1 < m; ++n) {
      term *= (a + n) * (b + n) / ((n + 1.0) * (1.0 - m + n)) * w;
      sum += term;
    }
    finite = gamma_any(m) * gamma_any(c) * rgamma(a + m) * rgamma(b + m) * sum;
  }
  const double prefactor = ((m % 2 == 0) ? 1.0 : -1.0) * std::pow(w, m) * gamma_any(c) * rgamma(a) * rgamma(b);
  if (prefactor == 0.0) return finite;
  const double log_w = std::log(w);
  // term_n = (a+m)_n (b+m)_n / (n! (n+m)!) w^n
  double term = rgamma(m + 1.0);
  compensated_sum acc;
  for (int n = 0; n < 100000; ++n) {
    const double bracket = log_w - digamma(n + 1.0) - digamma(n + m + 1.0) +
                           (is_nonpositive_integer(a + n + m) ? 0.0 : digamma(a + n + m)) +
                           (is_nonpositive_integer(b + n + m) ? 0.0 : digamma(b + n + m));
    const double contribution = term * bracket;
    acc.add(contribution);
    if (std::abs(term) * (std::abs(bracket) + 1.0) <= 1e-17 * std::abs(acc.value()) && n > 2) break;
    term *= (a + m + n) * (b + m + n) / ((n + 1.0) * (n + m + 1.0)) * w;
  }
  return finite - prefactor * acc.value();
}

// Gauss summation theorem.
inline double hyp2f1_at_one(double a, double b, double c) {
  const double m = c - a - b;
  if (!(m > 0.0)) throw domain_error("hyp2f1: series diverges at z = 1 (requires c - a - b > 0)");
  return gamma_any(c) * gamma_any(m) * rgamma(c - a) * rgamma(c - b);
}

// 0.5 < z < 1.
inline double hyp2f1_near_one(double a, double b, double c, double z) {
  const double w = 1.0 - z;
  const double m = c - a - b;
  // Euler transformation flips a negative excess.
  if (m < 0.0) return std::pow(w, m) * hyp2f1_near_one(c - a, c - b, c, z);

  const double k = std::nearbyint(m);
  const double offset = std::abs(m - k);
  if (offset >= 1e-3) return hyp2f1_linear_one(a, b, c, z);
  if (offset < 1e-14) return hyp2f1_linear_one_integer(a, b, static_cast<int>(k), z);
  if (w >= 1e-4) return hyp2f1_power_series(a, b, c, z, 5'000'000);

  // Nearly integer excess very close to z = 1: quadratic interpolation in c
  // through the integer case and two well-separated non-integer neighbours.
  constexpr double h = 2e-3;
  const double c0 = a + b + k;
  const double f0 = hyp2f1_linear_one_integer(a, b, static_cast<int>(k), z);
  const double fm = hyp2f1_near_one(a, b, c0 - h, z);
  const double fp = hyp2f1_near_one(a, b, c0 + h, z);
  const double t = (c - c0) / h;
  return f0 + 0.5 * t * (fp - fm) + 0.5 * t * t * (fp - 2.0 * f0 + fm);
}

}  // namespace detail

/// Gauss hypergeometric function 2F1(a, b; c; z) for real z <= 1.
///
/// Power series on |z| <= 1/2, Pfaff transformation z -> z/(z-1) below -1/2,
/// Gauss summation at z = 1 and the 1 - z linear transformation (including
/// the logarithmic integer-excess case) on (1/2, 1). Throws domain_error for
/// z > 1, c a non-positive integer, or divergence at z = 1.
inline double hyp2f1(double a, double b, double c, double z) {
  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c) || !std::isfinite(z))
    throw domain_error("hyp2f1: non-finite argument");
  if (detail::is_nonpositive_integer(c)) throw domain_error("hyp2f1: c must not be a non-positive integer");
  if (z == 0.0 || a == 0.0 || b == 0.0) return 1.0;
  if (detail::is_nonpositive_integer(a) || detail::is_nonpositive_integer(b))
    return detail::hyp2f1_polynomial(a, b, c, z);
  if (z > 1.0) throw domain_error("hyp2f1: z > 1 is outside the supported region");
  if (z == 1.0) return detail::hyp2f1_at_one(a, b, c);
  if (z < -0.5) {
    // Pick the Pfaff variant whose transformed excess is non-negative.
    const double zt = z / (z - 1.0);
    if (a >= b) return std::pow(1.0 - z, -b) * hyp2f1(c - a, b, c, zt);
    return std::pow(1.0 - z, -a) * hyp2f1(a, c - b, c, zt);
  }
  if (z <= 0.5) return detail::hyp2f1_power_series(a, b, c, z, 10000);
  return detail::hyp2f1_near_one(a, b, c, z);
}

// ---------------------------------------------------------------------------
// Adaptive quadrature

struct QuadratureSpec {
  double abs_tol = 1e-12;
  double rel_tol = 1e-10;
  int max_refinements = 2000;

  void validate() const {
    if (!(abs_tol > 0.0)) throw validation_error("abs_tol", "abs_tol must be positive");
    if (!(rel_tol > 0.0)) throw validation_error("rel_tol", "rel_tol must be positive");
    if (max_refinements < 1) throw validation_error("max_refinements", "max_refinements must be at least 1");
  }
};

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  int intervals = 0;
};

namespace detail {

struct gk_segment {
  double lo;
  double hi;
  double value;
  double error;
  bool operator<(const gk_segment& other) const { return error < other.error; }
};

// 7-point Gauss / 15-point Kronrod pair on [lo, hi].
template <typename F>
gk_segment gauss_kronrod_15(F& f, double lo, double hi) {
  static constexpr std::array<double, 8> xk = {
      0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
      0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
      0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
      0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
  static constexpr std::array<double, 8> wk = {
      0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
      0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
      0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
      0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
  static constexpr std::array<double, 4> wg = {
      0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
      0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

  const double center = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  const double fc = f(center);
  double kronrod = fc * wk[7];
  double gauss = fc * wg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * xk[j];
    const double f1 = f(center - dx);
    const double f2 = f(center + dx);
    kronrod += wk[j] * (f1 + f2);
    if (j % 2 == 1) gauss += wg[j / 2] * (f1 + f2);
  }
  kronrod *= half;
  gauss *= half;
  return {lo, hi, kronrod, std::abs(kronrod - gauss)};
}

template <typename F>
QuadratureResult integrate_finite(F& f, std::span<const double> points, const QuadratureSpec& spec) {
  std::priority_queue<gk_segment> pending;
  double total = 0.0;
  double error = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    if (points[i] == points[i + 1]) continue;
    const gk_segment segment = gauss_kronrod_15(f, points[i], points[i + 1]);
    total += segment.value;
    error += segment.error;
    pending.push(segment);
  }
  if (pending.empty()) return {0.0, 0.0, 0};
  int refinements = 0;
  while (error > std::max(spec.abs_tol, spec.rel_tol * std::abs(total))) {
    if (refinements >= spec.max_refinements)
      throw non_convergence_error("integrate_1d: refinement budget exhausted", total, error);
    const gk_segment worst = pending.top();
    pending.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    if (!(mid > worst.lo && mid < worst.hi))
      throw non_convergence_error("integrate_1d: interval collapsed below machine resolution", total, error);
    const gk_segment left = gauss_kronrod_15(f, worst.lo, mid);
    const gk_segment right = gauss_kronrod_15(f, mid, worst.hi);
    pending.push(left);
    pending.push(right);
    ++refinements;
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    // Re-sum periodically so incremental updates cannot drift.
    if (refinements % 64 == 0) {
      auto copy = pending;
      total = 0.0;
      error = 0.0;
      while (!copy.empty()) {
        total += copy.top().value;
        error += copy.top().error;
        copy.pop();
      }
    }
  }
  double value = 0.0;
  double err = 0.0;
  const int count = static_cast<int>(pending.size());
  // Sum in ascending interval order for a result independent of heap layout.
  std::vector<gk_segment> segments;
  segments.reserve(pending.size());
  while (!pending.empty()) {
    segments.push_back(pending.top());
    pending.pop();
  }
  std::sort(segments.begin(), segments.end(), [](const gk_segment& l, const gk_segment& r) { return l.lo < r.lo; });
  for (const auto& s : segments) {
    value += s.value;
    err += s.error;
  }
  return {value, err, count};
}

}  // namespace detail

/// Adaptive Gauss-Kronrod (7/15) quadrature with global bisection of the
/// worst interval. `hi` may be +infinity, in which case x = lo + u/(1-u)
/// maps the domain onto [0, 1). Endpoints are never evaluated.
template <typename F>
QuadratureResult integrate_1d(F&& f, double lo, double hi, const QuadratureSpec& spec = {}) {
  spec.validate();
  if (std::isnan(lo) || std::isnan(hi) || std::isinf(lo)) throw domain_error("integrate_1d: invalid limits");
  if (lo == hi) return {0.0, 0.0, 0};
  if (hi < lo) {
    auto r = integrate_1d(f, hi, lo, spec);
    r.value = -r.value;
    return r;
  }
  if (std::isinf(hi)) {
    auto mapped = [&f, lo](double u) {
      const double one_minus = 1.0 - u;
      const double x = lo + u / one_minus;
      if (!std::isfinite(x)) return 0.0;
      const double fx = f(x);
      if (fx == 0.0) return 0.0;
      return fx / (one_minus * one_minus);
    };
    const std::array<double, 2> unit = {0.0, 1.0};
    return detail::integrate_finite(mapped, unit, spec);
  }
  const std::array<double, 2> ends = {lo, hi};
  return detail::integrate_finite(f, ends, spec);
}

/// Finite-interval variant with breakpoints: `points` is ascending, its first
/// and last entries are the limits, and interior entries mark kinks or
/// integrable singularities that the initial partition should respect.
template <typename F>
QuadratureResult integrate_1d(F&& f, std::span<const double> points, const QuadratureSpec& spec = {}) {
  spec.validate();
  if (points.size() < 2) throw domain_error("integrate_1d: need at least two points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!std::isfinite(points[i])) throw domain_error("integrate_1d: breakpoints must be finite");
    if (i > 0 && points[i] < points[i - 1]) throw domain_error("integrate_1d: breakpoints must be ascending");
  }
  return detail::integrate_finite(f, points, spec);
}

/// Iterated 2-D quadrature: outer over x, inner over y. Breakpoints for the
/// inner integral may depend on x through `inner_points(x)`, which returns an
/// ascending container of y values including both limits. Inner integrals use
/// a tolerance ten times tighter than the outer one.
template <typename F, typename InnerPoints>
QuadratureResult integrate_2d(F&& f, std::span<const double> outer_points, InnerPoints&& inner_points,
                              const QuadratureSpec& spec = {}) {
  QuadratureSpec inner = spec;
  inner.abs_tol = spec.abs_tol * 0.1;
  inner.rel_tol = spec.rel_tol * 0.1;
  double inner_error = 0.0;
  auto outer = [&](double x) {
    const auto points = inner_points(x);
    auto r = integrate_1d([&](double y) { return f(x, y); }, std::span<const double>(points), inner);
    inner_error = std::max(inner_error, r.error_estimate);
    return r.value;
  };
  auto result = integrate_1d(outer, outer_points, spec);
  result.error_estimate += inner_error * std::abs(outer_points.back() - outer_points.front());
  return result;
}

/// Iterated 2-D quadrature over the rectangle [x_lo, x_hi] x [y_lo, y_hi].
template <typename F>
QuadratureResult integrate_2d(F&& f, double x_lo, double x_hi, double y_lo, double y_hi,
                              const QuadratureSpec& spec = {}) {
  const std::array<double, 2> outer = {x_lo, x_hi};
  return integrate_2d(std::forward<F>(f), std::span<const double>(outer),
                      [=](double) { return std::array<double, 2>{y_lo, y_hi}; }, spec);
}

}  // namespace dirnet
