#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "lowrank_gp/errors.hpp"

namespace lowrank_gp::bessel {

namespace detail {

// Taylor coefficients of 1/Gamma(z) = sum_k c[k] z^(k+1), Abramowitz & Stegun 6.1.34.
inline constexpr std::array<double, 26> kRecipGammaCoeffs = {
    1.0,
    0.5772156649015329,
    -0.6558780715202538,
    -0.0420026350340952,
    0.1665386113822915,
    -0.0421977345555443,
    -0.0096219715278770,
    0.0072189432466630,
    -0.0011651675918591,
    -0.0002152416741149,
    0.0001280502823882,
    -0.0000201348547807,
    -0.0000012504934821,
    0.0000011330272320,
    -0.0000002056338417,
    0.0000000061160950,
    0.0000000050020075,
    -0.0000000011812746,
    0.0000000001043427,
    0.0000000000077823,
    -0.0000000000036968,
    0.0000000000005100,
    -0.0000000000000206,
    -0.0000000000000054,
    0.0000000000000014,
    0.0000000000000001,
};

struct TemmeGammas {
  double gam1;      // (1/G(1-mu) - 1/G(1+mu)) / (2 mu)
  double gam2;      // (1/G(1-mu) + 1/G(1+mu)) / 2
  double recip_plus;   // 1/G(1+mu)
  double recip_minus;  // 1/G(1-mu)
};

// |mu| <= 1/2. Splitting the 1/Gamma(1+mu) series into even and odd powers of
// mu gives gam1 and gam2 without the cancellation of the difference quotient.
inline TemmeGammas temme_gammas(double mu) noexcept {
  double even_powers = 0.0;
  double odd_powers = 0.0;
  double power = 1.0;
  for (std::size_t k = 0; k < kRecipGammaCoeffs.size(); ++k) {
    (k % 2 == 0 ? even_powers : odd_powers) += kRecipGammaCoeffs[k] * power;
    power *= mu;
  }
  // 1/G(1+mu) = even + odd, 1/G(1-mu) = even - odd.
  const double gam1 = mu == 0.0 ? -kRecipGammaCoeffs[1] : -odd_powers / mu;
  return {gam1, even_powers, even_powers + odd_powers, even_powers - odd_powers};
}

}  // namespace detail

/// Modified Bessel function of the second kind K_nu(x), nu >= 0, x > 0.
///
/// Reduces to |mu| <= 1/2 with nu = mu + n, evaluates K_mu and K_{mu+1} by
/// Temme's series (x < 2) or Steed's continued fraction (x >= 2), then recurs
/// upward in order. Returns +inf on overflow and 0 on underflow.
inline double cyl_k(double nu, double x) {
  if (!std::isfinite(nu) || !std::isfinite(x) || nu < 0.0 || x <= 0.0) {
    throw DomainError("bessel::cyl_k requires finite nu >= 0 and x > 0");
  }
  constexpr double kEps = 1e-16;
  constexpr int kMaxIter = 100000;
  constexpr double kPi = std::numbers::pi;

  const int order_steps = static_cast<int>(nu + 0.5);
  const double mu = nu - order_steps;
  const double mu2 = mu * mu;
  const double inv_x = 1.0 / x;
  const double two_inv_x = 2.0 * inv_x;

  double k_mu;
  double k_mu1;
  if (x < 2.0) {
    const double half_x = 0.5 * x;
    const double pimu = kPi * mu;
    const double fact = std::abs(pimu) < kEps ? 1.0 : pimu / std::sin(pimu);
    double d = -std::log(half_x);
    double e = mu * d;
    const double fact2 = std::abs(e) < kEps ? 1.0 : std::sinh(e) / e;
    const auto g = detail::temme_gammas(mu);
    double ff = fact * (g.gam1 * std::cosh(e) + g.gam2 * fact2 * d);
    double sum = ff;
    e = std::exp(e);
    double p = 0.5 * e / g.recip_plus;
    double q = 0.5 / (e * g.recip_minus);
    double c = 1.0;
    d = half_x * half_x;
    double sum1 = p;
    int i = 1;
    for (; i <= kMaxIter; ++i) {
      ff = (i * ff + p + q) / (i * static_cast<double>(i) - mu2);
      c *= d / i;
      p /= i - mu;
      q /= i + mu;
      const double del = c * ff;
      sum += del;
      sum1 += c * (p - i * ff);
      if (std::abs(del) < std::abs(sum) * kEps) break;
    }
    if (i > kMaxIter) throw NumericalError("bessel::cyl_k series did not converge");
    k_mu = sum;
    k_mu1 = sum1 * two_inv_x;
  } else {
    double b = 2.0 * (1.0 + x);
    double d = 1.0 / b;
    double h = d;
    double delh = d;
    double q1 = 0.0;
    double q2 = 1.0;
    const double a1 = 0.25 - mu2;
    double q = a1;
    double c = a1;
    double a = -a1;
    double s = 1.0 + q * delh;
    int i = 2;
    for (; i <= kMaxIter; ++i) {
      a -= 2 * (i - 1);
      c = -a * c / i;
      const double qnew = (q1 - b * q2) / a;
      q1 = q2;
      q2 = qnew;
      q += c * qnew;
      b += 2.0;
      d = 1.0 / (b + a * d);
      delh = (b * d - 1.0) * delh;
      h += delh;
      const double dels = q * delh;
      s += dels;
      if (std::abs(dels / s) < kEps) break;
    }
    if (i > kMaxIter) throw NumericalError("bessel::cyl_k continued fraction did not converge");
    h = a1 * h;
    k_mu = std::sqrt(kPi / (2.0 * x)) * std::exp(-x) / s;
    k_mu1 = k_mu * (mu + x + 0.5 - h) * inv_x;
  }

  for (int i = 1; i <= order_steps; ++i) {
    const double next = (mu + i) * two_inv_x * k_mu1 + k_mu;
    k_mu = k_mu1;
    k_mu1 = next;
  }
  return k_mu;
}

/// True when nu is within 1e-12 of p + 1/2 for an integer 0 <= p <= 30.
inline bool is_half_integer(double nu, int* p_out = nullptr) noexcept {
  const double p = std::round(nu - 0.5);
  if (p < 0.0 || p > 30.0 || std::abs(nu - (p + 0.5)) >= 1e-12) return false;
  if (p_out) *p_out = static_cast<int>(p);
  return true;
}

/// Normalized Matern correlation at scaled distance r = dist/psi:
///   2^(1-nu)/Gamma(nu) * r^nu * K_nu(r),
/// equal to 1 at r = 0. Half-integer orders use the closed form
///   exp(-r) * p!/(2p)! * sum_{i=0}^p (p+i)!/(i!(p-i)!) (2r)^(p-i).
inline double matern_correlation(double r, double nu) {
  if (r == 0.0) return 1.0;
  int p = 0;
  if (is_half_integer(nu, &p)) {
    if (p == 0) return std::exp(-r);
    if (p == 1) return (1.0 + r) * std::exp(-r);
    if (p == 2) return (1.0 + r + r * r / 3.0) * std::exp(-r);
    // a_p = 1 and a_{i-1} = a_i * i / ((p+i)(p-i+1)); Horner from the
    // highest power of 2r (i = 0) down.
    std::array<double, 31> coeff{};
    coeff[p] = 1.0;
    for (int i = p; i >= 1; --i) coeff[i - 1] = coeff[i] * i / (static_cast<double>(p + i) * (p - i + 1));
    double poly = 0.0;
    for (int i = 0; i <= p; ++i) poly = poly * (2.0 * r) + coeff[i];
    return poly * std::exp(-r);
  }
  // Below this the r^nu K_nu(r) product would overflow; the correlation is 1
  // to within r^(2 min(nu, 1)).
  if (r < 1e-100) return 1.0;
  const double k = cyl_k(nu, r);
  if (k == 0.0) return 0.0;
  const double log_val = (1.0 - nu) * std::numbers::ln2 - std::lgamma(nu) + nu * std::log(r) + std::log(k);
  return std::exp(log_val);
}

}  // namespace lowrank_gp::bessel
