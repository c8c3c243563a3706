// surrogates.hpp: population surrogate rewards F(rho), their derivatives, the
// rho <-> rho_K transform, the incomplete beta function, and the recipe that
// turns a surrogate into per-class advantage scores.
#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "passk/advantage_shaping.hpp"
#include "passk/error.hpp"
#include "passk/reward_stats.hpp"

namespace passk {

enum class Surrogate {
  Identity,
  PassK,
  Arcsin01,
  ArcsinPassK,
  SkewrReg,
  IncBetaK,
  EntropyReg,
};

inline constexpr std::array<Surrogate, 7> kAllSurrogates = {
    Surrogate::Identity, Surrogate::PassK,    Surrogate::Arcsin01,   Surrogate::ArcsinPassK,
    Surrogate::SkewrReg, Surrogate::IncBetaK, Surrogate::EntropyReg,
};

inline constexpr std::string_view to_string(Surrogate s) noexcept {
  switch (s) {
    case Surrogate::Identity: return "identity";
    case Surrogate::PassK: return "pass_k";
    case Surrogate::Arcsin01: return "arcsin_01";
    case Surrogate::ArcsinPassK: return "arcsin_pass_k";
    case Surrogate::SkewrReg: return "skewr_reg";
    case Surrogate::IncBetaK: return "inc_beta_k";
    case Surrogate::EntropyReg: return "entropy_reg";
  }
  return "?";
}

inline std::optional<Surrogate> parse_surrogate(std::string_view name) noexcept {
  for (Surrogate s : kAllSurrogates) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

inline constexpr bool uses_k(Surrogate s) noexcept {
  return s == Surrogate::PassK || s == Surrogate::ArcsinPassK || s == Surrogate::IncBetaK;
}

struct SurrogateSpec {
  Surrogate id = Surrogate::Arcsin01;
  int k = 1;
  double lambda = 1.0;

  void validate() const {
    detail::require(k >= 1, "surrogate " + std::string(to_string(id)) + ": k must be >= 1");
    detail::require(lambda >= 0.0 && std::isfinite(lambda),
                    "surrogate " + std::string(to_string(id)) + ": lambda must be finite and >= 0");
  }
};

// ---------------------------------------------------------------------------
// rho <-> rho_K

inline double pass_k_of_rho(double rho, int k) {
  detail::require(rho >= 0.0 && rho <= 1.0, "pass_k_of_rho: rho outside [0, 1]");
  detail::require(k >= 1, "pass_k_of_rho: k must be >= 1");
  if (rho == 1.0) return 1.0;
  return -std::expm1(k * std::log1p(-rho));
}

inline double rho_of_pass_k(double rho_k, int k) {
  detail::require(rho_k >= 0.0 && rho_k <= 1.0, "rho_of_pass_k: rho_k outside [0, 1]");
  detail::require(k >= 1, "rho_of_pass_k: k must be >= 1");
  if (rho_k == 1.0) return 1.0;
  return -std::expm1(std::log1p(-rho_k) / k);
}

// ---------------------------------------------------------------------------
// Incomplete beta B(x; a, b) = int_0^x u^(a-1) (1-u)^(b-1) du by adaptive
// composite Gauss-Legendre quadrature.

struct IncBetaParams {
  double x = 0.0;
  double a = 0.5;
  double b = 0.5;

  /// The parameters used by the GRPO_K surrogate: a = 1/2, b = k - 1/2.
  static IncBetaParams for_k(double x, int k) { return {x, 0.5, k - 0.5}; }
};

inline constexpr double kIncBetaTolerance = 1e-13;

namespace detail {

template <std::size_t N>
struct GaussLegendreRule {
  std::array<double, N> nodes{};
  std::array<double, N> weights{};
};

// Nodes on [-1, 1] by Newton iteration on the Legendre recurrence.
template <std::size_t N>
GaussLegendreRule<N> make_gauss_legendre() {
  GaussLegendreRule<N> rule;
  const int n = static_cast<int>(N);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      dp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z_prev = z;
      z = z_prev - p1 / dp;
      if (std::abs(z - z_prev) <= 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.nodes[i] = -z;
    rule.nodes[n - 1 - i] = z;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

inline const GaussLegendreRule<20>& gauss_legendre_20() {
  static const GaussLegendreRule<20> rule = make_gauss_legendre<20>();
  return rule;
}

template <class F>
double gauss_legendre(const F& f, double lo, double hi) {
  const auto& rule = gauss_legendre_20();
  const double half = 0.5 * (hi - lo);
  const double mid = 0.5 * (hi + lo);
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return half * sum;
}

template <class F>
double adaptive_gauss_legendre(const F& f, double lo, double hi, double whole, double tol, int depth) {
  const double mid = 0.5 * (lo + hi);
  const double left = gauss_legendre(f, lo, mid);
  const double right = gauss_legendre(f, mid, hi);
  if (depth <= 0 || std::abs(left + right - whole) <= tol) return left + right;
  return adaptive_gauss_legendre(f, lo, mid, left, 0.5 * tol, depth - 1) +
         adaptive_gauss_legendre(f, mid, hi, right, 0.5 * tol, depth - 1);
}

// int_0^x u^(a-1)(1-u)^(b-1) du for x <= 1/2, after u = t^2.
inline double inc_beta_lower(double x, double a, double b, double tol) {
  if (x <= 0.0) return 0.0;
  const auto integrand = [a, b](double t) {
    return 2.0 * std::pow(t, 2.0 * a - 1.0) * std::pow(1.0 - t * t, b - 1.0);
  };
  const double hi = std::sqrt(x);
  return adaptive_gauss_legendre(integrand, 0.0, hi, gauss_legendre(integrand, 0.0, hi), tol, 40);
}

}  // namespace detail

/// Requires 0 <= x <= 1 and a, b >= 1/2 (the substitution u = t^2 leaves a
/// bounded integrand exactly in that range). Above x = 1/2 the reflection
/// B(x; a, b) = B(a, b) - B(1 - x; b, a) keeps the (1-u)^(b-1) factor away from
/// its singular endpoint.
inline double incomplete_beta(const IncBetaParams& p, double tol = kIncBetaTolerance) {
  detail::require(p.x >= 0.0 && p.x <= 1.0, "incomplete_beta: x outside [0, 1]");
  detail::require(p.a >= 0.5 && p.b >= 0.5, "incomplete_beta: a and b must be >= 1/2");
  if (p.x <= 0.5) return detail::inc_beta_lower(p.x, p.a, p.b, tol);
  const double complete =
      detail::inc_beta_lower(0.5, p.a, p.b, 0.5 * tol) + detail::inc_beta_lower(0.5, p.b, p.a, 0.5 * tol);
  return complete - detail::inc_beta_lower(1.0 - p.x, p.b, p.a, tol);
}

// ---------------------------------------------------------------------------
// Surrogates

/// H(rho) = -rho log rho - (1-rho) log(1-rho), extended by continuity to 0 at
/// the endpoints.
inline double binary_entropy(double rho) {
  const auto xlogx = [](double x) { return x > 0.0 ? x * std::log(x) : 0.0; };
  return -xlogx(rho) - xlogx(1.0 - rho);
}

namespace detail {

// arcsin(sqrt(x)) given both x and 1 - x; above 1/2 it goes through the
// complement so values of x within a few ulps of 1 stay accurate.
inline double arcsin_sqrt(double x, double one_minus_x) {
  return x <= 0.5 ? std::asin(std::sqrt(x)) : std::numbers::pi / 2 - std::asin(std::sqrt(one_minus_x));
}

}  // namespace detail

inline double surrogate_eval(const SurrogateSpec& s, double rho) {
  s.validate();
  detail::require(rho >= 0.0 && rho <= 1.0, "surrogate_eval: rho outside [0, 1]");
  const double k = s.k;
  switch (s.id) {
    case Surrogate::Identity: return rho;
    case Surrogate::PassK: return pass_k_of_rho(rho, s.k);
    case Surrogate::Arcsin01: return 2.0 * detail::arcsin_sqrt(rho, 1.0 - rho);
    case Surrogate::ArcsinPassK:
      return (2.0 / k) * detail::arcsin_sqrt(pass_k_of_rho(rho, s.k), std::pow(1.0 - rho, k));
    case Surrogate::SkewrReg: return detail::arcsin_sqrt(rho, 1.0 - rho) + std::sqrt(rho * (1.0 - rho));
    case Surrogate::IncBetaK: return incomplete_beta(IncBetaParams::for_k(rho, s.k));
    case Surrogate::EntropyReg: return 2.0 * detail::arcsin_sqrt(rho, 1.0 - rho) + s.lambda * binary_entropy(rho);
  }
  throw InvalidInput("surrogate_eval: unknown surrogate");
}

/// Closed-form F'(rho) on the open interval (0, 1).
inline double surrogate_derivative(const SurrogateSpec& s, double rho) {
  s.validate();
  detail::require(rho > 0.0 && rho < 1.0, "surrogate_derivative: rho must lie in (0, 1)");
  const double k = s.k;
  const double var = rho * (1.0 - rho);
  switch (s.id) {
    case Surrogate::Identity: return 1.0;
    case Surrogate::PassK: return k * std::pow(1.0 - rho, k - 1.0);
    case Surrogate::Arcsin01: return 1.0 / std::sqrt(var);
    case Surrogate::ArcsinPassK: {
      // 1 - rho_K taken as (1 - rho)^K, not by subtraction
      const double rk = pass_k_of_rho(rho, s.k);
      return std::pow(1.0 - rho, k - 1.0) / std::sqrt(rk * std::pow(1.0 - rho, k));
    }
    case Surrogate::SkewrReg: return std::sqrt((1.0 - rho) / rho);
    case Surrogate::IncBetaK: return std::pow(1.0 - rho, k - 1.5) / std::sqrt(rho);
    case Surrogate::EntropyReg: return 1.0 / std::sqrt(var) + s.lambda * std::log((1.0 - rho) / rho);
  }
  throw InvalidInput("surrogate_derivative: unknown surrogate");
}

/// F(1); figure outputs divide by it so every curve ends at 1.
inline double surrogate_normalizer(const SurrogateSpec& s) { return surrogate_eval(s, 1.0); }

/// F(1) - F(1 - q) as a function of the failure rate q. Near rho = 1 the
/// surrogates flatten out and F(rho) itself cannot resolve differences below
/// F(1) * eps; this form keeps full relative precision there.
inline double surrogate_gap(const SurrogateSpec& s, double q) {
  s.validate();
  detail::require(q >= 0.0 && q <= 1.0, "surrogate_gap: q outside [0, 1]");
  const double k = s.k;
  switch (s.id) {
    case Surrogate::Identity: return q;
    case Surrogate::PassK: return std::pow(q, k);
    case Surrogate::Arcsin01: return 2.0 * std::asin(std::sqrt(q));
    case Surrogate::ArcsinPassK: return (2.0 / k) * std::asin(std::sqrt(std::pow(q, k)));
    case Surrogate::SkewrReg: return std::asin(std::sqrt(q)) - std::sqrt(q * (1.0 - q));
    case Surrogate::IncBetaK: return incomplete_beta({q, k - 0.5, 0.5});
    case Surrogate::EntropyReg: return 2.0 * std::asin(std::sqrt(q)) - s.lambda * binary_entropy(q);
  }
  throw InvalidInput("surrogate_gap: unknown surrogate");
}

/// Forward-engineered scores: A+ = m (1 - rho_hat), A- = -m rho_hat, i.e. the
/// RLOO proxy scaled by an empirical multiplier m. m = F'(rho_hat) except for
/// ArcsinPassK, whose multiplier substitutes the combinatorial rho_K_hat:
/// m = sqrt((1 - rho_K_hat) / rho_K_hat) / (1 - rho_hat).
inline AdvantagePair forward_engineer(const SurrogateSpec& s, const GroupStats& stats) {
  s.validate();
  if (s.id == Surrogate::ArcsinPassK) detail::require_k(stats, s.k);
  if (stats.degenerate()) return {0.0, 0.0, true};
  const double rho = stats.rho_hat;
  double m = 0.0;
  if (s.id == Surrogate::ArcsinPassK) {
    const double pk = pass_k_hat(stats, s.k);
    m = pk >= 1.0 ? 0.0 : std::sqrt((1.0 - pk) / pk) / (1.0 - rho);
  } else {
    m = surrogate_derivative(s, rho);
  }
  return {m * (1.0 - rho), -m * rho, false};
}

}  // namespace passk
