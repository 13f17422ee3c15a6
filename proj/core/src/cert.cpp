#include "pepkit/cert.hpp"

#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "pepkit/metric.hpp"

namespace pepkit {

namespace {

// Coefficients over the four Gram labels.
using Lin = std::array<double, 4>;

Lin unit(std::size_t i) {
  Lin v{};
  v[i] = 1.0;
  return v;
}
Lin operator+(Lin a, const Lin& b) {
  for (std::size_t i = 0; i < 4; ++i) a[i] += b[i];
  return a;
}
Lin operator-(Lin a, const Lin& b) {
  for (std::size_t i = 0; i < 4; ++i) a[i] -= b[i];
  return a;
}
Lin operator*(double s, Lin a) {
  for (double& x : a) x *= s;
  return a;
}

struct Evaluator {
  const SymMatrix& g;
  double ip(const Lin& a, const Lin& b) const {
    double s = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) s += a[i] * g(i, j) * b[j];
    return s;
  }
  double sq(const Lin& a) const { return ip(a, a); }
};

const Lin kZero{};

// Symmetric interpolation inequality for the pair (i, j), written as "≤ 0".
double interp_sym(const Evaluator& e, const Lin& xi, const Lin& xj, const Lin& gi, const Lin& gj, double mu, double L) {
  const double k = mu / L;
  const Lin dg = gi - gj;
  const Lin dx = xi - xj;
  return (e.sq(dg) / L + mu * e.sq(dx) - 2.0 * k * e.ip(dg, dx)) / (1.0 - k) - e.ip(dg, dx);
}

// Ordered (function value) inequality for (i, j), written as "≤ 0":
// RHS − (f_i − f_j − ⟨g_j, x_i − x_j⟩).
double interp_ord(const Evaluator& e, const Lin& xi, const Lin& xj, double fi, double fj, const Lin& gi, const Lin& gj,
                  double mu, double L) {
  const double k = mu / L;
  const Lin dg = gj - gi;
  const Lin dx = xj - xi;
  const double rhs = (e.sq(gi - gj) / L + mu * e.sq(xi - xj) - 2.0 * k * e.ip(dg, dx)) / (2.0 * (1.0 - k));
  return rhs - (fi - fj - e.ip(gj, xi - xj));
}

double cone_trace(const Evaluator& e, const SymMatrix& S, double eps, const Lin& g0, const Lin& g1) {
  return S(0, 0) * eps * e.sq(g0) + 2.0 * S(1, 0) * e.ip(g0, g1) + S(1, 1) * eps * e.sq(g1);
}

void require(const std::vector<Gate>& gates, const char* who) {
  for (const Gate& g : gates)
    if (!g.ok && !g.informational) {
      std::ostringstream os;
      os << who << ": gate " << g.name << " violated (value " << std::setprecision(17) << g.value << ")";
      throw GateError(g.name, os.str());
    }
}

// Absorbs roundoff when a parameter sits exactly on a boundary.
constexpr double kGateTol = 1e-12;

Gate gate(std::string name, double value, bool informational = false) {
  return {std::move(name), value, value >= -kGateTol, informational};
}

bool is_els(CertFamily f) { return f == CertFamily::ElsGradient || f == CertFamily::ElsDistance; }

struct ElsS {
  double s11, s21, s22;
};

ElsS els_s(double k, double e) {
  const double q = std::sqrt(k * (1.0 - e * e));
  return {1.5 * e - e * (k + 1.0 / k) / 4.0 + (1.0 - k) / (2.0 * q) - e * e * (1.0 - k) / q,
          e * (1.0 - k) / (2.0 * q) - 1.0,
          (2.0 * q - e * (1.0 - k)) / ((1.0 - e * e) * (1.0 - k) + 2.0 * e * q)};
}

double els_lambda0(double k, double e, double mu) {
  return (1.0 - k) / mu *
         (1.0 - 2.0 * e * e + e * std::sqrt(1.0 - e * e) / (2.0 * std::sqrt(k) * (1.0 - k)) * (-1.0 - k * k + 6.0 * k));
}

double els_rate(double k, double e) { return e + std::sqrt(1.0 - e * e) * (1.0 - k) / (2.0 * std::sqrt(k)); }

}  // namespace

// ---------------------------------------------------------------- naming

double Certificate::at(const std::string& name) const {
  auto it = multipliers.find(name);
  if (it == multipliers.end()) throw std::out_of_range("Certificate: no multiplier '" + name + "'");
  return it->second;
}

std::string to_string(CertFamily f) {
  switch (f) {
    case CertFamily::ElsGradient:
      return "els_gradient";
    case CertFamily::ElsDistance:
      return "els_distance";
    case CertFamily::FixedGradient:
      return "fixed_gradient";
    case CertFamily::FixedDistance:
      return "fixed_distance";
    case CertFamily::FixedFunctionValue:
      return "fixed_function_value";
  }
  return "?";
}

CertFamily cert_family_from_string(const std::string& s) {
  for (CertFamily f : {CertFamily::ElsGradient, CertFamily::ElsDistance, CertFamily::FixedGradient,
                       CertFamily::FixedDistance, CertFamily::FixedFunctionValue})
    if (to_string(f) == s) return f;
  throw std::invalid_argument("unknown certificate family '" + s + "'");
}

// ---------------------------------------------------------------- rates

double els_eps_max(double kappa) { return 2.0 * std::sqrt(kappa) / (1.0 + kappa); }
double fixed_eps_max(double kappa) { return 2.0 * kappa / (1.0 + kappa); }

double fixed_gamma_max(double mu, double L, double eps) {
  return (2.0 * mu - eps * (L + mu)) / ((1.0 - eps) * mu * (L + mu));
}

double rho_fixed(double mu, double eps, double gamma) { return 1.0 - (1.0 - eps) * mu * gamma; }

Rates rate_els(const RateQuery& q) {
  const double k = q.kappa;
  const double e = q.eps;
  if (!(k > 0.0 && k <= 1.0)) throw GateError("kappa in (0,1]", "rate_els: kappa must lie in (0, 1]");
  if (!(e >= 0.0)) throw GateError("eps >= 0", "rate_els: eps must be nonnegative");
  if (e > els_eps_max(k)) throw GateError("eps <= 2sqrt(kappa)/(1+kappa)", "rate_els: eps beyond 2√κ/(1+κ)");
  Rates r;
  const double fr = (1.0 - k + e * (1.0 - k)) / (1.0 + k + e * (1.0 - k));
  r.f_rate = fr * fr;
  r.g_rate = r.x_rate = els_rate(k, e);
  return r;
}

double els_function_value_rate(double kappa, double eps) {
  const Rates r = rate_els({kappa, eps, std::nullopt, std::nullopt, 1.0});  // gates
  if (eps == 0.0) return r.f_rate;
  const double fr = (1.0 - kappa + eps * (1.0 + kappa)) / (1.0 + kappa + eps * (1.0 - kappa));
  return fr * fr;
}

Rates rate_fixed(const RateQuery& q) {
  if (!q.gamma) throw std::invalid_argument("rate_fixed: gamma is required");
  const double k = q.kappa;
  const double e = q.eps;
  const double g = *q.gamma;
  if (!(k > 0.0 && k < 1.0)) throw GateError("kappa in (0,1)", "rate_fixed: kappa must lie in (0, 1)");
  if (!(q.L > 0.0)) throw std::invalid_argument("rate_fixed: L must be positive");
  if (!(e >= 0.0)) throw GateError("eps >= 0", "rate_fixed: eps must be nonnegative");
  if (e > fixed_eps_max(k)) throw GateError("eps <= 2kappa/(1+kappa)", "rate_fixed: eps beyond 2κ/(1+κ)");
  if (!(g >= 0.0)) throw GateError("gamma >= 0", "rate_fixed: gamma must be nonnegative");
  if (g > fixed_gamma_max(q.mu(), q.L, e))
    throw GateError("gamma <= gamma_max", "rate_fixed: gamma beyond (2μ − ε(L+μ))/((1−ε)μ(L+μ))");
  const double rho = rho_fixed(q.mu(), e, g);
  return {rho * rho, rho, rho};
}

NewtonStepParams newton_step_params(double delta, double eps) {
  if (!(delta > 0.0 && delta < 1.0)) throw GateError("delta in (0,1)", "newton_step_params: delta must lie in (0, 1)");
  const double kd = std::pow(1.0 - delta, 4);
  if (!(eps >= 0.0)) throw GateError("eps >= 0", "newton_step_params: eps must be nonnegative");
  if (eps > 2.0 * kd / (1.0 + kd))
    throw GateError("eps <= 2kappa_delta/(1+kappa_delta)", "newton_step_params: eps beyond 2κ_δ/(1+κ_δ)");
  NewtonStepParams p;
  p.kappa_delta = kd;
  p.gamma = (2.0 * kd - eps * (1.0 + kd)) / ((1.0 - eps) * std::pow(1.0 - delta, 2) * (kd + 1.0));
  p.rate = (1.0 - kd) / (1.0 + kd) + eps;
  return p;
}

// ---------------------------------------------------------------- gates

std::vector<Gate> els_gates(CertFamily family, double kappa, double eps) {
  if (!is_els(family)) throw std::invalid_argument("els_gates: not an exact line search family");
  std::vector<Gate> g;
  g.push_back(gate("kappa < 1", 1.0 - kappa > 0.0 ? 1.0 - kappa : -1.0));
  g.push_back(gate("eps >= 0", eps));
  g.push_back(gate("eps <= 2sqrt(kappa)/(1+kappa)", els_eps_max(kappa) - eps));
  if (kappa >= 1.0 || !(kappa > 0.0) || eps >= 1.0) return g;
  const double q = std::sqrt(kappa * (1.0 - eps * eps));
  g.push_back(gate("s22 >= 0", 2.0 * q - eps * (1.0 - kappa)));
  g.push_back(gate("lambda >= 0", 2.0 * eps * std::sqrt(kappa) / (std::sqrt(1.0 - eps * eps) * (1.0 - kappa)) + 1.0));
  if (family == CertFamily::ElsDistance) g.push_back(gate("lambda0 >= 0", els_lambda0(kappa, eps, kappa)));
  return g;
}

std::vector<Gate> fixed_gates(CertFamily family, double mu, double L, double eps, double gamma) {
  if (is_els(family)) throw std::invalid_argument("fixed_gates: not a fixed-step family");
  const double k = mu / L;
  std::vector<Gate> g;
  g.push_back(gate("kappa < 1", k < 1.0 && k > 0.0 ? 1.0 - k : -1.0));
  g.push_back(gate("eps >= 0", eps));
  g.push_back(gate("eps <= 2kappa/(1+kappa)", fixed_eps_max(k) - eps));
  g.push_back(gate(family == CertFamily::FixedGradient ? "gamma > 0" : "gamma >= 0",
                   family == CertFamily::FixedGradient && gamma == 0.0 ? -1.0 : gamma));
  g.push_back(gate("1-(1-eps)gamma mu >= 0", 1.0 - (1.0 - eps) * gamma * mu));
  g.push_back(gate("2-(1-eps)gamma(L+mu) >= 0", 2.0 - (1.0 - eps) * gamma * (L + mu)));
  g.push_back(gate("2mu-eps(L+mu)-(1-eps)gamma mu(L+mu) >= 0",
                   2.0 * mu - eps * (L + mu) - (1.0 - eps) * gamma * mu * (L + mu)));
  if (family == CertFamily::FixedFunctionValue) {
    g.push_back(gate("2-gamma((1+eps)L+(1-eps)mu) >= 0", 2.0 - gamma * ((1.0 + eps) * L + (1.0 - eps) * mu)));
    if (eps < 1.0)
      g.push_back(gate("gamma <= (2-eps(L-mu)/sqrt(L mu(1-eps^2)))/(L+mu)",
                       (2.0 - eps * (L - mu) / std::sqrt(L * mu * (1.0 - eps * eps))) / (L + mu) - gamma, true));
  }
  return g;
}

// ---------------------------------------------------------------- certificates

Certificate els_gradient_certificate(double kappa, double eps, double L) {
  if (!(L > 0.0)) throw std::invalid_argument("els_gradient_certificate: L must be positive");
  require(els_gates(CertFamily::ElsGradient, kappa, eps), "els_gradient_certificate");
  Certificate c;
  c.family = CertFamily::ElsGradient;
  c.mu = kappa * L;
  c.L = L;
  c.eps = eps;
  c.rate = els_rate(kappa, eps);
  c.multipliers["lambda"] = 2.0 * eps * std::sqrt(kappa) / (std::sqrt(1.0 - eps * eps) * (1.0 - kappa)) + 1.0;
  c.multipliers["linesearch"] = L + c.mu;
  SymMatrix S(2);
  if (eps < els_eps_max(kappa) - 1e-12) {
    const ElsS s = els_s(kappa, eps);
    S.set(0, 0, s.s11);
    S.set(1, 0, s.s21);
    S.set(1, 1, s.s22);
  }
  c.S = S;
  return c;
}

Certificate els_distance_certificate(double kappa, double eps, double L) {
  if (!(L > 0.0)) throw std::invalid_argument("els_distance_certificate: L must be positive");
  require(els_gates(CertFamily::ElsDistance, kappa, eps), "els_distance_certificate");
  Certificate c;
  c.family = CertFamily::ElsDistance;
  const double mu = kappa * L;
  c.mu = mu;
  c.L = L;
  c.eps = eps;
  c.rate = els_rate(kappa, eps);
  c.multipliers["lambda0"] = els_lambda0(kappa, eps, mu);
  c.multipliers["lambda1"] = 1.0 / mu - 1.0 / L;
  c.multipliers["lambda2"] = 1.0 / mu + 1.0 / L;
  SymMatrix S(2);
  if (eps < els_eps_max(kappa) - 1e-12) {
    const ElsS s = els_s(kappa, eps);
    S.set(0, 0, s.s11 / (L * mu));
    S.set(1, 0, s.s21 / (L * mu));
    S.set(1, 1, s.s22 / (L * mu));
  }
  c.S = S;
  return c;
}

Certificate fixed_step_certificate(CertFamily family, double mu, double L, double eps, double gamma) {
  if (is_els(family)) throw std::invalid_argument("fixed_step_certificate: not a fixed-step family");
  if (!(mu > 0.0 && L > mu)) throw GateError("0 < mu < L", "fixed_step_certificate: need 0 < mu < L");
  require(fixed_gates(family, mu, L, eps, gamma), "fixed_step_certificate");
  Certificate c;
  c.family = family;
  c.mu = mu;
  c.L = L;
  c.eps = eps;
  c.gamma = gamma;
  const double rho = rho_fixed(mu, eps, gamma);
  c.rate = rho;
  const bool limit = eps == 0.0;
  switch (family) {
    case CertFamily::FixedGradient:
      c.multipliers["lambda0"] = 2.0 * rho / (gamma * (1.0 - eps));
      if (!limit) c.multipliers["lambda1"] = gamma * mu * rho / eps;
      break;
    case CertFamily::FixedDistance:
      c.multipliers["lambda0"] = 2.0 * gamma * (1.0 - eps) * rho;
      if (!limit) c.multipliers["lambda1"] = gamma * rho / (mu * eps);
      break;
    case CertFamily::FixedFunctionValue:
      c.multipliers["lambda01"] = rho;
      c.multipliers["lambda*0"] = rho * (1.0 - rho);
      c.multipliers["lambda*1"] = 1.0 - rho;
      if (!limit) c.multipliers["lambda2"] = gamma * rho / (2.0 * eps);
      break;
    default:
      break;
  }
  return c;
}

// ---------------------------------------------------------------- identities

GramPoint random_gram_point(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  GramPoint p;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j <= i; ++j) p.gram.set(i, j, u(rng));
  p.f0 = u(rng);
  p.f1 = u(rng);
  return p;
}

GramPoint random_psd_gram_point(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix v(4, dim);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < dim; ++j) v(i, j) = n(rng);
  GramPoint p;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) s += v(i, k) * v(j, k);
      p.gram.set(i, j, s);
    }
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  p.f0 = u(rng);
  p.f1 = u(rng);
  return p;
}

IdentityTerms identity_terms(const Certificate& c, const GramPoint& point) {
  if (point.gram.dim() != 4) throw std::invalid_argument("identity_terms: Gram point must be 4x4");
  const Evaluator E{point.gram};
  const double mu = c.mu;
  const double L = c.L;
  const double k = mu / L;
  const double e = c.eps;
  const double r = c.rate;
  IdentityTerms t;

  if (is_els(c.family)) {
    const Lin x0 = unit(0), x1 = unit(1), g0 = unit(2), g1 = unit(3);
    const SymMatrix S = c.S.value_or(SymMatrix(2));
    const double q = std::sqrt(1.0 - e * e);
    if (c.family == CertFamily::ElsGradient) {
      t.weighted_sum = (L - mu) * c.at("lambda") * interp_sym(E, x0, x1, g0, g1, mu, L) +
                       c.at("linesearch") * E.ip(g1, x1 - x0) - cone_trace(E, S, e, g0, g1);
      t.target = E.sq(g1) - r * r * E.sq(g0);
      const double coeff = k * (2.0 * e * std::sqrt(k) + (1.0 - k) * q) / ((1.0 - k) * q);
      const Lin v = (e * (1.0 + k) / (std::sqrt(k) * (q * (1.0 - k) + 2.0 * e * std::sqrt(k)))) * g1 -
                    ((1.0 + k) / (2.0 * k)) * g0 + L * (x0 - x1);
      t.squares = coeff * E.sq(v);
    } else {
      t.weighted_sum = c.at("lambda0") * interp_sym(E, kZero, x0, kZero, g0, mu, L) +
                       c.at("lambda1") * interp_sym(E, kZero, x1, kZero, g1, mu, L) +
                       c.at("lambda2") * E.ip(g1, x1 - x0) - cone_trace(E, S, e, g0, g1);
      t.target = E.sq(x1) - r * r * E.sq(x0);
      const double w = std::sqrt((1.0 - e * e) * k);
      const double coeff = (2.0 * e * w + (1.0 - e * e) * (1.0 - k)) / (k * (1.0 - k));
      const Lin v = ((1.0 - e * (1.0 - k) / (2.0 * w)) / L) * g0 - ((1.0 + k) / 2.0) * x0 +
                    ((1.0 - k) / (2.0 * e * w + (1.0 - e * e) * (1.0 - k)) / L) * g1;
      t.squares = coeff * E.sq(v);
    }
    return t;
  }

  const double gam = c.gamma;
  const bool limit = e == 0.0;
  const Lin x0 = unit(0), g0 = unit(1), g1 = unit(2);
  // In the ε = 0 limit the inexactness constraint forces d = g0.
  const Lin d = limit ? g0 : unit(3);
  const Lin x1 = x0 - gam * d;
  const double inexact = E.sq(d - g0) - e * e * E.sq(g0);

  switch (c.family) {
    case CertFamily::FixedGradient: {
      t.weighted_sum = c.at("lambda0") * interp_sym(E, x0, x1, g0, g1, mu, L);
      if (!limit) t.weighted_sum += c.at("lambda1") * inexact;
      t.target = E.sq(g1) - r * r * E.sq(g0);
      if (limit) {
        t.squares = (2.0 - gam * (L + mu)) / (gam * (L - mu)) * E.sq(g1 - r * g0);
      } else {
        const double den = (e - 1.0) * gam * (L + mu) + 2.0;
        const double c1 = (2.0 - (1.0 - e) * gam * (L + mu)) / ((1.0 - e) * gam * (L - mu));
        const Lin v1 = (gam * (L + mu) * ((e - 1.0) * gam * mu + 1.0) / den) * d -
                       (2.0 * ((e - 1.0) * gam * mu + 1.0) / den) * g0 + g1;
        const double c2 = (1.0 - e) * gam * (1.0 - (1.0 - e) * gam * mu) *
                          (2.0 * mu - e * (L + mu) - (1.0 - e) * gam * mu * (L + mu)) /
                          (e * (2.0 - (1.0 - e) * gam * (L + mu)));
        const Lin v2 = (1.0 / (e - 1.0)) * d + g0;
        t.squares = c1 * E.sq(v1) + c2 * E.sq(v2);
      }
      break;
    }
    case CertFamily::FixedDistance: {
      t.weighted_sum = c.at("lambda0") * interp_sym(E, kZero, x0, kZero, g0, mu, L);
      if (!limit) t.weighted_sum += c.at("lambda1") * inexact;
      t.target = E.sq(x1) - r * r * E.sq(x0);
      const double A = 2.0 - gam * (1.0 - e) * (L + mu);
      if (limit) {
        t.squares = gam * mu * mu * A / (L - mu) * E.sq(x0 - (1.0 / mu) * g0);
      } else {
        const double c1 = gam * mu * mu * (1.0 - e) * A / (L - mu);
        const Lin v1 = ((L - mu) / ((1.0 - e) * mu * mu * A)) * d -
                       ((L + mu) * (1.0 - gam * mu * (1.0 - e)) / (mu * mu * A)) * g0 + x0;
        const double c2 = gam * (1.0 - gam * mu * (1.0 - e)) *
                          (2.0 * mu - e * (L + mu) - gam * mu * (1.0 - e) * (L + mu)) /
                          (e * mu * mu * (1.0 - e) * A);
        const Lin v2 = d - (1.0 - e) * g0;
        t.squares = c1 * E.sq(v1) + c2 * E.sq(v2);
      }
      break;
    }
    case CertFamily::FixedFunctionValue: {
      const double f0 = point.f0;
      const double f1 = point.f1;
      t.weighted_sum = c.at("lambda01") * interp_ord(E, x0, x1, f0, f1, g0, g1, mu, L) +
                       c.at("lambda*0") * interp_ord(E, kZero, x0, 0.0, f0, kZero, g0, mu, L) +
                       c.at("lambda*1") * interp_ord(E, kZero, x1, 0.0, f1, kZero, g1, mu, L);
      if (!limit) t.weighted_sum += c.at("lambda2") * inexact;
      t.target = f1 - r * r * f0;
      const double t2 = L * mu * (1.0 - r * r) / (2.0 * (L - mu));
      const Lin v2 = (-gam / (r + 1.0)) * d - (r / (mu * r + mu)) * g0 - (1.0 / (mu * r + mu)) * g1 + x0;
      if (limit) {
        const double t3 = (2.0 - gam * (L + mu)) / (2.0 * (r + 1.0) * (L - mu));
        t.squares = t2 * E.sq(v2) + t3 * E.sq(g1 - r * g0);
      } else {
        const double D = L * (r - 1.0) + mu * (r + 1.0);
        const double Ed = L * (2.0 * e * gam * mu - r + 1.0) - mu * (r + 1.0);
        const double t1 = gam * r * (L * (-2.0 * e * gam * mu + r - 1.0) + mu * (r + 1.0)) / (2.0 * e * D);
        const Lin v1 = d + (((e + 1.0) * L * (r - 1.0) - (e - 1.0) * mu * (r + 1.0)) / Ed) * g0;
        const double t3 = (r * (L + mu) - (L - mu)) / (2.0 * mu * (r + 1.0) * (L - mu));
        const Lin v3 = (2.0 * gam * L * mu * r / D) * d + (r * (L * (r - 1.0) - mu * (r + 1.0)) / D) * g0 + g1;
        // Vanishes identically once ρ is substituted; kept as computed.
        const double t4 = r * ((e + 1.0) * gam * L - r - 1.0) * ((e - 1.0) * gam * mu - r + 1.0) / Ed;
        t.squares = t1 * E.sq(v1) + t2 * E.sq(v2) + t3 * E.sq(v3) - t4 * E.sq(g0);
      }
      break;
    }
    default:
      break;
  }
  return t;
}

double verify_identity(const Certificate& c, const GramPoint& point) { return identity_terms(c, point).residual(); }

double verify_els_gradient_identity(double kappa, double eps, const GramPoint& point) {
  return verify_identity(els_gradient_certificate(kappa, eps), point);
}

double verify_els_distance_identity(double kappa, double eps, const GramPoint& point) {
  return verify_identity(els_distance_certificate(kappa, eps), point);
}

double verify_fixed_identity(CertFamily family, double mu, double L, double eps, double gamma, const GramPoint& point) {
  return verify_identity(fixed_step_certificate(family, mu, L, eps, gamma), point);
}

double max_identity_residual(const Certificate& c, std::size_t n, std::mt19937_64& rng) {
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(verify_identity(c, random_gram_point(rng))));
  return worst;
}

CertificateCheck check_certificate(const Certificate& c, double tol) {
  CertificateCheck out;
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& [name, v] : c.multipliers) lo = std::min(lo, v);
  out.min_multiplier = c.multipliers.empty() ? 0.0 : lo;
  out.multipliers_nonnegative = out.min_multiplier >= -tol;
  if (c.S) {
    const SymMatrix& S = *c.S;
    out.det_s = S(0, 0) * S(1, 1) - S(1, 0) * S(1, 0);
    out.s_psd = eig_bounds(S).min >= -tol;
  }
  return out;
}

// ---------------------------------------------------------------- sweeps

std::vector<SweepRow> certificate_sweep(const std::vector<CertFamily>& families, std::size_t draws,
                                        std::size_t points, std::mt19937_64& rng,
                                        const std::function<void(Certificate&)>& mutate) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<SweepRow> rows;
  for (CertFamily f : families) {
    for (std::size_t k = 0; k < draws; ++k) {
      SweepRow row;
      row.family = f;
      row.kappa = 0.05 + 0.9 * u(rng);
      Certificate c;
      if (is_els(f)) {
        row.eps = els_eps_max(row.kappa) * u(rng);
        c = f == CertFamily::ElsGradient ? els_gradient_certificate(row.kappa, row.eps)
                                         : els_distance_certificate(row.kappa, row.eps);
      } else {
        row.eps = fixed_eps_max(row.kappa) * u(rng);
        // Keep γ away from 0 so the gradient family stays defined.
        row.gamma = fixed_gamma_max(row.kappa, 1.0, row.eps) * (0.01 + 0.99 * u(rng));
        c = fixed_step_certificate(f, row.kappa, 1.0, row.eps, row.gamma);
      }
      if (mutate) mutate(c);
      row.rate = c.rate;
      row.max_residual = max_identity_residual(c, points, rng);
      rows.push_back(row);
    }
  }
  return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "kappa,eps,gamma,family,rate,max_residual\n";
  for (const SweepRow& r : rows)
    os << r.kappa << ',' << r.eps << ',' << r.gamma << ',' << to_string(r.family) << ',' << r.rate << ','
       << r.max_residual << '\n';
  return os.str();
}

}  // namespace pepkit
