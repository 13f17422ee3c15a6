#pragma once

#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "pepkit/certificate.hpp"
#include "pepkit/linalg.hpp"

namespace pepkit {

/// A parameter gate of a rate or certificate failed.
class GateError : public std::invalid_argument {
 public:
  GateError(std::string gate, const std::string& what)
      : std::invalid_argument(what), gate_(std::move(gate)) {}
  const std::string& gate() const { return gate_; }

 private:
  std::string gate_;
};

/// Parameters of a rate query. μ = κ·L; γ is an absolute step length.
struct RateQuery {
  double kappa = 0.5;
  double eps = 0.0;
  std::optional<double> gamma;
  std::optional<double> delta;
  double L = 1.0;

  double mu() const { return kappa * L; }
};

/// One-step contraction factors. f_rate applies to f − f*, g_rate to ‖∇f‖,
/// x_rate to ‖x − x*‖ (so the squared quantities contract by the square).
struct Rates {
  double f_rate = 0.0;
  double g_rate = 0.0;
  double x_rate = 0.0;
};

double els_eps_max(double kappa);    // 2√κ/(1+κ)
double fixed_eps_max(double kappa);  // 2κ/(1+κ)
/// Largest admissible fixed step (2μ − ε(L+μ)) / ((1−ε)μ(L+μ)).
double fixed_gamma_max(double mu, double L, double eps);
/// ρ_ε(γ) = 1 − (1−ε)μγ.
double rho_fixed(double mu, double eps, double gamma);

Rates rate_els(const RateQuery& q);
/// ((1−κ+ε(1+κ))/(1+κ+ε(1−κ)))², the optimum of the ELS function-value PEP.
/// Agrees with rate_els().f_rate at ε = 0 only; for ε > 0 the latter's
/// ε(1−κ) numerator lies below the PEP optimum and is not a valid bound.
double els_function_value_rate(double kappa, double eps);
/// Requires q.gamma.
Rates rate_fixed(const RateQuery& q);

struct NewtonStepParams {
  double gamma = 0.0;
  double kappa_delta = 0.0;
  double rate = 0.0;
};
NewtonStepParams newton_step_params(double delta, double eps);

/// Sign condition g(params) ≥ 0. `value` is the signed quantity.
struct Gate {
  std::string name;
  double value = 0.0;
  bool ok = true;
  /// Informational gates (sufficient but not exact conditions) never fail a
  /// certificate.
  bool informational = false;
};

std::vector<Gate> els_gates(CertFamily family, double kappa, double eps);
std::vector<Gate> fixed_gates(CertFamily family, double mu, double L, double eps, double gamma);

/// Closed-form multipliers. Throws GateError naming the failed condition.
/// The ELS families are stated for L = 1 scaling unless L is given.
Certificate els_gradient_certificate(double kappa, double eps, double L = 1.0);
Certificate els_distance_certificate(double kappa, double eps, double L = 1.0);
/// family ∈ {FixedGradient, FixedDistance, FixedFunctionValue}. At ε = 0 the
/// inexactness multiplier is dropped and the limiting certificate is used.
Certificate fixed_step_certificate(CertFamily family, double mu, double L, double eps, double gamma);

/// Values for the Gram entries of one step.
/// ELS families:   labels x0, x1, g0, g1.
/// Fixed families: labels x0, g0, g1, d with x1 = x0 − γd.
/// f0, f1 are used by the function-value family only. x* = g* = f* = 0.
/// The matrix need not be PSD: the identities are polynomial.
struct GramPoint {
  SymMatrix gram{4};
  double f0 = 0.0;
  double f1 = 0.0;
};

/// Entries uniform in [−scale, scale].
GramPoint random_gram_point(std::mt19937_64& rng, double scale = 1.0);
/// Gram matrix of four random vectors in R^dim (PSD, rank ≤ dim).
GramPoint random_psd_gram_point(std::mt19937_64& rng, std::size_t dim = 4);

/// The two sides of a certificate's reformulation:
///   weighted_sum  = Σ multiplier · (constraint written as "≤ 0")
///   target        = (performance measure at step 1) − rate²·(measure at step 0)
///   squares       = Σ coefficient · ‖completed square‖²
/// The identity is weighted_sum = target + squares.
struct IdentityTerms {
  double weighted_sum = 0.0;
  double target = 0.0;
  double squares = 0.0;
  double residual() const { return weighted_sum - target - squares; }
};

IdentityTerms identity_terms(const Certificate& c, const GramPoint& point);
double verify_identity(const Certificate& c, const GramPoint& point);

double verify_els_gradient_identity(double kappa, double eps, const GramPoint& point);
double verify_els_distance_identity(double kappa, double eps, const GramPoint& point);
double verify_fixed_identity(CertFamily family, double mu, double L, double eps, double gamma, const GramPoint& point);

/// Largest |residual| over n random points (entries in [−1, 1]).
double max_identity_residual(const Certificate& c, std::size_t n, std::mt19937_64& rng);

/// Multipliers ≥ −tol, S PSD within tol, and det S = 0 within tol for ELS.
struct CertificateCheck {
  bool multipliers_nonnegative = true;
  bool s_psd = true;
  double det_s = 0.0;
  double min_multiplier = 0.0;
};
CertificateCheck check_certificate(const Certificate& c, double tol);

struct SweepRow {
  double kappa = 0.0;
  double eps = 0.0;
  double gamma = 0.0;
  CertFamily family = CertFamily::ElsGradient;
  double rate = 0.0;
  double max_residual = 0.0;
};

/// For each family, `draws` parameter points sampled uniformly from the
/// admissible region (κ ∈ [0.05, 0.95]), `points` random Gram points each.
/// `mutate`, when set, edits each certificate before it is checked.
std::vector<SweepRow> certificate_sweep(const std::vector<CertFamily>& families, std::size_t draws,
                                        std::size_t points, std::mt19937_64& rng,
                                        const std::function<void(Certificate&)>& mutate = {});
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

}  // namespace pepkit
