#pragma once

#include <map>
#include <optional>
#include <string>

#include "pepkit/linalg.hpp"

namespace pepkit {

enum class CertFamily { ElsGradient, ElsDistance, FixedGradient, FixedDistance, FixedFunctionValue };

/// Dual multipliers attesting a one-step worst-case rate.
///
/// Multiplier names per family:
///   ElsGradient         lambda, linesearch                     + S
///   ElsDistance         lambda0, lambda1, lambda2               + S
///   FixedGradient       lambda0, lambda1
///   FixedDistance       lambda0, lambda1
///   FixedFunctionValue  lambda01, lambda*0, lambda*1, lambda2
/// In the ε = 0 limit of the fixed-step families the inexactness multiplier
/// (lambda1 or lambda2) is absent.
struct Certificate {
  CertFamily family = CertFamily::ElsGradient;
  std::map<std::string, double> multipliers;
  std::optional<SymMatrix> S;
  /// Contraction factor ρ per step; the bound on the PEP objective is rate²·R.
  double rate = 0.0;
  double mu = 0.0;
  double L = 0.0;
  double eps = 0.0;
  double gamma = 0.0;  // fixed-step families only

  double at(const std::string& name) const;
  bool has(const std::string& name) const { return multipliers.count(name) > 0; }
};

std::string to_string(CertFamily f);
CertFamily cert_family_from_string(const std::string& s);

}  // namespace pepkit
