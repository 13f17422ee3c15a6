#include "pepkit/descent.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

namespace pepkit {

namespace {

constexpr double kInvPhi = 0.6180339887498949;  // 1/φ

Vector solve_spd(const SymMatrix& b, std::span<const double> rhs) {
  const auto l = cholesky(b);
  if (!l) throw std::invalid_argument("metric operator is not positive definite");
  return solve_upper_transposed(*l, solve_lower(*l, rhs));
}

/// Maximizes a 1-D function on [lo, hi]: grid, then golden section around the
/// best grid point.
std::pair<double, double> maximize_1d(const std::function<double(double)>& fn, double lo, double hi,
                                      std::size_t grid = 64, int golden_iters = 80) {
  if (!(hi > lo)) return {lo, fn(lo)};
  double best_t = lo;
  double best_v = -std::numeric_limits<double>::infinity();
  const double h = (hi - lo) / static_cast<double>(grid);
  for (std::size_t i = 0; i <= grid; ++i) {
    const double t = lo + h * static_cast<double>(i);
    const double v = fn(t);
    if (v > best_v) {
      best_v = v;
      best_t = t;
    }
  }
  double a = std::max(lo, best_t - h);
  double b = std::min(hi, best_t + h);
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = fn(c);
  double fd = fn(d);
  for (int it = 0; it < golden_iters && b - a > 1e-14 * (1.0 + std::abs(a)); ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = fn(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = fn(d);
    }
  }
  for (auto [t, v] : {std::pair{c, fc}, std::pair{d, fd}})
    if (v > best_v) {
      best_v = v;
      best_t = t;
    }
  return {best_t, best_v};
}

MetricOperator metric_at(const FunctionOracle& f, std::span<const double> x) { return intrinsic_metric(f, x); }

}  // namespace

void DescentConfig::validate() const {
  if (!(eps >= 0.0 && eps < 1.0)) throw std::invalid_argument("DescentConfig: eps must lie in [0, 1)");
  if (step.kind == StepRule::Kind::FixedStep && !(step.gamma >= 0.0 && std::isfinite(step.gamma)))
    throw std::invalid_argument("DescentConfig: fixed step length must be finite and nonnegative");
  if (max_iter < 0) throw std::invalid_argument("DescentConfig: max_iter must be nonnegative");
  if (!(stop_grad >= 0.0)) throw std::invalid_argument("DescentConfig: stop_grad must be nonnegative");
  if (!(ratio_floor >= 0.0 && ratio_floor < 1.0))
    throw std::invalid_argument("DescentConfig: ratio_floor must lie in [0, 1)");
  if (metric.kind == MetricChoice::Kind::IntrinsicAt && metric.point.empty())
    throw std::invalid_argument("DescentConfig: IntrinsicAt metric needs a point");
}

Vector metric_gradient(std::span<const double> euclidean_gradient, const MetricOperator& b) {
  return solve_spd(b.matrix(), euclidean_gradient);
}

Vector direction(std::span<const double> g, double eps, DirectionMode mode, const MetricOperator& b,
                 std::mt19937_64* rng) {
  const double gn = b.norm(g);
  if (!(gn > 0.0)) throw std::invalid_argument("direction: zero gradient (the method has converged)");
  if (!(eps >= 0.0 && eps < 1.0)) throw std::invalid_argument("direction: eps must lie in [0, 1)");
  switch (mode) {
    case DirectionMode::Exact:
      return Vector(g.begin(), g.end());
    case DirectionMode::RandomCone: {
      if (!rng) throw std::invalid_argument("direction: RandomCone needs a generator");
      const std::size_t n = g.size();
      std::normal_distribution<double> normal(0.0, 1.0);
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      Vector z(n);
      for (double& v : z) v = normal(*rng);
      const double zn = norm2(z);
      if (!(zn > 0.0)) return Vector(g.begin(), g.end());
      // B^{-1/2} z/‖z‖ has unit B-norm; the radius law r^{1/n} makes the draw
      // uniform in the ball.
      Vector u = inv_sqrt_spd(b.matrix()) * std::span<const double>(z);
      const double r = eps * gn * std::pow(unif(*rng), 1.0 / static_cast<double>(n)) / zn;
      Vector d(g.begin(), g.end());
      axpy(r, u, d);
      return d;
    }
    case DirectionMode::AdversarialWorst:
      throw std::invalid_argument("direction: AdversarialWorst needs the oracle; use adversarial_direction");
  }
  return Vector(g.begin(), g.end());
}

double exact_line_search(const FunctionOracle& f, std::span<const double> x, std::span<const double> d) {
  const Vector grad = f.gradient(x);
  const double slope = dot(grad, d);
  if (!(slope > 0.0)) throw std::invalid_argument("exact_line_search: d is not a descent direction");
  if (const auto* q = dynamic_cast<const QuadraticFunction*>(&f)) {
    const double curv = dot(d, q->q() * d);
    return slope / curv;
  }
  const DomainSpec dom = f.domain();
  auto point = [&](double t) {
    Vector p(x.begin(), x.end());
    axpy(-t, d, p);
    return p;
  };
  // φ'(t) = −⟨∇f(x − t d), d⟩; increasing for convex f.
  auto dphi = [&](double t) -> std::optional<double> {
    const Vector p = point(t);
    if (!dom.contains(p)) return std::nullopt;
    return -dot(f.gradient(p), d);
  };

  double lo = 0.0;
  double flo = -slope;
  const double curv0 = dot(d, f.hessian(x) * d);
  double hi = curv0 > 0.0 ? slope / curv0 : 1.0;
  // hi_in: the upper end lies in the domain and fhi holds φ'(hi).
  double fhi = 0.0;
  bool hi_in = false;
  auto probe_hi = [&]() {
    const std::optional<double> v = dphi(hi);
    hi_in = v.has_value();
    fhi = v.value_or(0.0);
  };
  probe_hi();
  for (int it = 0; it < 200 && hi_in && fhi < 0.0; ++it) {
    lo = hi;
    flo = fhi;
    hi *= 2.0;
    probe_hi();
  }
  if (hi_in && fhi < 0.0) throw std::runtime_error("exact_line_search: no minimizer along d");

  // Illinois regula falsi; bisection while the upper end is outside the domain.
  int side = 0;
  for (int it = 0; it < 300; ++it) {
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
    double t = hi_in ? (lo * fhi - hi * flo) / (fhi - flo) : 0.5 * (lo + hi);
    if (!(t > lo && t < hi)) t = 0.5 * (lo + hi);
    const std::optional<double> ft = dphi(t);
    if (!ft) {
      hi = t;
      hi_in = false;
      side = 0;
      continue;
    }
    if (*ft == 0.0) return t;
    if (*ft < 0.0) {
      lo = t;
      flo = *ft;
      if (side == -1 && hi_in) fhi *= 0.5;
      side = -1;
    } else {
      hi = t;
      fhi = *ft;
      hi_in = true;
      if (side == 1) flo *= 0.5;
      side = 1;
    }
  }
  // Return the end with the smaller slope magnitude.
  const std::optional<double> a = dphi(lo);
  const std::optional<double> b = dphi(hi);
  if (b && (!a || std::abs(*b) < std::abs(*a))) return hi;
  return lo;
}

Vector adversarial_direction(const FunctionOracle& f, std::span<const double> x, std::span<const double> g,
                             double eps, const StepRule& step, const MetricOperator& b, Variant target,
                             std::span<const double> x_star) {
  const double gn = b.norm(g);
  if (!(gn > 0.0)) throw std::invalid_argument("adversarial_direction: zero gradient");
  if (target == Variant::Distance && x_star.empty())
    throw std::invalid_argument("adversarial_direction: distance target needs the minimizer");
  if (eps == 0.0) return Vector(g.begin(), g.end());
  const std::size_t n = g.size();
  const bool els = step.kind == StepRule::Kind::ExactLineSearch;
  const DomainSpec dom = f.domain();

  const Vector u = scaled(g, 1.0 / gn);
  Vector w;
  if (n > 1) {
    w = metric_gradient(f.hessian(x) * g, b);
    axpy(-inner(b, w, u), u, w);
    if (b.norm(w) <= 1e-12 * b.norm(metric_gradient(f.hessian(x) * g, b))) {
      // g is an eigenvector; any B-orthogonal direction spans the worst plane.
      std::size_t pick = 0;
      for (std::size_t i = 1; i < n; ++i)
        if (std::abs(u[i]) < std::abs(u[pick])) pick = i;
      w.assign(n, 0.0);
      w[pick] = 1.0;
      axpy(-inner(b, w, u), u, w);
    }
    w = scaled(w, 1.0 / b.norm(w));
  }

  auto make = [&](double p) {
    Vector d(n, 0.0);
    if (els) {
      axpy(gn * std::cos(p) * std::cos(p), u, d);
      if (n > 1) axpy(gn * std::cos(p) * std::sin(p), w, d);
    } else if (n > 1) {
      d.assign(g.begin(), g.end());
      axpy(eps * gn * std::cos(p), u, d);
      axpy(eps * gn * std::sin(p), w, d);
    } else {
      d = scaled(g, 1.0 + eps * std::cos(p));
    }
    return d;
  };
  auto score = [&](double p) {
    const Vector d = make(p);
    double gamma = step.gamma;
    if (els) {
      try {
        gamma = exact_line_search(f, x, d);
      } catch (const std::exception&) {
        return -std::numeric_limits<double>::infinity();
      }
    }
    Vector x1(x.begin(), x.end());
    axpy(-gamma, d, x1);
    if (!dom.contains(x1)) return -std::numeric_limits<double>::infinity();
    switch (target) {
      case Variant::GradientNorm:
        return b.norm(metric_gradient(f.gradient(x1), b));
      case Variant::Distance:
        return b.norm(sub(x1, x_star));
      case Variant::FunctionValue:
        return f.value(x1);
    }
    return -std::numeric_limits<double>::infinity();
  };

  if (els) {
    if (n == 1) return Vector(g.begin(), g.end());
    const double amax = std::asin(eps);
    return make(maximize_1d(score, -amax, amax).first);
  }
  return make(maximize_1d(score, 0.0, 2.0 * std::numbers::pi).first);
}

DescentTrace run(const FunctionOracle& f, std::span<const double> x0, const DescentConfig& cfg) {
  cfg.validate();
  if (x0.size() != f.dim()) throw DimensionError("run: x0 has the wrong dimension");
  const DomainSpec dom = f.domain();
  if (!dom.contains(x0)) throw DomainError("run: x0 is outside the domain");

  DescentTrace trace;
  trace.x_star = f.minimizer();
  if (trace.x_star) trace.f_star = f.value(*trace.x_star);

  std::optional<MetricOperator> fixed_metric;
  switch (cfg.metric.kind) {
    case MetricChoice::Kind::Reference:
      fixed_metric = cfg.metric.reference ? *cfg.metric.reference : MetricOperator::euclidean(f.dim());
      break;
    case MetricChoice::Kind::IntrinsicAt:
      fixed_metric = metric_at(f, cfg.metric.point);
      break;
    case MetricChoice::Kind::IntrinsicAtMinimizer:
      if (!trace.x_star) throw std::invalid_argument("run: IntrinsicAtMinimizer needs an oracle with a known minimizer");
      fixed_metric = metric_at(f, *trace.x_star);
      break;
    case MetricChoice::Kind::IntrinsicAtIterate:
      break;
  }
  if (fixed_metric && fixed_metric->dim() != f.dim()) throw DimensionError("run: metric has the wrong dimension");

  std::mt19937_64 rng(cfg.seed);
  const bool els = cfg.step.kind == StepRule::Kind::ExactLineSearch;
  Vector x(x0.begin(), x0.end());
  double g_scale = 0.0, x_scale = 0.0, f_scale = 0.0;
  const std::span<const double> xs = trace.x_star ? std::span<const double>(*trace.x_star) : std::span<const double>{};

  for (int k = 0;; ++k) {
    const MetricOperator b = fixed_metric ? *fixed_metric : metric_at(f, x);
    const Vector grad = f.gradient(x);
    const Vector g = metric_gradient(grad, b);
    DescentStep s;
    s.k = k;
    s.x = x;
    s.f = f.value(x);
    s.grad_norm = b.norm(g);
    if (k == 0) {
      g_scale = s.grad_norm;
      if (trace.x_star) {
        x_scale = b.norm(sub(x, xs));
        f_scale = s.f - *trace.f_star;
      }
    }
    if (s.grad_norm <= cfg.stop_grad) {
      trace.status = DescentTrace::Status::Converged;
      trace.steps.push_back(std::move(s));
      break;
    }
    if (k == cfg.max_iter) {
      trace.status = DescentTrace::Status::MaxIter;
      trace.steps.push_back(std::move(s));
      break;
    }

    Vector d = cfg.mode == DirectionMode::AdversarialWorst
                   ? adversarial_direction(f, x, g, cfg.eps, cfg.step, b, cfg.adversary_target, xs)
                   : direction(g, cfg.eps, cfg.mode, b, &rng);
    s.direction_error = b.norm(sub(d, g)) / s.grad_norm;
    s.gamma = els ? exact_line_search(f, x, d) : cfg.step.gamma;
    Vector x1 = x;
    axpy(-s.gamma, d, x1);
    s.d = d;
    if (!dom.contains(x1)) {
      std::ostringstream os;
      os << "run: iterate " << (k + 1) << " left the domain";
      Vector bad = x1;
      trace.steps.push_back(std::move(s));
      throw DomainExitError(os.str(), std::move(bad), k + 1, std::move(trace));
    }

    const Vector grad1 = f.gradient(x1);
    const Vector g1 = metric_gradient(grad1, b);
    const double g1n = b.norm(g1);
    if (els) {
      const double denom = g1n * b.norm(d);
      s.orthogonality = denom > 0.0 ? std::abs(dot(grad1, d)) / denom : 0.0;
    }
    if (s.grad_norm >= cfg.ratio_floor * g_scale) s.g_ratio = g1n / s.grad_norm;
    if (trace.x_star) {
      const double dist = b.norm(sub(x, xs));
      if (dist > 0.0 && dist >= cfg.ratio_floor * x_scale) s.x_ratio = b.norm(sub(x1, xs)) / dist;
      const double gap = s.f - *trace.f_star;
      if (gap > 0.0 && gap >= cfg.ratio_floor * f_scale) s.f_ratio = (f.value(x1) - *trace.f_star) / gap;
    }
    trace.steps.push_back(std::move(s));
    x = std::move(x1);
  }
  return trace;
}

EigBounds relative_spectrum(const SymMatrix& h, const SymMatrix& b) {
  return eig_bounds(congruence(h, inv_sqrt_spd(b).matrix()));
}

RateAudit audit(const DescentTrace& trace, const Rates& rates, double tol, bool check_f) {
  RateAudit a;
  double worst = -std::numeric_limits<double>::infinity();
  auto take = [&](const std::optional<double>& r, double rate, double& mx) {
    if (!r) return;
    ++a.audited;
    mx = std::max(mx, *r);
    worst = std::max(worst, *r - rate);
    if (!(*r <= rate + tol)) a.sound = false;
  };
  for (const DescentStep& s : trace.steps) {
    if (check_f) take(s.f_ratio, rates.f_rate, a.max_f_ratio);
    take(s.g_ratio, rates.g_rate, a.max_g_ratio);
    take(s.x_ratio, rates.x_rate, a.max_x_ratio);
  }
  if (a.audited > 0) a.worst_excess = worst;
  return a;
}

SharpnessResult adversarial_sharpness(double mu, double L, const DescentConfig& config, Variant target,
                                      std::size_t starts) {
  config.validate();
  const QuadraticFunction q(SymMatrix::diagonal(std::vector<double>{mu, L}));
  const MetricOperator b = MetricOperator::euclidean(2);
  const Vector origin(2, 0.0);
  auto ratio = [&](double phi) {
    const Vector x0{std::cos(phi), std::sin(phi)};
    const Vector g = q.gradient(x0);
    const Vector d = config.eps > 0.0
                         ? adversarial_direction(q, x0, g, config.eps, config.step, b, target, origin)
                         : g;
    const double gamma =
        config.step.kind == StepRule::Kind::ExactLineSearch ? exact_line_search(q, x0, d) : config.step.gamma;
    Vector x1 = x0;
    axpy(-gamma, d, x1);
    switch (target) {
      case Variant::GradientNorm:
        return norm2(q.gradient(x1)) / norm2(g);
      case Variant::Distance:
        return norm2(x1) / norm2(x0);
      case Variant::FunctionValue:
        return q.value(x1) / q.value(x0);
    }
    return 0.0;
  };
  const auto [phi, best] = maximize_1d(ratio, 0.0, std::numbers::pi / 2.0, starts, 60);

  SharpnessResult r;
  r.achieved = best;
  r.worst_x0 = {std::cos(phi), std::sin(phi)};
  RateQuery rq{mu / L, config.eps, std::nullopt, std::nullopt, L};
  Rates rates;
  if (config.step.kind == StepRule::Kind::ExactLineSearch) {
    rates = rate_els(rq);
  } else {
    rq.gamma = config.step.gamma;
    rates = rate_fixed(rq);
  }
  r.rate = target == Variant::FunctionValue ? rates.f_rate : target == Variant::GradientNorm ? rates.g_rate : rates.x_rate;
  r.fraction = r.rate > 0.0 ? r.achieved / r.rate : 1.0;
  return r;
}

TransformedOracle::TransformedOracle(const FunctionOracle& inner, Matrix t) : inner_(inner), t_(std::move(t)) {
  if (t_.rows() != inner.dim() || t_.cols() != inner.dim())
    throw DimensionError("TransformedOracle: transform must be square of the oracle's dimension");
}

double TransformedOracle::value(std::span<const double> y) const { return inner_.value(t_ * y); }

Vector TransformedOracle::gradient(std::span<const double> y) const {
  const Vector g = inner_.gradient(t_ * y);
  return t_.transpose() * std::span<const double>(g);
}

SymMatrix TransformedOracle::hessian(std::span<const double> y) const {
  return congruence(inner_.hessian(t_ * y), t_);
}

std::optional<Vector> TransformedOracle::minimizer() const {
  const auto xs = inner_.minimizer();
  if (!xs) return std::nullopt;
  const LuFactorization lu(t_);
  if (lu.singular()) return std::nullopt;
  return lu.solve(*xs);
}

std::string trace_to_csv(const DescentTrace& trace) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "k,f,f_gap,grad_norm,gamma,direction_error,orthogonality,f_ratio,g_ratio,x_ratio,x\n";
  auto opt = [&](const std::optional<double>& v) {
    if (v) os << *v;
  };
  for (const DescentStep& s : trace.steps) {
    os << s.k << ',' << s.f << ',';
    if (trace.f_star) os << s.f - *trace.f_star;
    os << ',' << s.grad_norm << ',' << s.gamma << ',' << s.direction_error << ',' << s.orthogonality << ',';
    opt(s.f_ratio);
    os << ',';
    opt(s.g_ratio);
    os << ',';
    opt(s.x_ratio);
    os << ',';
    for (std::size_t i = 0; i < s.x.size(); ++i) os << (i ? ";" : "") << s.x[i];
    os << '\n';
  }
  return os.str();
}

std::string trace_to_json(const DescentTrace& trace, int indent) {
  using nlohmann::json;
  json steps = json::array();
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  for (const DescentStep& s : trace.steps)
    steps.push_back({{"k", s.k},
                     {"x", s.x},
                     {"f", s.f},
                     {"grad_norm", s.grad_norm},
                     {"d", s.d},
                     {"gamma", s.gamma},
                     {"direction_error", s.direction_error},
                     {"orthogonality", s.orthogonality},
                     {"f_ratio", opt(s.f_ratio)},
                     {"g_ratio", opt(s.g_ratio)},
                     {"x_ratio", opt(s.x_ratio)}});
  json j = {{"status", trace.status == DescentTrace::Status::Converged ? "converged" : "max_iter"},
            {"f_star", opt(trace.f_star)},
            {"steps", steps}};
  if (trace.x_star) j["x_star"] = *trace.x_star;
  return j.dump(indent);
}

std::string to_string(DirectionMode m) {
  switch (m) {
    case DirectionMode::Exact:
      return "exact";
    case DirectionMode::AdversarialWorst:
      return "adversarial";
    case DirectionMode::RandomCone:
      return "random_cone";
  }
  return "?";
}

DirectionMode direction_mode_from_string(const std::string& s) {
  for (DirectionMode m : {DirectionMode::Exact, DirectionMode::AdversarialWorst, DirectionMode::RandomCone})
    if (to_string(m) == s) return m;
  throw std::invalid_argument("unknown direction mode '" + s + "'");
}

}  // namespace pepkit
