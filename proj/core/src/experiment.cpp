#include "pepkit/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "pepkit/sdpsolve.hpp"

namespace pepkit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ------------------------------------------------------------------ parsing

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("spec key '") + key + "': " + e.what());
  }
}

Box parse_box(const json& j) {
  Box b;
  b.lo = j.at("lo").get<Vector>();
  b.hi = j.at("hi").get<Vector>();
  return b;
}

ConvexBody parse_domain(const json& j) {
  if (j.contains("box")) return parse_box(j.at("box"));
  if (j.contains("polytope")) {
    const auto& p = j.at("polytope");
    const auto rows = p.at("A").get<std::vector<Vector>>();
    Polytope poly;
    poly.b = p.at("b").get<Vector>();
    if (rows.empty()) throw std::invalid_argument("spec: polytope needs rows");
    poly.A = Matrix(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != poly.A.cols()) throw std::invalid_argument("spec: ragged polytope rows");
      for (std::size_t c = 0; c < rows[r].size(); ++c) poly.A(r, c) = rows[r][c];
    }
    return poly;
  }
  throw std::invalid_argument("spec: domain must contain 'box' or 'polytope'");
}

std::vector<EpsValue> parse_eps_list(const json& j) {
  std::vector<EpsValue> out;
  for (const auto& e : j) {
    if (e.is_string()) {
      if (e.get<std::string>() != "max") throw std::invalid_argument("spec: eps entries are numbers or \"max\"");
      out.push_back({0.0, true});
    } else {
      out.push_back({e.get<double>(), false});
    }
  }
  return out;
}

HitAndRunOptions parse_chain(const json& j, HitAndRunOptions o) {
  o.burn_in = get_or<std::size_t>(j, "burn_in", o.burn_in);
  o.thinning = get_or<std::size_t>(j, "thinning", o.thinning);
  return o;
}

// ------------------------------------------------------------------ output

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

void write_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

// Results land in index order, so output does not depend on scheduling.
template <class R>
std::vector<R> parallel_map(std::size_t n, unsigned threads, const std::function<R(std::size_t)>& fn) {
  std::vector<R> out(n);
  const unsigned t = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (t <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(t);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < t; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < n; i = next++) out[i] = fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

std::string join(std::span<const double> v, char sep = ';') {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += fmt(v[i]);
  }
  return s;
}

// ------------------------------------------------------------------ pep

struct PepRow {
  std::string variant;
  double kappa = 0, eps = 0, gamma = 0;
  double analytic = 0, stated = 0, sdp = 0, rel_gap = 0;
  bool skipped = false;
  std::string status;
  std::string note;
};

std::string run_pep(const ExperimentSpec& spec, std::vector<Check>& checks, std::size_t& nrows) {
  const auto& p = spec.pep;
  const bool els = p.step == StepRule::Kind::ExactLineSearch;
  struct Point {
    double kappa, eps, frac;
    Variant v;
    bool eps_is_max;
  };
  std::vector<Point> grid;
  for (double k : p.kappas)
    for (const auto& e : p.epss) {
      const std::vector<double> fracs = els ? std::vector<double>{0.0} : p.gamma_fractions;
      for (double fr : fracs)
        for (Variant v : p.variants) grid.push_back({k, e.value, fr, v, e.max});
    }

  auto rows = parallel_map<PepRow>(grid.size(), spec.threads, [&](std::size_t i) {
    const Point& g = grid[i];
    PepRow row;
    row.variant = to_string(g.v);
    row.kappa = g.kappa;
    row.eps = g.eps_is_max ? (els ? els_eps_max(g.kappa) : fixed_eps_max(g.kappa)) : g.eps;
    const double mu = g.kappa * p.L;
    try {
      PepInstance inst;
      inst.variant = g.v;
      inst.mu = mu;
      inst.L = p.L;
      inst.eps = row.eps;
      inst.R = p.R;
      if (els) {
        const Rates r = rate_els({g.kappa, row.eps, std::nullopt, std::nullopt, p.L});
        row.stated = (g.v == Variant::FunctionValue ? r.f_rate : r.g_rate * r.g_rate) * p.R;
        row.analytic = g.v == Variant::FunctionValue ? els_function_value_rate(g.kappa, row.eps) * p.R : row.stated;
        inst.step = StepRule::exact_line_search();
      } else {
        if (row.eps > fixed_eps_max(g.kappa) + 1e-12)
          throw GateError("eps <= 2kappa/(1+kappa)", "eps beyond 2κ/(1+κ)");
        row.gamma = g.frac * fixed_gamma_max(mu, p.L, row.eps);
        const Rates r = rate_fixed({g.kappa, row.eps, row.gamma, std::nullopt, p.L});
        row.analytic = row.stated = r.f_rate * p.R;
        inst.step = StepRule::fixed(row.gamma);
      }
      const SdpSolution sol = solve(build(inst));
      row.status = to_string(sol.status);
      row.sdp = sol.objective_value;
      row.rel_gap = std::fabs(row.sdp - row.analytic) / std::max(std::fabs(row.analytic), 1e-300);
    } catch (const GateError& e) {
      row.skipped = true;
      row.status = "gate";
      row.note = e.gate();
    }
    return row;
  });

  std::ostringstream csv;
  csv << "step,variant,kappa,eps,gamma,analytic,stated_rate,sdp,rel_gap,status,note\n";
  double max_gap = 0.0;
  int not_optimal = 0;
  for (const auto& r : rows) {
    csv << (els ? "els" : "fixed") << ',' << r.variant << ',' << fmt(r.kappa) << ',' << fmt(r.eps) << ','
        << fmt(r.gamma) << ',' << fmt(r.analytic) << ',' << fmt(r.stated) << ',' << fmt(r.sdp) << ','
        << fmt(r.rel_gap) << ',' << r.status << ',' << r.note << '\n';
    if (r.skipped) continue;
    if (r.status != "optimal") ++not_optimal;
    max_gap = std::max(max_gap, r.rel_gap);
  }
  nrows = rows.size();
  checks.push_back({"max_rel_gap", max_gap, p.tol, max_gap <= p.tol});
  checks.push_back({"non_optimal_solves", static_cast<double>(not_optimal), 0.0, not_optimal == 0});
  return csv.str();
}

// ------------------------------------------------------------------ cert

std::string run_cert(const ExperimentSpec& spec, std::vector<Check>& checks, std::size_t& nrows) {
  const auto& p = spec.cert;
  std::mt19937_64 rng(spec.seed);
  std::function<void(Certificate&)> mutate;
  if (p.mutation) {
    const CertMutation m = *p.mutation;
    mutate = [m](Certificate& c) {
      if (c.family != m.family) return;
      auto it = c.multipliers.find(m.multiplier);
      if (it == c.multipliers.end())
        throw std::invalid_argument("mutation: family " + to_string(m.family) + " has no multiplier '" + m.multiplier + "'");
      it->second *= 1.0 + m.rel;
    };
  }
  const auto rows = certificate_sweep(p.families, p.draws, p.points, rng, mutate);
  nrows = rows.size();
  for (CertFamily f : p.families) {
    double worst = 0.0;
    for (const auto& r : rows)
      if (r.family == f) worst = std::max(worst, r.max_residual);
    checks.push_back({"max_residual[" + to_string(f) + "]", worst, p.tol, worst <= p.tol});
  }
  return sweep_to_csv(rows);
}

// ------------------------------------------------------------------ descent

struct DescentRow {
  double kappa = 0, eps = 0, gamma = 0;
  std::string step, mode;
  std::size_t start = 0;
  int steps = 0;
  RateAudit audit;
  Rates rates;
  std::string note;
};

std::string run_descent(const ExperimentSpec& spec, std::vector<Check>& checks, std::size_t& nrows) {
  const auto& p = spec.descent;
  if (p.dim < 2) throw std::invalid_argument("descent_sweep: dim must be at least 2");
  struct Point {
    double kappa, eps;
    std::string step;
    DirectionMode mode;
    std::size_t start;
  };
  std::vector<Point> grid;
  for (double k : p.kappas)
    for (double e : p.epss)
      for (const auto& s : p.steps)
        for (DirectionMode m : p.modes)
          for (std::size_t st = 0; st < p.starts; ++st) grid.push_back({k, e, s, m, st});

  auto rows = parallel_map<DescentRow>(grid.size(), spec.threads, [&](std::size_t i) {
    const Point& g = grid[i];
    DescentRow row;
    row.kappa = g.kappa;
    row.eps = g.eps;
    row.step = g.step;
    row.mode = to_string(g.mode);
    row.start = g.start;
    const double mu = g.kappa, L = 1.0;
    Vector diag(p.dim);
    for (std::size_t j = 0; j < p.dim; ++j) diag[j] = mu + (L - mu) * static_cast<double>(j) / static_cast<double>(p.dim - 1);
    const QuadraticFunction f(SymMatrix::diagonal(diag));

    DescentConfig cfg;
    cfg.eps = g.eps;
    cfg.mode = g.mode;
    cfg.seed = spec.seed * 1000003ull + i;
    cfg.max_iter = p.max_iter;
    try {
      if (g.step == "els") {
        row.rates = rate_els({g.kappa, g.eps, std::nullopt, std::nullopt, L});
        row.rates.f_rate = els_function_value_rate(g.kappa, g.eps);
      } else {
        if (g.eps > fixed_eps_max(g.kappa)) throw GateError("eps <= 2kappa/(1+kappa)", "eps beyond 2κ/(1+κ)");
        const double gmax = fixed_gamma_max(mu, L, g.eps);
        if (g.step == "fixed_max") row.gamma = gmax;
        else if (g.step == "fixed_half") row.gamma = 0.5 * gmax;
        else throw std::invalid_argument("descent_sweep: unknown step '" + g.step + "'");
        cfg.step = StepRule::fixed(row.gamma);
        row.rates = rate_fixed({g.kappa, g.eps, row.gamma, std::nullopt, L});
      }
    } catch (const GateError& e) {
      row.note = "gate:" + e.gate();
      return row;
    }
    std::mt19937_64 rng(spec.seed ^ (0x9E3779B97F4A7C15ull * (g.start + 1)));
    std::normal_distribution<double> nd;
    Vector x0(p.dim);
    for (double& v : x0) v = nd(rng);
    const DescentTrace tr = run(f, x0, cfg);
    row.steps = static_cast<int>(tr.steps.size()) - 1;
    row.audit = audit(tr, row.rates, p.tol, true);
    return row;
  });

  std::ostringstream csv;
  csv << "kappa,eps,step,gamma,mode,start,steps,max_f_ratio,f_rate,max_g_ratio,g_rate,max_x_ratio,x_rate,audited,sound,note\n";
  double worst = -1.0;
  int unsound = 0;
  for (const auto& r : rows) {
    csv << fmt(r.kappa) << ',' << fmt(r.eps) << ',' << r.step << ',' << fmt(r.gamma) << ',' << r.mode << ','
        << r.start << ',' << r.steps << ',' << fmt(r.audit.max_f_ratio) << ',' << fmt(r.rates.f_rate) << ','
        << fmt(r.audit.max_g_ratio) << ',' << fmt(r.rates.g_rate) << ',' << fmt(r.audit.max_x_ratio) << ','
        << fmt(r.rates.x_rate) << ',' << r.audit.audited << ',' << (r.audit.sound ? "true" : "false") << ','
        << r.note << '\n';
    if (!r.note.empty()) continue;
    worst = std::max(worst, r.audit.worst_excess);
    if (!r.audit.sound) ++unsound;
  }
  nrows = rows.size();
  checks.push_back({"worst_ratio_excess", worst, p.tol, worst <= p.tol});
  checks.push_back({"unsound_runs", static_cast<double>(unsound), 0.0, unsound == 0});
  return csv.str();
}

// ------------------------------------------------------------------ ipm

std::string run_ipm(const ExperimentSpec& spec, const fs::path& out_dir, std::vector<Check>& checks,
                    std::vector<fs::path>& artifacts, std::size_t& nrows) {
  const auto& p = spec.ipm;
  struct RunOut {
    IpmTrace trace;
    IpmAudit audit;
  };
  auto runs = parallel_map<RunOut>(p.seeds.size(), spec.threads, [&](std::size_t i) {
    IpmConfig cfg = p.config;
    cfg.seed = p.seeds[i];
    RunOut o;
    o.trace = ipm_run(cfg);
    o.audit = audit_ipm(o.trace, cfg);
    return o;
  });

  std::ostringstream csv;
  csv << "seed,status,steps,ceiling,max_proximity,final_gap,max_direction_error,n_samples,proximity_ok,within_ceiling,"
         "gap_ok,conversion_ok,ok\n";
  int pass = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& r = runs[i];
    double max_err = 0.0;
    std::size_t ns = 0;
    for (const auto& it : r.trace.iterations) {
      if (it.direction_error) max_err = std::max(max_err, *it.direction_error);
      if (it.n_samples) ns = *it.n_samples;
    }
    const auto b = [](bool v) { return v ? "true" : "false"; };
    csv << p.seeds[i] << ',' << to_string(r.trace.status) << ',' << r.trace.steps() << ',' << r.trace.ceiling << ','
        << fmt(r.audit.max_proximity) << ',' << fmt(r.trace.final().objective_gap) << ',' << fmt(max_err) << ','
        << ns << ',' << b(r.audit.proximity_ok) << ',' << b(r.audit.within_ceiling) << ',' << b(r.audit.gap_ok) << ','
        << b(r.audit.conversion_ok) << ',' << b(r.audit.ok()) << '\n';
    if (r.audit.ok()) ++pass;
    const fs::path trace_file = out_dir / (spec.name + ".seed" + std::to_string(p.seeds[i]) + ".jsonl");
    write_atomic(trace_file, ipm_trace_to_jsonl(r.trace));
    artifacts.push_back(trace_file);
  }
  nrows = runs.size();
  const double frac = runs.empty() ? 0.0 : static_cast<double>(pass) / static_cast<double>(runs.size());
  checks.push_back({"pass_fraction", frac, p.min_pass_fraction, frac >= p.min_pass_fraction});
  return csv.str();
}

// ------------------------------------------------------------------ sampler

std::string run_sampler(const ExperimentSpec& spec, std::vector<Check>& checks, std::size_t& nrows) {
  const auto& p = spec.sampler;
  if (p.batches < 2 || p.count < 2 * p.batches) throw std::invalid_argument("sampler_check: need count ≥ 2·batches ≥ 4");
  std::ostringstream csv;
  csv << "theta,coord,quantity,estimate,exact,stderr,z,within\n";
  double worst = 0.0;
  nrows = 0;
  const std::size_t n = p.box.lo.size();
  Vector center(n);
  for (std::size_t i = 0; i < n; ++i) center[i] = 0.5 * (p.box.lo[i] + p.box.hi[i]);
  for (std::size_t t = 0; t < p.thetas.size(); ++t) {
    const Vector& th = p.thetas[t];
    const BoltzmannModel model{p.box, th};
    const auto samples = hit_and_run(model, center, p.count, spec.seed + t, p.chain);
    const LogPartition lp = log_partition_box(p.box, th);
    const std::size_t per = p.count / p.batches;
    for (std::size_t c = 0; c < n; ++c) {
      double mean = 0.0;
      for (const auto& s : samples) mean += s[c];
      mean /= static_cast<double>(samples.size());
      double var = 0.0;
      for (const auto& s : samples) var += (s[c] - mean) * (s[c] - mean);
      var /= static_cast<double>(samples.size());
      // Batch means give the Monte-Carlo standard error under autocorrelation.
      Vector bm(p.batches), bv(p.batches);
      for (std::size_t b = 0; b < p.batches; ++b) {
        double m = 0.0, v = 0.0;
        for (std::size_t k = b * per; k < (b + 1) * per; ++k) m += samples[k][c];
        m /= static_cast<double>(per);
        for (std::size_t k = b * per; k < (b + 1) * per; ++k) v += (samples[k][c] - mean) * (samples[k][c] - mean);
        bm[b] = m;
        bv[b] = v / static_cast<double>(per);
      }
      auto stderr_of = [&](const Vector& xs, double centre) {
        double s = 0.0;
        for (double x : xs) s += (x - centre) * (x - centre);
        return std::sqrt(s / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
      };
      const double exact_mean = -lp.grad[c];
      const double exact_var = lp.hess(c, c);
      const double se_m = stderr_of(bm, mean), se_v = stderr_of(bv, var);
      const double zm = std::fabs(mean - exact_mean) / se_m, zv = std::fabs(var - exact_var) / se_v;
      worst = std::max({worst, zm, zv});
      csv << join(th) << ',' << c << ",mean," << fmt(mean) << ',' << fmt(exact_mean) << ',' << fmt(se_m) << ','
          << fmt(zm) << ',' << (zm <= p.sigmas ? "true" : "false") << '\n';
      csv << join(th) << ',' << c << ",variance," << fmt(var) << ',' << fmt(exact_var) << ',' << fmt(se_v) << ','
          << fmt(zv) << ',' << (zv <= p.sigmas ? "true" : "false") << '\n';
      nrows += 2;
    }
  }
  checks.push_back({"max_z", worst, p.sigmas, worst <= p.sigmas});
  return csv.str();
}

}  // namespace

// ------------------------------------------------------------------ public

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::PepSweep: return "pep_sweep";
    case ExperimentKind::CertIdentity: return "cert_identity";
    case ExperimentKind::DescentSweep: return "descent_sweep";
    case ExperimentKind::IpmRun: return "ipm_run";
    case ExperimentKind::SamplerCheck: return "sampler_check";
  }
  return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
  if (s == "pep_sweep" || s == "pep") return ExperimentKind::PepSweep;
  if (s == "cert_identity" || s == "cert") return ExperimentKind::CertIdentity;
  if (s == "descent_sweep" || s == "descent") return ExperimentKind::DescentSweep;
  if (s == "ipm_run" || s == "ipm") return ExperimentKind::IpmRun;
  if (s == "sampler_check" || s == "sample") return ExperimentKind::SamplerCheck;
  throw std::invalid_argument("unknown experiment kind '" + s + "'");
}

ExperimentSpec parse_experiment_spec(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("spec is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("spec must be a JSON object");
  if (!j.contains("kind")) throw std::invalid_argument("spec key 'kind' is required");

  ExperimentSpec s;
  try {
    s.kind = experiment_kind_from_string(j.at("kind").get<std::string>());
    s.name = get_or<std::string>(j, "name", to_string(s.kind));
    s.seed = get_or<std::uint64_t>(j, "seed", 0);
    s.threads = get_or<unsigned>(j, "threads", 1);

    switch (s.kind) {
      case ExperimentKind::PepSweep: {
        auto& p = s.pep;
        const std::string step = get_or<std::string>(j, "step", "els");
        if (step == "els") p.step = StepRule::Kind::ExactLineSearch;
        else if (step == "fixed") p.step = StepRule::Kind::FixedStep;
        else throw std::invalid_argument("spec key 'step': expected \"els\" or \"fixed\"");
        if (j.contains("variants")) {
          p.variants.clear();
          for (const auto& v : j.at("variants")) p.variants.push_back(variant_from_string(v.get<std::string>()));
        }
        p.kappas = get_or(j, "kappas", p.kappas);
        if (j.contains("eps")) p.epss = parse_eps_list(j.at("eps"));
        p.gamma_fractions = get_or(j, "gamma_fractions", p.gamma_fractions);
        p.L = get_or(j, "L", p.L);
        p.R = get_or(j, "R", p.R);
        p.tol = get_or(j, "tol", p.tol);
        break;
      }
      case ExperimentKind::CertIdentity: {
        auto& p = s.cert;
        if (j.contains("families")) {
          p.families.clear();
          for (const auto& f : j.at("families")) p.families.push_back(cert_family_from_string(f.get<std::string>()));
        }
        p.draws = get_or(j, "draws", p.draws);
        p.points = get_or(j, "points", p.points);
        p.tol = get_or(j, "tol", p.tol);
        if (j.contains("mutation")) {
          const auto& m = j.at("mutation");
          p.mutation = CertMutation{cert_family_from_string(m.at("family").get<std::string>()),
                                    m.at("multiplier").get<std::string>(), get_or(m, "rel", 1e-3)};
        }
        break;
      }
      case ExperimentKind::DescentSweep: {
        auto& p = s.descent;
        p.kappas = get_or(j, "kappas", p.kappas);
        p.epss = get_or(j, "eps", p.epss);
        p.steps = get_or(j, "steps", p.steps);
        if (j.contains("modes")) {
          p.modes.clear();
          for (const auto& m : j.at("modes")) p.modes.push_back(direction_mode_from_string(m.get<std::string>()));
        }
        p.dim = get_or(j, "dim", p.dim);
        p.starts = get_or(j, "starts", p.starts);
        p.max_iter = get_or(j, "max_iter", p.max_iter);
        p.tol = get_or(j, "tol", p.tol);
        break;
      }
      case ExperimentKind::IpmRun: {
        auto& p = s.ipm;
        auto& c = p.config;
        if (!j.contains("domain")) throw std::invalid_argument("spec key 'domain' is required for ipm_run");
        const ConvexBody body = parse_domain(j.at("domain"));
        if (!std::holds_alternative<Box>(body)) throw std::invalid_argument("ipm_run: only box domains have exact oracles");
        c.box = std::get<Box>(body);
        c.theta_hat = j.at("theta_hat").get<Vector>();
        c.delta = get_or(j, "delta", c.delta);
        c.eps_hat = get_or(j, "eps_hat", c.eps_hat);
        c.eps_prime = get_or(j, "eps_prime", c.eps_prime);
        c.eps_bar = get_or(j, "eps_bar", c.eps_bar);
        c.eta0 = get_or(j, "eta0", c.eta0);
        if (j.contains("vartheta")) c.vartheta = j.at("vartheta").get<double>();
        if (j.contains("x0")) c.x0 = j.at("x0").get<Vector>();
        const std::string mode = get_or<std::string>(j, "mode", "exact");
        if (mode == "exact") c.mode = IpmConfig::OracleMode::Exact;
        else if (mode == "sampled") c.mode = IpmConfig::OracleMode::Sampled;
        else throw std::invalid_argument("spec key 'mode': expected \"exact\" or \"sampled\"");
        c.n_samples = get_or(j, "n_samples", c.n_samples);
        c.autotune_eps = get_or(j, "autotune_eps", c.autotune_eps);
        c.autotune_max = get_or(j, "autotune_max", c.autotune_max);
        c.chain = parse_chain(j, c.chain);
        p.seeds = get_or(j, "seeds", std::vector<std::uint64_t>{s.seed});
        p.min_pass_fraction = get_or(j, "min_pass_fraction", p.min_pass_fraction);
        c.validate();
        break;
      }
      case ExperimentKind::SamplerCheck: {
        auto& p = s.sampler;
        if (j.contains("domain")) {
          const ConvexBody body = parse_domain(j.at("domain"));
          if (!std::holds_alternative<Box>(body))
            throw std::invalid_argument("sampler_check: exact moments need a box domain");
          p.box = std::get<Box>(body);
        }
        p.thetas = get_or(j, "thetas", p.thetas);
        p.count = get_or(j, "count", p.count);
        p.batches = get_or(j, "batches", p.batches);
        p.sigmas = get_or(j, "sigmas", p.sigmas);
        p.chain = parse_chain(j, p.chain);
        for (const auto& t : p.thetas)
          if (t.size() != p.box.lo.size()) throw std::invalid_argument("sampler_check: theta has wrong size");
        break;
      }
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("spec: ") + e.what());
  }
  return s;
}

ExperimentSpec load_experiment_spec(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::invalid_argument("cannot read spec file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_spec(ss.str());
}

bool ExperimentResult::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  ExperimentResult res;
  std::string csv;
  switch (spec.kind) {
    case ExperimentKind::PepSweep: csv = run_pep(spec, res.checks, res.rows); break;
    case ExperimentKind::CertIdentity: csv = run_cert(spec, res.checks, res.rows); break;
    case ExperimentKind::DescentSweep: csv = run_descent(spec, res.checks, res.rows); break;
    case ExperimentKind::IpmRun: csv = run_ipm(spec, out_dir, res.checks, res.artifacts, res.rows); break;
    case ExperimentKind::SamplerCheck: csv = run_sampler(spec, res.checks, res.rows); break;
  }
  const fs::path csv_file = out_dir / (spec.name + ".csv");
  write_atomic(csv_file, csv);
  res.artifacts.insert(res.artifacts.begin(), csv_file);

  json checks = json::array();
  for (const auto& c : res.checks)
    checks.push_back({{"name", c.name}, {"value", c.value}, {"threshold", c.threshold}, {"pass", c.pass}});
  json files = json::array();
  for (const auto& a : res.artifacts) files.push_back(a.filename().string());
  const json summary = {{"kind", to_string(spec.kind)}, {"name", spec.name}, {"seed", spec.seed},
                        {"rows", res.rows},             {"checks", checks}, {"artifacts", files}};
  const fs::path summary_file = out_dir / (spec.name + ".summary.json");
  write_atomic(summary_file, summary.dump(2) + "\n");
  res.artifacts.push_back(summary_file);
  return res;
}

ReportOutcome report(const fs::path& dir) {
  ReportOutcome out;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    out.text = "no artifact directory at " + dir.string() + "\n";
    return out;
  }
  std::vector<fs::path> summaries;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && name.size() > 13 && name.ends_with(".summary.json")) summaries.push_back(e.path());
  }
  std::sort(summaries.begin(), summaries.end());
  if (summaries.empty()) {
    out.text = "no experiment summaries in " + dir.string() + "\n";
    return out;
  }
  std::ostringstream os;
  bool all = true;
  for (const auto& path : summaries) {
    std::ifstream in(path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      out.text = "unreadable summary " + path.string() + ": " + e.what() + "\n";
      out.exit_code = 2;
      return out;
    }
    const std::string exp = j.value("name", path.stem().string());
    for (const auto& missing : j.value("artifacts", json::array())) {
      if (!fs::exists(dir / missing.get<std::string>())) {
        out.text = "missing artifact " + missing.get<std::string>() + " for " + exp + "\n";
        out.exit_code = 2;
        return out;
      }
    }
    for (const auto& c : j.at("checks")) {
      const bool pass = c.at("pass").get<bool>();
      all = all && pass;
      os << (pass ? "PASS " : "FAIL ") << exp << '/' << c.at("name").get<std::string>() << ": "
         << fmt(c.at("value").get<double>()) << " (threshold " << fmt(c.at("threshold").get<double>()) << ")\n";
    }
  }
  os << (all ? "all checks passed" : "some checks failed") << '\n';
  out.text = os.str();
  out.exit_code = all ? 0 : 1;
  return out;
}

}  // namespace pepkit
