#include "pepkit/pep.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <nlohmann/json.hpp>
#include <set>
#include <stdexcept>

namespace pepkit {

namespace {

using json = nlohmann::json;

constexpr double kKappaGuard = 1e-8;

/// Linear combination of the Gram labels (x_* = g_* = 0 is the zero vector).
using VecExpr = Vector;

class FormBuilder {
 public:
  FormBuilder(std::size_t dim, std::size_t n_scalars) : dim_(dim), ns_(n_scalars) {}

  VecExpr zero() const { return VecExpr(dim_, 0.0); }
  VecExpr unit(std::size_t k) const {
    VecExpr v = zero();
    v[k] = 1.0;
    return v;
  }

  /// ⟨a,b⟩ as a form.
  AffineForm ip(const VecExpr& a, const VecExpr& b) const {
    AffineForm f = blank();
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = i; j < dim_; ++j) {
        const double c = 0.5 * (a[i] * b[j] + a[j] * b[i]);
        if (c != 0.0) f.gram.set(i, j, c);
      }
    return f;
  }
  AffineForm sq(const VecExpr& a) const { return ip(a, a); }
  AffineForm scalar(std::size_t k, double c = 1.0) const {
    AffineForm f = blank();
    f.scalars[k] = c;
    return f;
  }
  AffineForm constant(double c) const {
    AffineForm f = blank();
    f.constant = c;
    return f;
  }
  AffineForm blank() const { return AffineForm(dim_, ns_); }

 private:
  std::size_t dim_;
  std::size_t ns_;
};

/// Vectors and scalars of one PEP, indexed by point.
struct PointModel {
  VecExpr x_star, g_star;
  std::map<PointIndex, VecExpr> x, g;
  std::map<PointIndex, std::optional<std::size_t>> f;  // scalar index, nullopt for f_* = 0
};

AffineForm f_form(const FormBuilder& b, const PointModel& m, PointIndex i) {
  const auto& idx = m.f.at(i);
  return idx ? b.scalar(*idx) : b.blank();
}

/// Symmetric gradient form: ⟨gi−gj, xi−xj⟩ − (1/(1−κ))(‖gi−gj‖²/L + μ‖xi−xj‖² − 2κ⟨gi−gj, xi−xj⟩) ≥ 0.
AffineForm symmetric_interp(const FormBuilder& b, const PointModel& m, PointIndex i, PointIndex j, double mu,
                            double L) {
  const double kappa = mu / L;
  const VecExpr dg = sub(m.g.at(i), m.g.at(j));
  const VecExpr dx = sub(m.x.at(i), m.x.at(j));
  const AffineForm cross = b.ip(dg, dx);
  const AffineForm inner = (1.0 / L) * b.sq(dg) + mu * b.sq(dx) - (2.0 * kappa) * cross;
  return cross - (1.0 / (1.0 - kappa)) * inner;
}

/// Ordered form: fi − fj − ⟨gj, xi−xj⟩ − (1/(2(1−κ)))(‖gi−gj‖²/L + μ‖xi−xj‖² − 2κ⟨gj−gi, xj−xi⟩) ≥ 0.
AffineForm ordered_interp(const FormBuilder& b, const PointModel& m, PointIndex i, PointIndex j, double mu,
                          double L) {
  const double kappa = mu / L;
  const VecExpr dg = sub(m.g.at(i), m.g.at(j));
  const VecExpr dx = sub(m.x.at(i), m.x.at(j));
  const AffineForm lhs = f_form(b, m, i) - f_form(b, m, j) - b.ip(m.g.at(j), dx);
  const AffineForm inner = (1.0 / L) * b.sq(dg) + mu * b.sq(dx) - (2.0 * kappa) * b.ip(scaled(dg, -1.0), scaled(dx, -1.0));
  return lhs - (1.0 / (2.0 * (1.0 - kappa))) * inner;
}

std::string pair_id(PointIndex i, PointIndex j) { return "interp(" + point_name(i) + "," + point_name(j) + ")"; }

void add_interpolation(GramSdpProblem& p, const FormBuilder& b, const PointModel& m, const PepInstance& inst) {
  const std::vector<PointIndex> pts{kStar, 0, 1};
  if (inst.resolved_form() == InterpolationForm::Ordered) {
    for (auto [i, j] : enumerate_interpolation_pairs(pts))
      p.inequalities.push_back({pair_id(i, j), ordered_interp(b, m, i, j, inst.mu, inst.L)});
  } else {
    for (auto [i, j] : enumerate_unordered_pairs(pts))
      p.inequalities.push_back({pair_id(i, j), symmetric_interp(b, m, i, j, inst.mu, inst.L)});
  }
}

void add_budget_and_objective(GramSdpProblem& p, const FormBuilder& b, const PointModel& m, const PepInstance& inst) {
  switch (inst.variant) {
    case Variant::FunctionValue:
      p.objective = f_form(b, m, 1);
      p.inequalities.push_back({"budget", b.constant(inst.R) - f_form(b, m, 0)});
      break;
    case Variant::GradientNorm:
      p.objective = b.sq(m.g.at(1));
      p.inequalities.push_back({"budget", b.constant(inst.R) - b.sq(m.g.at(0))});
      break;
    case Variant::Distance:
      p.objective = b.sq(m.x.at(1));
      p.inequalities.push_back({"budget", b.constant(inst.R) - b.sq(m.x.at(0))});
      break;
  }
}

std::vector<std::string> scalar_names(const PepInstance& inst) {
  if (inst.resolved_form() == InterpolationForm::Ordered) return {"f0", "f1"};
  return {};
}

PointModel point_model(const FormBuilder& b, const PepInstance& inst, VecExpr x0, VecExpr x1, VecExpr g0,
                       VecExpr g1) {
  PointModel m;
  m.x = {{kStar, b.zero()}, {0, std::move(x0)}, {1, std::move(x1)}};
  m.g = {{kStar, b.zero()}, {0, std::move(g0)}, {1, std::move(g1)}};
  const bool scalars = inst.resolved_form() == InterpolationForm::Ordered;
  m.f = {{kStar, std::nullopt},
         {0, scalars ? std::optional<std::size_t>(0) : std::nullopt},
         {1, scalars ? std::optional<std::size_t>(1) : std::nullopt}};
  return m;
}

// JSON helpers.

json form_to_json(const AffineForm& f, const GramSdpProblem& p) {
  json terms = json::array();
  for (std::size_t i = 0; i < f.gram.dim(); ++i)
    for (std::size_t j = i; j < f.gram.dim(); ++j) {
      const double c = f.gram(i, j);
      if (c == 0.0) continue;
      // Coefficient on the Gram entry G_ij counted once (off-diagonal doubles).
      terms.push_back({{"i", p.labels[i]}, {"j", p.labels[j]}, {"coef", i == j ? c : 2.0 * c}});
    }
  json sc = json::object();
  for (std::size_t k = 0; k < f.scalars.size(); ++k)
    if (f.scalars[k] != 0.0) sc[p.scalars[k]] = f.scalars[k];
  return {{"gram", terms}, {"scalars", sc}, {"constant", f.constant}};
}

AffineForm form_from_json(const json& j, const GramSdpProblem& p) {
  auto label_index = [&](const std::string& name) {
    auto it = std::find(p.labels.begin(), p.labels.end(), name);
    if (it == p.labels.end()) throw std::invalid_argument("unknown label '" + name + "'");
    return static_cast<std::size_t>(it - p.labels.begin());
  };
  AffineForm f(p.gram_dim(), p.n_scalars());
  for (const auto& t : j.at("gram")) {
    const std::size_t a = label_index(t.at("i").get<std::string>());
    const std::size_t b = label_index(t.at("j").get<std::string>());
    const double c = t.at("coef").get<double>();
    f.gram.add(std::min(a, b), std::max(a, b), a == b ? c : 0.5 * c);
  }
  if (j.contains("scalars"))
    for (const auto& [name, val] : j.at("scalars").items()) {
      auto it = std::find(p.scalars.begin(), p.scalars.end(), name);
      if (it == p.scalars.end()) throw std::invalid_argument("unknown scalar '" + name + "'");
      f.scalars[static_cast<std::size_t>(it - p.scalars.begin())] = val.get<double>();
    }
  f.constant = j.value("constant", 0.0);
  return f;
}

}  // namespace

InterpolationForm PepInstance::resolved_form() const {
  if (form != InterpolationForm::Default) return form;
  return variant == Variant::FunctionValue ? InterpolationForm::Ordered : InterpolationForm::Symmetric;
}

void PepInstance::validate() const {
  if (!(mu > 0.0)) throw std::invalid_argument("PepInstance: mu must be positive");
  if (!(L >= mu)) throw std::invalid_argument("PepInstance: need L >= mu");
  if (kappa() >= 1.0 - kKappaGuard)
    throw std::invalid_argument("PepInstance: kappa = 1 makes the interpolation inequalities singular");
  if (!(eps >= 0.0 && eps < 1.0)) throw std::invalid_argument("PepInstance: eps must lie in [0, 1)");
  if (!(R > 0.0)) throw std::invalid_argument("PepInstance: R must be positive");
  if (step.kind == StepRule::Kind::FixedStep && !(step.gamma >= 0.0))
    throw std::invalid_argument("PepInstance: step length gamma must be nonnegative");
}

double AffineForm::eval(const SymMatrix& g, std::span<const double> s) const {
  if (g.dim() != gram.dim() || s.size() != scalars.size()) throw DimensionError("AffineForm::eval: shape mismatch");
  double v = constant + dot(scalars, s);
  for (std::size_t i = 0; i < g.dim(); ++i)
    for (std::size_t j = 0; j < g.dim(); ++j) v += gram(i, j) * g(i, j);
  return v;
}

bool AffineForm::is_zero(double tol) const {
  if (std::abs(constant) > tol) return false;
  for (double c : scalars)
    if (std::abs(c) > tol) return false;
  return gram.matrix().max_abs() <= tol;
}

bool AffineForm::all_finite() const {
  return std::isfinite(constant) && gram.all_finite() &&
         std::all_of(scalars.begin(), scalars.end(), [](double v) { return std::isfinite(v); });
}

AffineForm& AffineForm::operator+=(const AffineForm& o) {
  if (o.gram.dim() != gram.dim() || o.scalars.size() != scalars.size())
    throw DimensionError("AffineForm +=: shape mismatch");
  gram += o.gram;
  axpy(1.0, o.scalars, scalars);
  constant += o.constant;
  return *this;
}

AffineForm& AffineForm::operator*=(double a) {
  gram *= a;
  for (double& s : scalars) s *= a;
  constant *= a;
  return *this;
}

AffineForm operator+(AffineForm a, const AffineForm& b) { return a += b; }
AffineForm operator-(AffineForm a, const AffineForm& b) { return a += -1.0 * b; }
AffineForm operator*(double a, AffineForm f) { return f *= a; }

SymMatrix PsdBlock::eval(const SymMatrix& g, std::span<const double> s) const {
  SymMatrix m(size);
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t j = i; j < size; ++j) m.set(i, j, at(i, j).eval(g, s));
  return m;
}

void GramSdpProblem::validate() const {
  const std::size_t n = gram_dim();
  if (n == 0) throw std::invalid_argument("GramSdpProblem: no labels");
  std::set<std::string> names(labels.begin(), labels.end());
  if (names.size() != labels.size()) throw std::invalid_argument("GramSdpProblem: duplicate labels");
  auto check = [&](const AffineForm& f, const std::string& where) {
    if (f.gram.dim() != n || f.scalars.size() != n_scalars())
      throw std::invalid_argument("GramSdpProblem: form '" + where + "' references undeclared variables");
    if (!f.all_finite()) throw std::invalid_argument("GramSdpProblem: form '" + where + "' is not finite");
  };
  check(objective, "objective");
  std::set<std::string> ids;
  auto unique_id = [&](const std::string& id) {
    if (!ids.insert(id).second) throw std::invalid_argument("GramSdpProblem: duplicate constraint id '" + id + "'");
  };
  for (const auto& c : equalities) {
    unique_id(c.id);
    check(c.expr, c.id);
  }
  for (const auto& c : inequalities) {
    unique_id(c.id);
    check(c.expr, c.id);
  }
  for (const auto& blk : psd_blocks) {
    unique_id(blk.id);
    if (blk.size == 0 || blk.entries.size() != blk.size * blk.size)
      throw std::invalid_argument("GramSdpProblem: PSD block '" + blk.id + "' has wrong entry count");
    for (std::size_t i = 0; i < blk.size; ++i)
      for (std::size_t j = 0; j < blk.size; ++j) {
        check(blk.at(i, j), blk.id);
        const AffineForm diff = blk.at(i, j) - blk.at(j, i);
        if (!diff.is_zero(1e-14)) throw std::invalid_argument("GramSdpProblem: PSD block '" + blk.id + "' asymmetric");
      }
  }
}

const Constraint* GramSdpProblem::find_inequality(const std::string& id) const {
  for (const auto& c : inequalities)
    if (c.id == id) return &c;
  return nullptr;
}

const Constraint* GramSdpProblem::find_equality(const std::string& id) const {
  for (const auto& c : equalities)
    if (c.id == id) return &c;
  return nullptr;
}

std::string point_name(PointIndex i) { return i == kStar ? "*" : std::to_string(i); }

std::vector<std::pair<PointIndex, PointIndex>> enumerate_interpolation_pairs(const std::vector<PointIndex>& points) {
  // Grouped by unordered pair, both orientations adjacent: (*,0),(0,*),(*,1),(1,*),(0,1),(1,0).
  std::vector<std::pair<PointIndex, PointIndex>> out;
  for (std::size_t a = 0; a < points.size(); ++a)
    for (std::size_t b = a + 1; b < points.size(); ++b) {
      out.emplace_back(points[a], points[b]);
      out.emplace_back(points[b], points[a]);
    }
  return out;
}

std::vector<std::pair<PointIndex, PointIndex>> enumerate_unordered_pairs(const std::vector<PointIndex>& points) {
  std::vector<std::pair<PointIndex, PointIndex>> out;
  for (std::size_t a = 0; a < points.size(); ++a)
    for (std::size_t b = a + 1; b < points.size(); ++b) out.emplace_back(points[a], points[b]);
  return out;
}

GramSdpProblem build_els(const PepInstance& inst) {
  inst.validate();
  if (inst.step.kind != StepRule::Kind::ExactLineSearch)
    throw std::invalid_argument("build_els: instance uses a fixed step");

  GramSdpProblem p;
  p.labels = {"x0", "x1", "g0", "g1"};
  p.scalars = scalar_names(inst);
  const FormBuilder b(4, p.scalars.size());
  const PointModel m = point_model(b, inst, b.unit(0), b.unit(1), b.unit(2), b.unit(3));

  add_interpolation(p, b, m, inst);
  p.equalities.push_back({"linesearch", b.ip(sub(m.x.at(1), m.x.at(0)), m.g.at(1))});

  PsdBlock cone{"cone", 2, {}};
  const AffineForm off = b.ip(m.g.at(0), m.g.at(1));
  cone.entries = {inst.eps * b.sq(m.g.at(0)), off, off, inst.eps * b.sq(m.g.at(1))};
  p.psd_blocks.push_back(std::move(cone));

  add_budget_and_objective(p, b, m, inst);
  p.validate();
  return p;
}

GramSdpProblem build_fixed(const PepInstance& inst) {
  inst.validate();
  if (inst.step.kind != StepRule::Kind::FixedStep) throw std::invalid_argument("build_fixed: instance uses line search");

  GramSdpProblem p;
  p.labels = {"x0", "g0", "g1", "d"};
  p.scalars = scalar_names(inst);
  const FormBuilder b(4, p.scalars.size());
  const VecExpr x0 = b.unit(0);
  const VecExpr d = b.unit(3);
  VecExpr x1 = x0;
  axpy(-inst.step.gamma, d, x1);
  const PointModel m = point_model(b, inst, x0, x1, b.unit(1), b.unit(2));

  add_interpolation(p, b, m, inst);
  const VecExpr g0 = m.g.at(0);
  p.inequalities.push_back({"inexact", (inst.eps * inst.eps) * b.sq(g0) - b.sq(sub(d, g0))});
  add_budget_and_objective(p, b, m, inst);
  p.validate();
  return p;
}

GramSdpProblem build(const PepInstance& inst) {
  return inst.step.kind == StepRule::Kind::ExactLineSearch ? build_els(inst) : build_fixed(inst);
}

GramSdpProblem permute_labels(const GramSdpProblem& p, const std::vector<std::size_t>& perm) {
  const std::size_t n = p.gram_dim();
  if (perm.size() != n) throw DimensionError("permute_labels: permutation has wrong length");
  std::vector<bool> seen(n, false);
  for (std::size_t k : perm) {
    if (k >= n || seen[k]) throw std::invalid_argument("permute_labels: not a permutation");
    seen[k] = true;
  }
  auto remap = [&](const AffineForm& f) {
    AffineForm g = f;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) g.gram.set(perm[i], perm[j], f.gram(i, j));
    return g;
  };
  GramSdpProblem q = p;
  for (std::size_t k = 0; k < n; ++k) q.labels[perm[k]] = p.labels[k];
  q.objective = remap(p.objective);
  for (auto& c : q.equalities) c.expr = remap(c.expr);
  for (auto& c : q.inequalities) c.expr = remap(c.expr);
  for (auto& blk : q.psd_blocks)
    for (auto& e : blk.entries) e = remap(e);
  return q;
}

std::string to_json(const GramSdpProblem& p, int indent) {
  json j;
  j["labels"] = p.labels;
  j["scalars"] = p.scalars;
  j["sense"] = "maximize";
  j["objective"] = form_to_json(p.objective, p);
  auto list = [&](const std::vector<Constraint>& cs) {
    json arr = json::array();
    for (const auto& c : cs) arr.push_back({{"id", c.id}, {"expr", form_to_json(c.expr, p)}});
    return arr;
  };
  j["equalities"] = list(p.equalities);
  j["inequalities"] = list(p.inequalities);
  json blocks = json::array();
  for (const auto& blk : p.psd_blocks) {
    json rows = json::array();
    for (std::size_t r = 0; r < blk.size; ++r) {
      json row = json::array();
      for (std::size_t c = 0; c < blk.size; ++c) row.push_back(form_to_json(blk.at(r, c), p));
      rows.push_back(row);
    }
    blocks.push_back({{"id", blk.id}, {"size", blk.size}, {"entries", rows}});
  }
  j["psd_blocks"] = blocks;
  j["gram_psd"] = p.gram_psd;
  return j.dump(indent);
}

GramSdpProblem problem_from_json(const std::string& text) {
  const json j = json::parse(text);
  GramSdpProblem p;
  p.labels = j.at("labels").get<std::vector<std::string>>();
  p.scalars = j.value("scalars", std::vector<std::string>{});
  if (j.value("sense", std::string("maximize")) != "maximize")
    throw std::invalid_argument("problem_from_json: only maximization problems are supported");
  p.objective = form_from_json(j.at("objective"), p);
  auto read = [&](const char* key) {
    std::vector<Constraint> cs;
    if (j.contains(key))
      for (const auto& c : j.at(key)) cs.push_back({c.at("id").get<std::string>(), form_from_json(c.at("expr"), p)});
    return cs;
  };
  p.equalities = read("equalities");
  p.inequalities = read("inequalities");
  if (j.contains("psd_blocks"))
    for (const auto& bj : j.at("psd_blocks")) {
      PsdBlock blk;
      blk.id = bj.at("id").get<std::string>();
      blk.size = bj.at("size").get<std::size_t>();
      for (const auto& row : bj.at("entries"))
        for (const auto& e : row) blk.entries.push_back(form_from_json(e, p));
      p.psd_blocks.push_back(std::move(blk));
    }
  p.gram_psd = j.value("gram_psd", true);
  p.validate();
  return p;
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::FunctionValue:
      return "function_value";
    case Variant::GradientNorm:
      return "gradient_norm";
    case Variant::Distance:
      return "distance";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "function_value" || s == "f") return Variant::FunctionValue;
  if (s == "gradient_norm" || s == "g") return Variant::GradientNorm;
  if (s == "distance" || s == "x") return Variant::Distance;
  throw std::invalid_argument("unknown variant '" + s + "'");
}

}  // namespace pepkit
