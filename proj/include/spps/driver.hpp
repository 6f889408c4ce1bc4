#pragma once

// Config-driven solves: parsing, the root pipeline, and output writers.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "json.hpp"
#include "spps/error.hpp"
#include "spps/expr.hpp"
#include "spps/grid.hpp"
#include "spps/pencil.hpp"
#include "spps/problems.hpp"
#include "spps/roots.hpp"
#include "spps/series.hpp"
#include "spps/zakharov_shabat.hpp"

namespace spps::driver {

using Json = nlohmann::ordered_json;

class ConfigError : public InputError {
 public:
  explicit ConfigError(const std::string& what) : InputError("cli", what) {}
};

enum class ProblemKind { string, pencil, zakharov_shabat, dirac, series };

inline const char* to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::string: return "string";
    case ProblemKind::pencil: return "pencil";
    case ProblemKind::zakharov_shabat: return "zakharov_shabat";
    case ProblemKind::dirac: return "dirac";
    case ProblemKind::series: return "series";
  }
  return "?";
}

struct SurfaceConfig {
  Rectangle region{-1, 1, -1, 1};
  std::size_t nx = 201, ny = 201;
  double cap = 50;
};

struct SweepConfig {
  std::string parameter;
  std::vector<double> values;
};

struct SolveConfig {
  ProblemKind kind = ProblemKind::string;
  double a = 0, b = 1;
  std::size_t n_nodes = 100001;
  std::size_t M = 100;

  // string
  std::string damping = "1", density = "1";
  // pencil
  std::string p = "1", q = "0";
  std::vector<std::string> r;
  std::optional<std::string> u0, du0;
  double x0 = 0;
  BoundaryCondition left{1, 0}, right{1, 0};
  // dirac
  std::string v = "1";
  Complex energy = 0;
  // zakharov_shabat
  PotentialKind potential = KlausShaw{};
  std::optional<SweepConfig> sweep;
  // series
  std::vector<Complex> coefficients;
  Complex center = 0;

  std::optional<Rectangle> region;
  RootMethod method = RootMethod::poly_roots;
  double tol = 1e-10;
  int samples = 4000;
  std::vector<Complex> shifts;
  std::optional<double> retain_radius;
  double residual_threshold = 1e-8;  // on |Phi_M| / sum |a_k| |lambda - c|^k
  bool certify = false;

  std::optional<SurfaceConfig> surface;
  std::string output_path;
  std::string format = "csv";
};

// ---------------------------------------------------------------------------
// config parsing

namespace detail {

inline void allow_keys(const Json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const bool ok = std::any_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; });
    if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

inline double get_real(const Json& j, const std::string& what) {
  if (!j.is_number()) throw ConfigError(what + " must be a number");
  return j.get<double>();
}

inline std::size_t get_size(const Json& j, const std::string& what) {
  if (!j.is_number_integer() || j.get<long long>() < 0) throw ConfigError(what + " must be a non-negative integer");
  return j.get<std::size_t>();
}

inline std::string get_string(const Json& j, const std::string& what) {
  if (!j.is_string()) throw ConfigError(what + " must be a string");
  return j.get<std::string>();
}

/// A number, a [re, im] pair, or a constant expression such as "-1-4*pi*i".
inline Complex get_complex(const Json& j, const std::string& what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return {j[0].get<double>(), j[1].get<double>()};
  if (j.is_string()) {
    try {
      return expr::evaluate_constant(j.get<std::string>());
    } catch (const InputError& e) {
      throw ConfigError(what + ": " + e.what());
    }
  }
  throw ConfigError(what + " must be a number, [re, im] or a constant expression");
}

inline Json complex_json(Complex z) { return Json::array({z.real(), z.imag()}); }

inline Rectangle get_rect(const Json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 4) throw ConfigError(what + " must be [re_min, re_max, im_min, im_max]");
  try {
    return Rectangle(get_real(j[0], what), get_real(j[1], what), get_real(j[2], what), get_real(j[3], what));
  } catch (const ConfigError&) {
    throw;
  } catch (const InputError& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

inline Json rect_json(const Rectangle& r) { return Json::array({r.re_min, r.re_max, r.im_min, r.im_max}); }

inline void check_expression(const std::string& src, const std::string& what) {
  try {
    (void)expr::parse(src);
  } catch (const InputError& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

inline BoundaryCondition get_bc(const Json& j, const std::string& what) {
  allow_keys(j, {"alpha", "beta"}, what);
  BoundaryCondition bc;
  if (j.contains("alpha")) bc.alpha = get_complex(j["alpha"], what + ".alpha");
  if (j.contains("beta")) bc.beta = get_complex(j["beta"], what + ".beta");
  if (bc.alpha == Complex(0) && bc.beta == Complex(0)) throw ConfigError(what + ": alpha and beta both zero");
  return bc;
}

inline Json bc_json(const BoundaryCondition& bc) {
  return Json{{"alpha", complex_json(bc.alpha)}, {"beta", complex_json(bc.beta)}};
}

/// Explicit centers, or {"formula": f(x), "from": n0, "to": n1} evaluated at
/// the integers n0..n1.
inline std::vector<Complex> get_shifts(const Json& j) {
  std::vector<Complex> out;
  auto add = [&](const Json& item, const std::string& what) {
    if (item.is_object()) {
      allow_keys(item, {"formula", "from", "to"}, what);
      if (!item.contains("formula") || !item.contains("from") || !item.contains("to"))
        throw ConfigError(what + " needs formula, from and to");
      const std::string src = get_string(item["formula"], what + ".formula");
      if (!item["from"].is_number_integer() || !item["to"].is_number_integer())
        throw ConfigError(what + ": from and to must be integers");
      const long from = item["from"].get<long>(), to = item["to"].get<long>();
      if (to < from) throw ConfigError(what + ": to < from");
      if (to - from > 100000) throw ConfigError(what + ": schedule too long");
      try {
        const expr::Expr e = expr::parse(src);
        for (long n = from; n <= to; ++n) out.push_back(e(static_cast<double>(n)));
      } catch (const InputError& e) {
        throw ConfigError(what + ": " + e.what());
      }
    } else {
      out.push_back(get_complex(item, what));
    }
  };
  if (j.is_object()) {
    add(j, "spectral_shifts");
  } else if (j.is_array()) {
    for (std::size_t k = 0; k < j.size(); ++k) add(j[k], "spectral_shifts[" + std::to_string(k) + "]");
  } else {
    throw ConfigError("spectral_shifts must be a list or a formula object");
  }
  for (Complex c : out)
    if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) throw ConfigError("non-finite spectral shift");
  return out;
}

inline PotentialKind get_potential(const Json& j) {
  if (!j.is_object() || !j.contains("name")) throw ConfigError("potential needs a name");
  const std::string name = get_string(j["name"], "potential.name");
  if (name == "klaus_shaw") {
    allow_keys(j, {"name", "s"}, "potential");
    KlausShaw k;
    if (j.contains("s")) k.s = get_real(j["s"], "potential.s");
    return k;
  }
  if (name == "bronski") {
    allow_keys(j, {"name", "eps"}, "potential");
    Bronski k;
    if (j.contains("eps")) k.eps = get_real(j["eps"], "potential.eps");
    if (!(k.eps > 0)) throw ConfigError("potential.eps must be positive");
    return k;
  }
  if (name == "tovbis") {
    allow_keys(j, {"name", "mu", "eps"}, "potential");
    Tovbis k;
    if (j.contains("mu")) k.mu = get_real(j["mu"], "potential.mu");
    if (j.contains("eps")) k.eps = get_real(j["eps"], "potential.eps");
    if (!(k.eps > 0)) throw ConfigError("potential.eps must be positive");
    return k;
  }
  if (name == "expression") {
    allow_keys(j, {"name", "Q", "P", "eps"}, "potential");
    ExpressionPotential k;
    if (!j.contains("Q")) throw ConfigError("expression potential needs Q");
    k.Q = get_string(j["Q"], "potential.Q");
    check_expression(k.Q, "potential.Q");
    if (j.contains("P")) {
      k.P = get_string(j["P"], "potential.P");
      check_expression(*k.P, "potential.P");
    }
    if (j.contains("eps")) {
      k.eps = get_real(j["eps"], "potential.eps");
      if (!(*k.eps > 0)) throw ConfigError("potential.eps must be positive");
      if (k.P) throw ConfigError("potential: P is implied when eps is given");
    }
    return k;
  }
  throw ConfigError("unknown potential '" + name + "' (klaus_shaw, bronski, tovbis, expression)");
}

inline Json potential_json(const PotentialKind& kind) {
  return std::visit(
      [](const auto& k) -> Json {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, KlausShaw>) {
          return Json{{"name", "klaus_shaw"}, {"s", k.s}};
        } else if constexpr (std::is_same_v<K, Bronski>) {
          return Json{{"name", "bronski"}, {"eps", k.eps}};
        } else if constexpr (std::is_same_v<K, Tovbis>) {
          return Json{{"name", "tovbis"}, {"mu", k.mu}, {"eps", k.eps}};
        } else {
          Json j{{"name", "expression"}, {"Q", k.Q}};
          if (k.P) j["P"] = *k.P;
          if (k.eps) j["eps"] = *k.eps;
          return j;
        }
      },
      kind);
}

/// Sets a named scalar parameter of a catalog potential.
inline PotentialKind with_parameter(PotentialKind kind, const std::string& name, double value) {
  bool ok = false;
  std::visit(
      [&](auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, KlausShaw>) {
          if (name == "s") { k.s = value; ok = true; }
        } else if constexpr (std::is_same_v<K, Bronski>) {
          if (name == "eps") { k.eps = value; ok = true; }
        } else if constexpr (std::is_same_v<K, Tovbis>) {
          if (name == "mu") { k.mu = value; ok = true; }
          if (name == "eps") { k.eps = value; ok = true; }
        } else if constexpr (std::is_same_v<K, ExpressionPotential>) {
          if (name == "eps" && k.eps) { k.eps = value; ok = true; }
        }
      },
      kind);
  if (!ok) throw ConfigError("potential has no sweepable parameter '" + name + "'");
  return kind;
}

}  // namespace detail

/// Builds a validated config with every default filled in.
inline SolveConfig parse_config(const Json& j) {
  using namespace detail;
  allow_keys(j, {"problem", "interval", "half_width", "n_nodes", "M", "string", "pencil", "dirac", "potential",
                 "sweep", "series", "search", "spectral_shifts", "certify", "surface", "output"},
             "config");
  SolveConfig c;
  if (!j.contains("problem")) throw ConfigError("config needs 'problem'");
  const std::string kind = get_string(j["problem"], "problem");
  if (kind == "string") c.kind = ProblemKind::string;
  else if (kind == "pencil") c.kind = ProblemKind::pencil;
  else if (kind == "zakharov_shabat") c.kind = ProblemKind::zakharov_shabat;
  else if (kind == "dirac") c.kind = ProblemKind::dirac;
  else if (kind == "series") c.kind = ProblemKind::series;
  else throw ConfigError("unknown problem '" + kind + "' (string, pencil, zakharov_shabat, dirac, series)");

  const bool zs = c.kind == ProblemKind::zakharov_shabat;
  if (zs) {
    if (!j.contains("potential")) throw ConfigError("zakharov_shabat needs a potential");
    c.potential = get_potential(j["potential"]);
    if (j.contains("interval")) throw ConfigError("zakharov_shabat takes half_width, not interval");
    const double hw = j.contains("half_width") ? get_real(j["half_width"], "half_width") : default_half_width(c.potential);
    if (!(hw > 0)) throw ConfigError("half_width must be positive");
    c.a = -hw;
    c.b = hw;
    const bool semiclassical = !std::holds_alternative<KlausShaw>(c.potential) &&
                               !(std::holds_alternative<ExpressionPotential>(c.potential) &&
                                 !std::get<ExpressionPotential>(c.potential).eps);
    if (semiclassical) c.M = 250;
  } else {
    if (j.contains("half_width")) throw ConfigError("half_width only applies to zakharov_shabat");
    if (j.contains("potential")) throw ConfigError("potential only applies to zakharov_shabat");
    if (j.contains("interval")) {
      const Json& iv = j["interval"];
      if (!iv.is_array() || iv.size() != 2) throw ConfigError("interval must be [a, b]");
      c.a = get_real(iv[0], "interval");
      c.b = get_real(iv[1], "interval");
    }
    if (!(c.a < c.b)) throw ConfigError("interval needs a < b");
  }
  if (j.contains("n_nodes")) c.n_nodes = get_size(j["n_nodes"], "n_nodes");
  if (c.n_nodes < 6 || (c.n_nodes - 1) % 5 != 0) throw ConfigError("n_nodes - 1 must be a positive multiple of 5");
  if (j.contains("M")) c.M = get_size(j["M"], "M");
  if (c.M < 1) throw ConfigError("M must be at least 1");

  auto forbid = [&](const char* key, bool allowed) {
    if (j.contains(key) && !allowed) throw ConfigError(std::string("'") + key + "' does not apply to problem " + kind);
  };
  forbid("string", c.kind == ProblemKind::string);
  forbid("pencil", c.kind == ProblemKind::pencil);
  forbid("dirac", c.kind == ProblemKind::dirac);
  forbid("series", c.kind == ProblemKind::series);
  forbid("sweep", zs);

  switch (c.kind) {
    case ProblemKind::string: {
      if (c.a != 0) throw ConfigError("string interval must start at 0");
      if (j.contains("string")) {
        const Json& s = j["string"];
        allow_keys(s, {"damping", "density"}, "string");
        if (s.contains("damping")) c.damping = get_string(s["damping"], "string.damping");
        if (s.contains("density")) c.density = get_string(s["density"], "string.density");
      }
      check_expression(c.damping, "string.damping");
      check_expression(c.density, "string.density");
      break;
    }
    case ProblemKind::pencil: {
      if (!j.contains("pencil")) throw ConfigError("pencil problem needs a 'pencil' block");
      const Json& s = j["pencil"];
      allow_keys(s, {"p", "q", "r", "x0", "u0", "du0", "left", "right"}, "pencil");
      if (s.contains("p")) c.p = get_string(s["p"], "pencil.p");
      if (s.contains("q")) c.q = get_string(s["q"], "pencil.q");
      if (!s.contains("r") || !s["r"].is_array() || s["r"].empty())
        throw ConfigError("pencil.r must be a non-empty list of expressions");
      for (const auto& e : s["r"]) c.r.push_back(get_string(e, "pencil.r"));
      c.x0 = s.contains("x0") ? get_real(s["x0"], "pencil.x0") : c.a;
      if (s.contains("u0") != s.contains("du0")) throw ConfigError("pencil.u0 and pencil.du0 go together");
      if (s.contains("u0")) {
        c.u0 = get_string(s["u0"], "pencil.u0");
        c.du0 = get_string(s["du0"], "pencil.du0");
        check_expression(*c.u0, "pencil.u0");
        check_expression(*c.du0, "pencil.du0");
      }
      if (s.contains("left")) c.left = get_bc(s["left"], "pencil.left");
      if (s.contains("right")) c.right = get_bc(s["right"], "pencil.right");
      check_expression(c.p, "pencil.p");
      check_expression(c.q, "pencil.q");
      for (const auto& e : c.r) check_expression(e, "pencil.r");
      break;
    }
    case ProblemKind::dirac: {
      if (!j.contains("dirac")) throw ConfigError("dirac problem needs a 'dirac' block");
      const Json& s = j["dirac"];
      allow_keys(s, {"v", "energy", "x0", "left", "right"}, "dirac");
      if (!s.contains("v")) throw ConfigError("dirac.v is required");
      c.v = get_string(s["v"], "dirac.v");
      check_expression(c.v, "dirac.v");
      if (s.contains("energy")) c.energy = get_complex(s["energy"], "dirac.energy");
      c.x0 = s.contains("x0") ? get_real(s["x0"], "dirac.x0") : c.a;
      if (s.contains("left")) c.left = get_bc(s["left"], "dirac.left");
      if (s.contains("right")) c.right = get_bc(s["right"], "dirac.right");
      break;
    }
    case ProblemKind::series: {
      if (!j.contains("series")) throw ConfigError("series problem needs a 'series' block");
      const Json& s = j["series"];
      allow_keys(s, {"coefficients", "center"}, "series");
      if (!s.contains("coefficients") || !s["coefficients"].is_array() || s["coefficients"].empty())
        throw ConfigError("series.coefficients must be a non-empty list");
      for (const auto& e : s["coefficients"]) c.coefficients.push_back(get_complex(e, "series.coefficients"));
      if (s.contains("center")) c.center = get_complex(s["center"], "series.center");
      break;
    }
    case ProblemKind::zakharov_shabat:
      break;
  }
  if (c.kind == ProblemKind::pencil || c.kind == ProblemKind::dirac)
    if (c.x0 < c.a || c.x0 > c.b) throw ConfigError("x0 must lie in the interval");

  if (j.contains("sweep")) {
    const Json& s = j["sweep"];
    allow_keys(s, {"parameter", "values"}, "sweep");
    SweepConfig sw;
    if (!s.contains("parameter") || !s.contains("values") || !s["values"].is_array() || s["values"].empty())
      throw ConfigError("sweep needs a parameter and a non-empty values list");
    sw.parameter = get_string(s["parameter"], "sweep.parameter");
    for (const auto& v : s["values"]) sw.values.push_back(get_real(v, "sweep.values"));
    (void)with_parameter(c.potential, sw.parameter, sw.values.front());
    c.sweep = std::move(sw);
  }

  if (j.contains("search")) {
    const Json& s = j["search"];
    allow_keys(s, {"region", "method", "tol", "samples", "retain_radius", "residual_threshold"}, "search");
    if (s.contains("region")) c.region = get_rect(s["region"], "search.region");
    if (s.contains("method")) {
      const std::string m = get_string(s["method"], "search.method");
      if (m == "poly_roots") c.method = RootMethod::poly_roots;
      else if (m == "arg_principle") c.method = RootMethod::arg_principle;
      else throw ConfigError("search.method must be poly_roots or arg_principle");
    }
    if (s.contains("tol")) c.tol = get_real(s["tol"], "search.tol");
    if (!(c.tol > 0)) throw ConfigError("search.tol must be positive");
    if (s.contains("samples")) c.samples = static_cast<int>(get_size(s["samples"], "search.samples"));
    if (c.samples < 16) throw ConfigError("search.samples must be at least 16");
    if (s.contains("retain_radius")) {
      c.retain_radius = get_real(s["retain_radius"], "search.retain_radius");
      if (!(*c.retain_radius > 0)) throw ConfigError("search.retain_radius must be positive");
    }
    if (s.contains("residual_threshold")) c.residual_threshold = get_real(s["residual_threshold"], "search.residual_threshold");
    if (!(c.residual_threshold > 0)) throw ConfigError("search.residual_threshold must be positive");
  }
  if (c.method == RootMethod::arg_principle && !c.region) throw ConfigError("arg_principle needs search.region");
  if (j.contains("spectral_shifts")) c.shifts = get_shifts(j["spectral_shifts"]);
  if (c.kind == ProblemKind::series && !c.shifts.empty()) throw ConfigError("series problems cannot be shifted");
  if (j.contains("certify")) {
    if (!j["certify"].is_boolean()) throw ConfigError("certify must be true or false");
    c.certify = j["certify"].get<bool>();
  }
  if (j.contains("surface")) {
    const Json& s = j["surface"];
    allow_keys(s, {"region", "nx", "ny", "cap"}, "surface");
    SurfaceConfig sc;
    if (!s.contains("region")) throw ConfigError("surface needs a region");
    sc.region = get_rect(s["region"], "surface.region");
    if (s.contains("nx")) sc.nx = get_size(s["nx"], "surface.nx");
    if (s.contains("ny")) sc.ny = get_size(s["ny"], "surface.ny");
    if (sc.nx < 2 || sc.ny < 2) throw ConfigError("surface resolution must be at least 2 x 2");
    if (s.contains("cap")) sc.cap = get_real(s["cap"], "surface.cap");
    if (!(sc.cap > 0)) throw ConfigError("surface.cap must be positive");
    c.surface = sc;
  }
  if (j.contains("output")) {
    const Json& s = j["output"];
    allow_keys(s, {"path", "format"}, "output");
    if (s.contains("path")) c.output_path = get_string(s["path"], "output.path");
    if (s.contains("format")) c.format = get_string(s["format"], "output.format");
  }
  if (c.format != "csv" && c.format != "json") throw ConfigError("output.format must be csv or json");
  return c;
}

inline SolveConfig parse_config_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return parse_config(j);
}

inline SolveConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

/// The fully resolved config; parsing it gives back the same SolveConfig.
inline Json to_json(const SolveConfig& c) {
  using namespace detail;
  Json j;
  j["problem"] = to_string(c.kind);
  if (c.kind == ProblemKind::zakharov_shabat) {
    j["half_width"] = c.b;
  } else {
    j["interval"] = Json::array({c.a, c.b});
  }
  j["n_nodes"] = c.n_nodes;
  j["M"] = c.M;
  switch (c.kind) {
    case ProblemKind::string:
      j["string"] = Json{{"damping", c.damping}, {"density", c.density}};
      break;
    case ProblemKind::pencil: {
      Json s{{"p", c.p}, {"q", c.q}, {"r", c.r}, {"x0", c.x0}};
      if (c.u0) {
        s["u0"] = *c.u0;
        s["du0"] = *c.du0;
      }
      s["left"] = bc_json(c.left);
      s["right"] = bc_json(c.right);
      j["pencil"] = s;
      break;
    }
    case ProblemKind::dirac:
      j["dirac"] = Json{{"v", c.v}, {"energy", complex_json(c.energy)}, {"x0", c.x0},
                        {"left", bc_json(c.left)}, {"right", bc_json(c.right)}};
      break;
    case ProblemKind::zakharov_shabat:
      j["potential"] = potential_json(c.potential);
      if (c.sweep) j["sweep"] = Json{{"parameter", c.sweep->parameter}, {"values", c.sweep->values}};
      break;
    case ProblemKind::series: {
      Json co = Json::array();
      for (Complex z : c.coefficients) co.push_back(complex_json(z));
      j["series"] = Json{{"coefficients", co}, {"center", complex_json(c.center)}};
      break;
    }
  }
  Json s;
  if (c.region) s["region"] = rect_json(*c.region);
  s["method"] = to_string(c.method);
  s["tol"] = c.tol;
  s["samples"] = c.samples;
  if (c.retain_radius) s["retain_radius"] = *c.retain_radius;
  s["residual_threshold"] = c.residual_threshold;
  j["search"] = s;
  Json sh = Json::array();
  for (Complex z : c.shifts) sh.push_back(complex_json(z));
  j["spectral_shifts"] = sh;
  j["certify"] = c.certify;
  if (c.surface)
    j["surface"] = Json{{"region", rect_json(c.surface->region)}, {"nx", c.surface->nx}, {"ny", c.surface->ny},
                        {"cap", c.surface->cap}};
  Json out{{"format", c.format}};
  if (!c.output_path.empty()) out["path"] = c.output_path;
  j["output"] = out;
  return j;
}

// ---------------------------------------------------------------------------
// problem assembly

/// Everything the root pipeline needs from one concrete problem.
struct Assembled {
  std::optional<PencilSpec> base;
  std::optional<ParticularSolution> u0;
  CharacteristicBuilder characteristic;
  /// Bound on |Phi - Phi_M| within distance r of the step's center.
  std::function<double(const ShiftStep&, double r)> tail;
  bool zs = false;
  std::optional<double> epsilon;
  std::optional<CharacteristicSeries> fixed;  // series problems
};

namespace detail {

inline SampledFunction sample(const std::string& src, const Grid& g) {
  return expr::evaluate_on_grid(expr::parse(src), g);
}

/// Symbolic derivative when the expression allows it, else finite differences.
inline SampledFunction sample_derivative(const std::string& src, const Grid& g) {
  const expr::Expr e = expr::parse(src);
  try {
    return expr::evaluate_on_grid(expr::differentiate(e), g);
  } catch (const InputError&) {
    return derivative(expr::evaluate_on_grid(e, g));
  }
}

/// Tail of the separated-conditions series from the formal power majorants.
inline double separated_tail(const ShiftStep& st, const BoundaryCondition& left, const BoundaryCondition& right,
                             std::size_t N, double length, double r) {
  const EndpointData& d = st.endpoints;
  const std::size_t M = d.order();
  const MajorantSeries maj(st.coefficient_majorant * length, N);
  const double E = maj.even_tail(r, M + 1), O = maj.odd_tail(r, M + 1), Osh = r * maj.odd_tail(r, M);
  const double c1 = std::abs(left.beta / d.u0_left);
  const double c2 = std::abs(left.alpha * d.u0_left + left.beta * d.p_left * d.du0_left);
  const double v = std::abs(d.u0_right), pdv = std::abs(d.p_right * d.du0_right), iv = 1.0 / v;
  return std::abs(right.alpha) * (c1 * v * E + c2 * v * O) +
         std::abs(right.beta) * (c1 * (pdv * E + iv * Osh) + c2 * (pdv * O + iv * E));
}

inline std::size_t node_of(const Grid& g, double x) {
  const double t = (x - g.a()) / g.step();
  return static_cast<std::size_t>(std::clamp(std::llround(t), 0LL, static_cast<long long>(g.size() - 1)));
}

}  // namespace detail

inline Assembled assemble(const SolveConfig& c, const PotentialKind& potential) {
  Assembled as;
  if (c.kind == ProblemKind::series) {
    as.fixed = CharacteristicSeries(c.center, c.coefficients, SeriesProvenance::custom);
    as.tail = [](const ShiftStep&, double) { return 0.0; };
    return as;
  }
  const Grid g(c.a, c.b, c.n_nodes);
  const double length = c.b - c.a;
  switch (c.kind) {
    case ProblemKind::string: {
      const StringProblem sp(detail::sample(c.damping, g), detail::sample(c.density, g));
      as.base = sp.pencil();
      as.u0 = ParticularSolution::make(SampledFunction::constant(g, 1.0), SampledFunction::constant(g, 0.0),
                                       Provenance::closed_form);
      as.characteristic = dirichlet_characteristic;
      // Phi = sum Lambda^n X(2n+1)(L); the u0 factors are inside the X majorant
      as.tail = [length](const ShiftStep& st, double r) {
        return MajorantSeries(st.coefficient_majorant * length, 2).odd_tail(r, st.endpoints.order() + 1);
      };
      break;
    }
    case ProblemKind::pencil:
    case ProblemKind::dirac: {
      SampledFunction p = SampledFunction::constant(g, 1.0), q = p;
      if (c.kind == ProblemKind::pencil) {
        std::vector<SampledFunction> r;
        for (const auto& e : c.r) r.push_back(detail::sample(e, g));
        p = detail::sample(c.p, g);
        q = detail::sample(c.q, g);
        as.base = PencilSpec(p, q, std::move(r));
      } else {
        const DiracSpec d(detail::sample(c.v, g), c.energy, detail::sample_derivative(c.v, g));
        as.base = dirac_to_pencil(d);
        p = as.base->p();
        q = as.base->q();
      }
      std::optional<std::pair<SampledFunction, SampledFunction>> user;
      if (c.u0) user.emplace(detail::sample(*c.u0, g), detail::sample(*c.du0, g));
      as.u0 = build_particular_solution(p, q, user, detail::node_of(g, c.x0));
      as.characteristic = separated_characteristic(c.left, c.right);
      const std::size_t N = as.base->degree();
      as.tail = [left = c.left, right = c.right, N, length](const ShiftStep& st, double r) {
        return detail::separated_tail(st, left, right, N, length, r);
      };
      break;
    }
    case ProblemKind::zakharov_shabat: {
      const ZSProblem zs = materialize_potential(PotentialSpec{potential, c.b}, g);
      as.base = zs_to_pencil(zs);
      as.u0 = zs_particular_solution(zs);
      as.characteristic = zs_characteristic;
      as.zs = true;
      as.epsilon = zs.epsilon;
      const double mass = zs_potential_mass(zs), hw = c.b;
      as.tail = [length, mass, hw](const ShiftStep& st, double r) {
        return std::min(zs_tail_bound(st.endpoints, st.coefficient_majorant, length, r),
                        zs_cauchy_tail_bound(st.endpoints, hw, mass, r));
      };
      break;
    }
    case ProblemKind::series:
      break;
  }
  return as;
}

/// The characteristic series at every configured center (center 0 when none).
inline std::vector<ShiftStep> characteristic_steps(const SolveConfig& c, const Assembled& as) {
  if (as.fixed) return {ShiftStep{as.fixed->center, *as.fixed, 0.0, EndpointData{}}};
  const std::vector<Complex> centers = c.shifts.empty() ? std::vector<Complex>{0.0} : c.shifts;
  return run_shift_chain(*as.base, *as.u0, centers, c.M, as.characteristic);
}

// ---------------------------------------------------------------------------
// root pipeline

struct SpuriousCandidate {
  Complex value;
  Complex center;
};

struct RunResult {
  std::optional<double> sweep_value;
  std::vector<EigenvalueRecord> records;
  std::vector<EigenvalueRecord> not_admissible;  // zakharov_shabat roots with Re lambda <= 0
  std::vector<SpuriousCandidate> spurious;
  std::size_t excluded_by_residual = 0;
  std::vector<Complex> centers;
};

struct ResultSet {
  SolveConfig config;
  std::vector<RunResult> runs;

  bool all_certified() const {
    for (const auto& r : runs)
      for (const auto& e : r.records)
        if (!e.certified) return false;
    return true;
  }
};

namespace detail {

inline bool value_less(Complex a, Complex b) {
  if (a.real() != b.real()) return a.real() < b.real();
  return a.imag() < b.imag();
}

inline std::size_t nearest_center(const std::vector<ShiftStep>& steps, Complex z) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < steps.size(); ++k)
    if (std::abs(z - steps[k].center) < std::abs(z - steps[best].center)) best = k;
  return best;
}

/// Box for the Rouche check: half-width min(0.5, 0.45 d), d the distance to the
/// nearest root of Phi_M not belonging to this record's cluster.
inline Rectangle certification_box(const EigenvalueRecord& rec, std::vector<Complex> roots) {
  std::sort(roots.begin(), roots.end(),
            [&](Complex x, Complex y) { return std::abs(x - rec.value) < std::abs(y - rec.value); });
  const std::size_t skip = std::min<std::size_t>(static_cast<std::size_t>(rec.multiplicity), roots.size());
  const double d = roots.size() > skip ? std::abs(roots[skip] - rec.value) : std::numeric_limits<double>::infinity();
  // within-cluster spread must stay inside the box
  double spread = 0;
  for (std::size_t k = 0; k < skip; ++k) spread = std::max(spread, std::abs(roots[k] - rec.value));
  double h = std::min(0.5, 0.45 * d);
  h = std::max(h, 2 * spread);
  return Rectangle::around(rec.value, h);
}

}  // namespace detail

/// Runs one parameter point of the config.
inline RunResult solve_point(const SolveConfig& c, const PotentialKind& potential) {
  const Assembled as = assemble(c, potential);
  const std::vector<ShiftStep> steps = characteristic_steps(c, as);
  RunResult out;
  for (const auto& st : steps) out.centers.push_back(st.center);

  struct Candidate {
    EigenvalueRecord rec;
    std::size_t step;
  };
  std::vector<Candidate> cands;
  std::vector<std::vector<Complex>> all_roots(steps.size());
  for (std::size_t s = 0; s < steps.size(); ++s) {
    const CharacteristicSeries& f = steps[s].series;
    all_roots[s] = poly_roots(f);
    std::vector<EigenvalueRecord> found;
    if (c.method == RootMethod::poly_roots) {
      for (Complex z : all_roots[s]) {
        EigenvalueRecord r;
        r.value = z;
        r.method = RootMethod::poly_roots;
        r.residual = std::abs(f(z));
        found.push_back(r);
      }
    } else {
      found = localize(f, *c.region, LocalizeOptions{c.tol, c.samples});
    }
    for (auto& r : found) {
      const bool in_region = !c.region || c.region->contains(r.value);
      const std::size_t home = detail::nearest_center(steps, r.value);
      if (home != s) continue;  // another center is closer; it reports this root
      const bool in_radius = !c.retain_radius || std::abs(r.value - steps[s].center) <= *c.retain_radius;
      if (!in_region || !in_radius) {
        out.spurious.push_back({r.value, steps[s].center});
        continue;
      }
      const double mag = f.magnitude(r.value);
      if (!(r.residual <= c.residual_threshold * mag)) {
        ++out.excluded_by_residual;
        continue;
      }
      cands.push_back({r, s});
    }
  }

  for (auto& cd : cands) {
    const ShiftStep& st = steps[cd.step];
    const Rectangle box = detail::certification_box(cd.rec, all_roots[cd.step]);
    const double tail = as.tail(st, box.max_distance(st.center));
    cd.rec = certify(cd.rec, st.series, tail, box, c.samples);
    if (as.epsilon) cd.rec.back_map = Complex(0, *as.epsilon) * cd.rec.value;
  }

  // With certification requested, uncertified roots beyond the farthest
  // certified root of their step are truncation artifacts. A step that
  // certifies nothing keeps its roots, so the failure stays visible.
  if (c.certify) {
    std::vector<double> reach(steps.size(), -1.0);
    for (const auto& cd : cands)
      if (cd.rec.certified)
        reach[cd.step] = std::max(reach[cd.step], std::abs(cd.rec.value - steps[cd.step].center));
    std::vector<Candidate> near;
    for (auto& cd : cands) {
      if (!cd.rec.certified && reach[cd.step] >= 0 && std::abs(cd.rec.value - steps[cd.step].center) > reach[cd.step])
        out.spurious.push_back({cd.rec.value, steps[cd.step].center});
      else
        near.push_back(cd);
    }
    cands = std::move(near);
  }

  // cross-shift deduplication
  std::sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
    if (x.rec.residual != y.rec.residual) return x.rec.residual < y.rec.residual;
    return detail::value_less(x.rec.value, y.rec.value);
  });
  std::vector<EigenvalueRecord> kept;
  for (const auto& cd : cands) {
    const bool dup = std::any_of(kept.begin(), kept.end(), [&](const EigenvalueRecord& k) {
      return std::abs(k.value - cd.rec.value) <= 10 * c.tol;
    });
    if (!dup) kept.push_back(cd.rec);
  }
  for (auto& r : kept) {
    if (as.zs && !(r.value.real() > 0)) out.not_admissible.push_back(r);
    else out.records.push_back(r);
  }
  auto by_value = [](const auto& x, const auto& y) { return detail::value_less(x.value, y.value); };
  std::sort(out.records.begin(), out.records.end(), by_value);
  std::sort(out.not_admissible.begin(), out.not_admissible.end(), by_value);
  std::sort(out.spurious.begin(), out.spurious.end(), by_value);
  return out;
}

namespace detail {

/// Calls body(k) for k in [0, n) on up to `threads` workers.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (threads == 1) {
    for (std::size_t k = 0; k < n; ++k) body(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t k; (k = next++) < n;) {
        try {
          body(k);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

inline ResultSet run_solve(const SolveConfig& c, unsigned threads = 1) {
  ResultSet rs;
  rs.config = c;
  if (!c.sweep) {
    rs.runs.push_back(solve_point(c, c.potential));
    return rs;
  }
  rs.runs.resize(c.sweep->values.size());
  detail::parallel_for(rs.runs.size(), threads, [&](std::size_t k) {
    const double v = c.sweep->values[k];
    rs.runs[k] = solve_point(c, detail::with_parameter(c.potential, c.sweep->parameter, v));
    rs.runs[k].sweep_value = v;
  });
  return rs;
}

inline ResultSet run_solve(const std::string& config_path, unsigned threads = 1) {
  return run_solve(load_config(config_path), threads);
}

// ---------------------------------------------------------------------------
// writers

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline Json record_json(const EigenvalueRecord& r) {
  Json j{{"value", complex_json(r.value)},
         {"multiplicity", r.multiplicity},
         {"method", to_string(r.method)},
         {"certified", r.certified},
         {"residual", r.residual}};
  if (r.back_map) j["back_map"] = complex_json(*r.back_map);
  return j;
}

}  // namespace detail

/// One row per record: re, im, multiplicity, method, certified, residual,
/// then the back-mapped value and the sweep value when present.
inline std::string to_csv(const ResultSet& rs) {
  using detail::fmt;
  std::string s = "re,im,multiplicity,method,certified,residual,back_re,back_im,sweep_value\n";
  for (const auto& run : rs.runs)
    for (const auto& r : run.records) {
      s += fmt(r.value.real()) + "," + fmt(r.value.imag()) + "," + std::to_string(r.multiplicity) + "," +
           to_string(r.method) + "," + (r.certified ? "true" : "false") + "," + fmt(r.residual) + ",";
      if (r.back_map) s += fmt(r.back_map->real()) + "," + fmt(r.back_map->imag());
      else s += ",";
      s += ",";
      if (run.sweep_value) s += fmt(*run.sweep_value);
      s += "\n";
    }
  return s;
}

inline Json to_report(const ResultSet& rs) {
  using namespace detail;
  Json runs = Json::array();
  std::size_t excluded = 0;
  for (const auto& run : rs.runs) {
    Json j;
    if (run.sweep_value) j["sweep_value"] = *run.sweep_value;
    Json centers = Json::array();
    for (Complex z : run.centers) centers.push_back(complex_json(z));
    j["centers"] = centers;
    Json recs = Json::array(), na = Json::array(), sp = Json::array();
    for (const auto& r : run.records) recs.push_back(record_json(r));
    for (const auto& r : run.not_admissible) {
      Json x = record_json(r);
      x["label"] = "root, not admissible";
      na.push_back(x);
    }
    for (const auto& c : run.spurious) sp.push_back(Json{{"value", complex_json(c.value)}, {"center", complex_json(c.center)}});
    j["records"] = recs;
    j["not_admissible"] = na;
    j["spurious_candidates"] = sp;
    j["excluded_by_residual"] = run.excluded_by_residual;
    excluded += run.excluded_by_residual;
    runs.push_back(j);
  }
  Json meta{{"M", rs.config.M},
            {"n_nodes", rs.config.kind == ProblemKind::series ? Json(nullptr) : Json(rs.config.n_nodes)},
            {"shifts", rs.config.shifts.size()},
            {"excluded_by_residual", excluded},
            {"all_certified", rs.all_certified()},
            {"config", to_json(rs.config)}};
  return Json{{"metadata", meta}, {"runs", runs}};
}

inline std::string format_results(const ResultSet& rs, const std::string& format) {
  if (format == "csv") return to_csv(rs);
  if (format == "json") return to_report(rs).dump(2) + "\n";
  throw ConfigError("unknown format '" + format + "'");
}

// ---------------------------------------------------------------------------
// surface

/// -ln|Phi_M| on an nx by ny lattice, rows from im_min up, each row from re_min
/// right; each sample uses the series of the nearest center. Values are capped.
inline std::vector<double> surface_values(const std::vector<ShiftStep>& steps, const SurfaceConfig& sc,
                                          unsigned threads = 1) {
  std::vector<double> v(sc.nx * sc.ny);
  const Rectangle& r = sc.region;
  const double dx = r.width() / static_cast<double>(sc.nx - 1), dy = r.height() / static_cast<double>(sc.ny - 1);
  detail::parallel_for(sc.ny, threads, [&](std::size_t j) {
    const double y = j + 1 == sc.ny ? r.im_max : r.im_min + static_cast<double>(j) * dy;
    for (std::size_t i = 0; i < sc.nx; ++i) {
      const double x = i + 1 == sc.nx ? r.re_max : r.re_min + static_cast<double>(i) * dx;
      const Complex z(x, y);
      const double m = std::abs(steps[detail::nearest_center(steps, z)].series(z));
      const double h = m > 0 ? -std::log(m) : sc.cap;
      v[j * sc.nx + i] = std::min(h, sc.cap);
    }
  });
  return v;
}

inline std::string format_surface(const SurfaceConfig& sc, const std::vector<double>& v) {
  using detail::fmt;
  const Rectangle& r = sc.region;
  std::string s = "# region " + fmt(r.re_min) + " " + fmt(r.re_max) + " " + fmt(r.im_min) + " " + fmt(r.im_max) +
                  "\n# resolution " + std::to_string(sc.nx) + " " + std::to_string(sc.ny) + "\n";
  for (std::size_t j = 0; j < sc.ny; ++j) {
    for (std::size_t i = 0; i < sc.nx; ++i) {
      if (i) s += " ";
      s += fmt(v[j * sc.nx + i]);
    }
    s += "\n";
  }
  return s;
}

/// Surface of the first parameter point.
inline std::string emit_surface(const SolveConfig& c, unsigned threads = 1) {
  if (!c.surface) throw ConfigError("config has no surface block");
  const PotentialKind pot =
      c.sweep ? detail::with_parameter(c.potential, c.sweep->parameter, c.sweep->values.front()) : c.potential;
  const Assembled as = assemble(c, pot);
  const auto steps = characteristic_steps(c, as);
  return format_surface(*c.surface, surface_values(steps, *c.surface, threads));
}

}  // namespace spps::driver
