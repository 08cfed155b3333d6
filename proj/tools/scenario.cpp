#include "scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>

#include "cart/equilibria.hpp"

namespace cart::cli {
namespace {

// Shortest decimal string that parses back to exactly v.
std::string fmt(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string join(const std::string& path, std::string_view key) {
  if (path.empty()) return std::string(key);
  return path + "." + std::string(key);
}

// ---------------------------------------------------------------------------
// Tokenizer. Words are maximal runs of anything that is not whitespace, a
// brace, a bracket or a comment start; '#' comments run to end of line.

struct Token {
  enum Kind { Word, LBrace, RBrace, LBracket, RBracket, End };
  Kind kind = End;
  std::string text;
  int line = 0;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    for (;;) {
      if (i_ >= src_.size()) return {Token::End, "", line_};
      char c = src_[i_];
      if (c == '\n') {
        ++line_;
        ++i_;
      } else if (c == ' ' || c == '\t' || c == '\r') {
        ++i_;
      } else if (c == '#') {
        while (i_ < src_.size() && src_[i_] != '\n') ++i_;
      } else {
        break;
      }
    }
    int line = line_;
    char c = src_[i_];
    if (c == '{') return ++i_, Token{Token::LBrace, "{", line};
    if (c == '}') return ++i_, Token{Token::RBrace, "}", line};
    if (c == '[') return ++i_, Token{Token::LBracket, "[", line};
    if (c == ']') return ++i_, Token{Token::RBracket, "]", line};
    std::size_t start = i_;
    while (i_ < src_.size() && !is_delim(src_[i_])) ++i_;
    return {Token::Word, std::string(src_.substr(start, i_ - start)), line};
  }

 private:
  static bool is_delim(char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '{' ||
           c == '}' || c == '[' || c == ']' || c == '#';
  }

  std::string_view src_;
  std::size_t i_ = 0;
  int line_ = 1;
};

// ---------------------------------------------------------------------------
// Untyped tree: a block is an ordered key -> value map, a value is a scalar
// word, a nested block, or a list of blocks.

struct Value;
using Block = std::vector<std::pair<std::string, Value>>;

struct Value {
  enum Kind { Scalar, BlockV, ListV };
  Kind kind = Scalar;
  std::string scalar;
  Block block;
  std::vector<Block> list;
  int line = 0;
};

[[noreturn]] void syntax_error(int line, const std::string& what) {
  throw ScenarioError("line " + std::to_string(line) + ": " + what);
}

Block parse_entries(Lexer& lx, Token::Kind stop, const std::string& path) {
  Block out;
  for (;;) {
    Token key = lx.next();
    if (key.kind == stop) return out;
    if (key.kind != Token::Word) {
      syntax_error(key.line, stop == Token::End
                                 ? "expected a field name, got '" + key.text + "'"
                                 : "expected a field name or '}', got '" +
                                       key.text + "'");
    }
    for (const auto& [name, v] : out) {
      if (name == key.text)
        throw ScenarioError(join(path, key.text) + ": duplicate field");
    }
    Token val = lx.next();
    Value v;
    v.line = val.line;
    switch (val.kind) {
      case Token::Word:
        v.kind = Value::Scalar;
        v.scalar = val.text;
        break;
      case Token::LBrace:
        v.kind = Value::BlockV;
        v.block = parse_entries(lx, Token::RBrace, join(path, key.text));
        break;
      case Token::LBracket: {
        v.kind = Value::ListV;
        for (;;) {
          Token t = lx.next();
          if (t.kind == Token::RBracket) break;
          if (t.kind != Token::LBrace)
            syntax_error(t.line, "expected '{' or ']' inside the " +
                                     join(path, key.text) + " list");
          std::string item = join(path, key.text) + "[" +
                             std::to_string(v.list.size()) + "]";
          v.list.push_back(parse_entries(lx, Token::RBrace, item));
        }
        break;
      }
      default:
        syntax_error(val.line,
                     "missing value for field '" + join(path, key.text) + "'");
    }
    out.emplace_back(std::move(key.text), std::move(v));
  }
}

// ---------------------------------------------------------------------------
// Typed access over a block, with unknown-field rejection.

class Fields {
 public:
  Fields(const Block& b, std::string path)
      : b_(b), path_(std::move(path)), used_(b.size(), false) {}

  const Value* find(std::string_view name) {
    for (std::size_t i = 0; i < b_.size(); ++i) {
      if (b_[i].first == name) {
        used_[i] = true;
        return &b_[i].second;
      }
    }
    return nullptr;
  }

  bool has(std::string_view name) { return find(name) != nullptr; }

  const Value& require(std::string_view name) {
    const Value* v = find(name);
    if (!v)
      throw ScenarioError(join(path_, name) + ": required field missing");
    return *v;
  }

  std::string word(std::string_view name) {
    return as_scalar(require(name), name);
  }

  double number(std::string_view name) {
    return to_number(as_scalar(require(name), name), name);
  }

  std::optional<double> opt_number(std::string_view name) {
    const Value* v = find(name);
    if (!v) return std::nullopt;
    return to_number(as_scalar(*v, name), name);
  }

  // Absent and the literal word "auto" both mean automatic.
  std::optional<double> auto_or_number(std::string_view name) {
    const Value* v = find(name);
    if (!v) return std::nullopt;
    std::string s = as_scalar(*v, name);
    if (s == "auto") return std::nullopt;
    return to_number(s, name);
  }

  bool flag(std::string_view name, bool fallback) {
    const Value* v = find(name);
    if (!v) return fallback;
    std::string s = as_scalar(*v, name);
    if (s == "true") return true;
    if (s == "false") return false;
    throw ScenarioError(join(path_, name) + ": expected true or false, got '" +
                        s + "'");
  }

  const Block* opt_block(std::string_view name) {
    const Value* v = find(name);
    if (!v) return nullptr;
    if (v->kind != Value::BlockV)
      throw ScenarioError(join(path_, name) + ": expected a { } block");
    return &v->block;
  }

  const Block& block(std::string_view name) {
    const Value& v = require(name);
    if (v.kind != Value::BlockV)
      throw ScenarioError(join(path_, name) + ": expected a { } block");
    return v.block;
  }

  const std::vector<Block>* opt_list(std::string_view name) {
    const Value* v = find(name);
    if (!v) return nullptr;
    if (v->kind != Value::ListV)
      throw ScenarioError(join(path_, name) + ": expected a [ ] list");
    return &v->list;
  }

  void forbid(std::string_view name, const std::string& why) {
    if (find(name))
      throw ScenarioError(join(path_, name) + ": " + why);
  }

  // Every key must have been consumed by now.
  void done() {
    for (std::size_t i = 0; i < b_.size(); ++i) {
      if (!used_[i])
        throw ScenarioError(join(path_, b_[i].first) + ": unknown field");
    }
  }

  const std::string& path() const { return path_; }

 private:
  std::string as_scalar(const Value& v, std::string_view name) {
    if (v.kind != Value::Scalar)
      throw ScenarioError(join(path_, name) + ": expected a single value");
    return v.scalar;
  }

  double to_number(const std::string& s, std::string_view name) {
    double out = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
      throw ScenarioError(join(path_, name) + ": not a number: '" + s + "'");
    return out;
  }

  const Block& b_;
  std::string path_;
  std::vector<bool> used_;
};

// ---------------------------------------------------------------------------
// Tree -> ScenarioFile

ModelParams read_params(const Block& b) {
  Fields f(b, "params");
  ModelParams p;
  p.r = f.number("r");
  p.b = f.number("b");
  p.gamma = f.number("gamma");
  p.phi = f.number("phi");
  p.rho = f.number("rho");
  p.theta = f.number("theta");
  p.alpha = f.number("alpha");
  p.epsilon = f.number("epsilon");
  p.mu = f.number("mu");
  f.done();
  return p;
}

State read_state(const Block& b, const std::string& path) {
  Fields f(b, path);
  State s;
  s.x1 = f.number("x1");
  s.x2 = f.number("x2");
  s.x3 = f.number("x3");
  f.done();
  return s;
}

ControlLaw read_law(const Block& b) {
  Fields f(b, "law");
  std::string kind = f.word("kind");
  bool drains = f.flag("drains_pool", true);
  ControlLaw law;
  if (kind == "off") {
    f.forbid("tau", "only valid when kind is constant_tau");
    f.forbid("a", "only valid when kind is backstepping");
    f.forbid("lyapunov_xi", "only valid when kind is backstepping");
    law = ControlLaw::off();
    law.tau_drains_pool = drains;
  } else if (kind == "constant_tau") {
    f.forbid("a", "only valid when kind is backstepping");
    f.forbid("lyapunov_xi", "only valid when kind is backstepping");
    law = ControlLaw::constant_tau(f.number("tau"), drains);
  } else if (kind == "backstepping") {
    f.forbid("tau", "only valid when kind is constant_tau");
    law = ControlLaw::backstepping(f.number("a"), drains);
    if (auto xi = f.opt_number("lyapunov_xi")) law.lyapunov_xi = *xi;
  } else {
    throw ScenarioError(
        "law.kind: expected off, constant_tau or backstepping, got '" + kind +
        "'");
  }
  f.done();
  return law;
}

IntegratorConfig read_integrator(const Block& b) {
  Fields f(b, "integrator");
  IntegratorConfig cfg;
  if (const Value* v = f.find("method")) {
    std::string m = v->kind == Value::Scalar ? v->scalar : "";
    if (m == "rk45")
      cfg.method = IntegratorConfig::Method::RK45Adaptive;
    else if (m == "rk4")
      cfg.method = IntegratorConfig::Method::RK4Fixed;
    else
      throw ScenarioError("integrator.method: expected rk45 or rk4, got '" +
                          m + "'");
  }
  if (auto x = f.opt_number("step")) cfg.step = *x;
  if (auto x = f.opt_number("rel_tol")) cfg.rel_tol = *x;
  if (auto x = f.opt_number("abs_tol")) cfg.abs_tol = *x;
  if (auto x = f.opt_number("min_step")) cfg.min_step = *x;
  if (auto x = f.opt_number("max_step")) cfg.max_step = *x;
  cfg.nonneg_floor = f.flag("nonneg_floor", cfg.nonneg_floor);
  if (auto x = f.opt_number("output_dt")) cfg.output_dt = *x;
  f.done();
  return cfg;
}

AnalysisSpec read_analysis(const Block& b) {
  Fields f(b, "analysis");
  AnalysisSpec a;
  if (auto x = f.opt_number("clearance_threshold")) a.clearance_threshold = *x;
  if (auto x = f.opt_number("relapse_factor")) a.relapse_factor = *x;
  f.done();
  return a;
}

CertificateSpec read_certificate(const Block& b) {
  Fields f(b, "certificate");
  CertificateSpec c;
  c.a = f.opt_number("a");
  c.k = f.auto_or_number("k");
  c.xi = f.auto_or_number("xi");
  c.u_bound = f.auto_or_number("u_bound");
  if (const Block* rb = f.opt_block("region")) {
    Fields r(*rb, "certificate.region");
    CertifiedRegion reg;
    reg.x1_lo = r.number("x1_lo");
    reg.x1_hi = r.number("x1_hi");
    reg.z2_lo = r.number("z2_lo");
    reg.z2_hi = r.number("z2_hi");
    r.done();
    c.region = reg;
  }
  f.done();
  return c;
}

void check_certificate(const ScenarioFile& s) {
  if (!s.certificate) return;
  const CertificateSpec& c = *s.certificate;
  if (s.law.kind != ControlLaw::Kind::Backstepping)
    throw ScenarioError("certificate: only valid when law.kind is backstepping");
  if (c.a) {
    if (!(std::isfinite(*c.a) && *c.a == s.law.gain))
      throw ScenarioError("certificate.a: must equal law.a");
  }
  if (c.k && !(std::isfinite(*c.k) && *c.k >= 0.0))
    throw ScenarioError("certificate.k: must be finite and >= 0");
  if (c.xi && !(std::isfinite(*c.xi) && *c.xi > 0.0))
    throw ScenarioError("certificate.xi: must be finite and > 0");
  if (c.u_bound && !(std::isfinite(*c.u_bound) && *c.u_bound >= 0.0))
    throw ScenarioError("certificate.u_bound: must be finite and >= 0");
  if (c.region) {
    const CertifiedRegion& g = *c.region;
    if (!(std::isfinite(g.x1_lo) && std::isfinite(g.x1_hi) &&
          g.x1_hi >= g.x1_lo))
      throw ScenarioError("certificate.region.x1_hi: must be finite and >= x1_lo");
    if (!(std::isfinite(g.z2_lo) && std::isfinite(g.z2_hi) &&
          g.z2_hi >= g.z2_lo))
      throw ScenarioError("certificate.region.z2_hi: must be finite and >= z2_lo");
  }
}

}  // namespace

ScenarioFile parse_scenario(std::string_view text) {
  Lexer lx(text);
  Block top = parse_entries(lx, Token::End, "");

  Fields f(top, "");
  ScenarioFile s;
  s.params = read_params(f.block("params"));
  s.initial = read_state(f.block("initial"), "initial");
  s.law = read_law(f.block("law"));
  if (const std::vector<Block>* evs = f.opt_list("events")) {
    for (std::size_t i = 0; i < evs->size(); ++i) {
      std::string path = "events[" + std::to_string(i) + "]";
      Fields e((*evs)[i], path);
      DoseEvent ev;
      ev.time = e.number("time");
      ev.delta.x1 = e.opt_number("x1").value_or(0.0);
      ev.delta.x2 = e.opt_number("x2").value_or(0.0);
      ev.delta.x3 = e.opt_number("x3").value_or(0.0);
      e.done();
      s.events.push_back(ev);
    }
  }
  s.horizon = f.number("horizon");
  if (const Block* b = f.opt_block("integrator")) s.integrator = read_integrator(*b);
  if (const Block* b = f.opt_block("analysis")) s.analysis = read_analysis(*b);
  if (const Block* b = f.opt_block("certificate")) s.certificate = read_certificate(*b);
  f.done();

  // Field-level validation, then cross-field rules. The semantic checks
  // live in the core library and throw its InvalidInputError; rewrap so
  // callers see one exception type for anything wrong with a file.
  try {
    validate(s.params);
    validate(s.initial, "initial");
    validate(s.law);
    validate(s.integrator, "integrator");
    for (std::size_t i = 0; i < s.events.size(); ++i) {
      std::string path = "events[" + std::to_string(i) + "]";
      if (!(std::isfinite(s.events[i].time) && s.events[i].time >= 0.0))
        throw ScenarioError(path + ".time: must be finite and >= 0");
      validate(s.events[i].delta, path);
    }
  } catch (const ScenarioError&) {
    throw;
  } catch (const InvalidInputError& e) {
    throw ScenarioError(e.what());
  }
  if (!(std::isfinite(s.horizon) && s.horizon > 0.0))
    throw ScenarioError("horizon: must be finite and > 0");
  if (!(std::isfinite(s.analysis.clearance_threshold) &&
        s.analysis.clearance_threshold >= 0.0))
    throw ScenarioError("analysis.clearance_threshold: must be finite and >= 0");
  if (!(std::isfinite(s.analysis.relapse_factor) &&
        s.analysis.relapse_factor > 1.0))
    throw ScenarioError("analysis.relapse_factor: must be finite and > 1");
  check_certificate(s);
  return s;
}

ScenarioFile load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError(path + ": cannot open scenario file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string serialize_scenario(const ScenarioFile& s) {
  std::string o;
  auto line = [&](int indent, const std::string& text) {
    o.append(static_cast<std::size_t>(indent) * 2, ' ');
    o += text;
    o += '\n';
  };
  auto kv = [&](int indent, const char* key, const std::string& v) {
    line(indent, std::string(key) + " " + v);
  };
  auto kb = [&](int indent, const char* key, bool v) {
    kv(indent, key, v ? "true" : "false");
  };
  auto ka = [&](int indent, const char* key, const std::optional<double>& v) {
    kv(indent, key, v ? fmt(*v) : "auto");
  };

  line(0, "params {");
  kv(1, "r", fmt(s.params.r));
  kv(1, "b", fmt(s.params.b));
  kv(1, "gamma", fmt(s.params.gamma));
  kv(1, "phi", fmt(s.params.phi));
  kv(1, "rho", fmt(s.params.rho));
  kv(1, "theta", fmt(s.params.theta));
  kv(1, "alpha", fmt(s.params.alpha));
  kv(1, "epsilon", fmt(s.params.epsilon));
  kv(1, "mu", fmt(s.params.mu));
  line(0, "}");

  line(0, "initial {");
  kv(1, "x1", fmt(s.initial.x1));
  kv(1, "x2", fmt(s.initial.x2));
  kv(1, "x3", fmt(s.initial.x3));
  line(0, "}");

  line(0, "law {");
  switch (s.law.kind) {
    case ControlLaw::Kind::Off:
      kv(1, "kind", "off");
      break;
    case ControlLaw::Kind::ConstantTau:
      kv(1, "kind", "constant_tau");
      kv(1, "tau", fmt(s.law.tau));
      break;
    case ControlLaw::Kind::Backstepping:
      kv(1, "kind", "backstepping");
      kv(1, "a", fmt(s.law.gain));
      kv(1, "lyapunov_xi", fmt(s.law.lyapunov_xi));
      break;
  }
  kb(1, "drains_pool", s.law.tau_drains_pool);
  line(0, "}");

  if (!s.events.empty()) {
    line(0, "events [");
    for (const DoseEvent& ev : s.events) {
      line(1, "{");
      kv(2, "time", fmt(ev.time));
      if (ev.delta.x1 != 0.0) kv(2, "x1", fmt(ev.delta.x1));
      if (ev.delta.x2 != 0.0) kv(2, "x2", fmt(ev.delta.x2));
      if (ev.delta.x3 != 0.0) kv(2, "x3", fmt(ev.delta.x3));
      line(1, "}");
    }
    line(0, "]");
  }

  kv(0, "horizon", fmt(s.horizon));

  line(0, "integrator {");
  kv(1, "method", s.integrator.method == IntegratorConfig::Method::RK4Fixed
                      ? "rk4"
                      : "rk45");
  kv(1, "step", fmt(s.integrator.step));
  kv(1, "rel_tol", fmt(s.integrator.rel_tol));
  kv(1, "abs_tol", fmt(s.integrator.abs_tol));
  kv(1, "min_step", fmt(s.integrator.min_step));
  kv(1, "max_step", fmt(s.integrator.max_step));
  kb(1, "nonneg_floor", s.integrator.nonneg_floor);
  kv(1, "output_dt", fmt(s.integrator.output_dt));
  line(0, "}");

  line(0, "analysis {");
  kv(1, "clearance_threshold", fmt(s.analysis.clearance_threshold));
  kv(1, "relapse_factor", fmt(s.analysis.relapse_factor));
  line(0, "}");

  if (s.certificate) {
    const CertificateSpec& c = *s.certificate;
    line(0, "certificate {");
    if (c.a) kv(1, "a", fmt(*c.a));
    ka(1, "k", c.k);
    ka(1, "xi", c.xi);
    if (c.region) {
      line(1, "region {");
      kv(2, "x1_lo", fmt(c.region->x1_lo));
      kv(2, "x1_hi", fmt(c.region->x1_hi));
      kv(2, "z2_lo", fmt(c.region->z2_lo));
      kv(2, "z2_hi", fmt(c.region->z2_hi));
      line(1, "}");
    }
    ka(1, "u_bound", c.u_bound);
    line(0, "}");
  }
  return o;
}

ResolvedCertificate resolve_certificate(const ScenarioFile& s,
                                        std::optional<std::uint64_t> seed) {
  if (s.law.kind != ControlLaw::Kind::Backstepping)
    throw ScenarioError("certificate: only valid when law.kind is backstepping");
  const CertificateSpec spec = s.certificate.value_or(CertificateSpec{});
  const ModelParams& p = s.params;
  const double a = s.law.gain;

  CertifiedRegion region;
  if (spec.region) {
    region = *spec.region;
  } else {
    double z0 = std::abs(z2(p, a, s.initial));
    region = {0.0, s.initial.x1, -z0, z0};
  }

  double u_bound = 0.0;
  if (spec.u_bound) {
    u_bound = *spec.u_bound;
  } else {
    // Largest non-active pool the schedule can set up, or the pool the
    // controlled rest point settles at, whichever is bigger.
    double pool = s.initial.x3;
    for (const DoseEvent& ev : s.events) pool += ev.delta.x3;
    double settled = 0.0;
    if (p.mu > 0.0)
      settled = controlled_equilibrium(p, tau_from_a(p, a)).point.x3;
    u_bound = 1.1 * std::max(pool, std::max(settled, 0.0));
  }

  KEstimateOptions opts;
  opts.jitter_seed = seed;

  double k = 0.0, xi = 0.0;
  if (spec.k && spec.xi) {
    k = *spec.k;
    xi = *spec.xi;
  } else if (spec.k) {
    k = *spec.k;
    xi = select_xi(p, a, k);
  } else if (spec.xi) {
    xi = *spec.xi;
    k = estimate_k(p, make_design(p, a, 0.0, xi), region, u_bound, opts);
  } else {
    // Joint selection: alternate the sampled bound and the margin rule. The
    // bracket grows with xi and xi grows with k^2, so this recursion only
    // settles on small regions; blowup is reported, not papered over.
    double xi_cur = 1.0;
    double k_cur = 0.0;
    bool converged = false;
    for (int it = 0; it < 32; ++it) {
      double k_new =
          estimate_k(p, make_design(p, a, 0.0, xi_cur), region, u_bound, opts);
      if (!std::isfinite(k_new) || k_new > 1e12)
        throw ScenarioError(
            "certificate.k: automatic k/xi selection diverged over this "
            "region; pin k or xi");
      double xi_new = select_xi(p, a, k_new);
      if (std::abs(k_new - k_cur) <= 1e-9 * std::max(1.0, std::abs(k_new)) &&
          std::abs(xi_new - xi_cur) <= 1e-9 * std::max(1.0, std::abs(xi_new))) {
        k_cur = k_new;
        xi_cur = xi_new;
        converged = true;
        break;
      }
      k_cur = k_new;
      xi_cur = xi_new;
    }
    if (!converged)
      throw ScenarioError(
          "certificate.k: automatic k/xi selection did not settle in 32 "
          "rounds; pin k or xi");
    k = k_cur;
    xi = xi_cur;
  }

  ResolvedCertificate out;
  out.design = make_design(p, a, k, xi);
  out.region = region;
  out.u_bound = u_bound;
  return out;
}

}  // namespace cart::cli
