#include "veq/cli.hpp"

#include "veq/dsl.hpp"
#include "veq/quad.hpp"
#include "veq/shuffle.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <sstream>

namespace veq::cli {

using nlohmann::json;

namespace {

struct RunConfig {
  std::string command;
  std::string path;
  std::string format = "text";
  double tol = 0.0;  // 0: the command's default
  std::uint64_t seed = kDefaultSeed;
  int depth_cap = 8;
  bool twisted = false;
  bool assume_nonzero = false;
  std::string oracle = "grid";
  bool json = false;
  bool reynolds = false;
  bool lemma = false;
  std::vector<double> at;
  std::vector<std::string> assign;
  std::size_t samples = 6;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// Fails (exit 3) when some k may vanish: the twist k(x)/k(a) must exist
/// and stay finite on the whole interval.
void certify_twists(const dsl::Problem& p, const coef::Domain& dom, const std::vector<std::string>& used,
                    bool assume_nonzero) {
  for (const auto& op : p.ops.declared()) {
    if (std::find(used.begin(), used.end(), op.name) == used.end()) continue;
    coef::twist(op);  // throws when k(a) = 0
    if (!assume_nonzero && !coef::certify_zero_free(op.k, dom))
      throw MissingTwistError("k of operator '" + op.name +
                              "' is not certified free of zeros on the interval (use --assume-nonzero to override)");
  }
}

std::vector<std::string> base_ops(const ir::OperatedExpr& e) {
  std::vector<std::string> out;
  for (const auto& op : ir::operators_in(e)) out.push_back(shuffle::letter_name(op));
  return out;
}

ir::Context make_ctx(const dsl::Problem& p, const coef::Domain& dom, const RunConfig& cfg) {
  ir::Context ctx;
  ctx.ops = &p.ops;
  ctx.dom = &dom;
  ctx.depth_cap = cfg.depth_cap;
  return ctx;
}

bool has_fractional_exponent(const ir::OperatedExpr& e);

bool mono_fractional(const ir::OperatedMonomial& m) {
  if (m.vars.has_fractional_exponent()) return true;
  for (const auto& b : m.brackets)
    if (mono_fractional(*b.payload)) return true;
  return false;
}

bool has_fractional_exponent(const ir::OperatedExpr& e) {
  for (const auto& t : e.terms())
    if (mono_fractional(t.mono)) return true;
  return false;
}

struct Sampling {
  std::vector<quad::Assignment> pool;
  std::vector<std::string> labels;
  std::vector<double> xs;
};

Sampling sampling(const dsl::Problem& p, const coef::Domain& dom, const RunConfig& cfg, bool positive_only,
                  int default_points) {
  Sampling s;
  if (!cfg.assign.empty()) {
    quad::Assignment a;
    std::string label;
    for (const auto& spec : cfg.assign) {
      auto eq = spec.find('=');
      if (eq == std::string::npos) throw ParseError("--assign expects NAME=FUNCTION, got '" + spec + "'", 0, 0);
      std::string name = spec.substr(0, eq);
      if (std::find(p.unknowns.begin(), p.unknowns.end(), name) == p.unknowns.end())
        throw UndeclaredSymbolError("--assign names an undeclared unknown '" + name + "'", 0, 0);
      a[name] = dsl::parse_function(spec.substr(eq + 1), p.params);
      label += (label.empty() ? "" : ",") + spec;
    }
    for (const auto& u : p.unknowns)
      if (!a.contains(u)) throw UnassignedUnknownError("unknown '" + u + "' has no --assign value");
    s.pool.push_back(std::move(a));
    s.labels.push_back(label);
  } else {
    s.pool = quad::pool_assignments(p.unknowns, dom, positive_only, cfg.samples, cfg.seed);
    for (const auto& a : s.pool) {
      std::string label;
      for (const auto& [u, f] : a) label += (label.empty() ? "" : ",") + u + "=" + dsl::render(f);
      s.labels.push_back(label.empty() ? "-" : label);
    }
  }
  s.xs = cfg.at.empty() ? dom.draw_points(default_points, cfg.seed) : cfg.at;
  return s;
}

void print_report(const quad::CheckReport& rep, const RunConfig& cfg, std::ostream& out,
                  const std::vector<std::string>& labels = {}) {
  auto label = [&](const std::string& l) {
    if (!labels.empty() && l.size() > 1 && l[0] == '#') {
      std::size_t i = std::stoul(l.substr(1));
      if (i < labels.size()) return labels[i];
    }
    return l;
  };
  if (cfg.json) {
    json res = json::array();
    for (const auto& r : rep.residuals)
      res.push_back({{"label", label(r.label)}, {"x", r.x}, {"lhs", r.lhs}, {"rhs", r.rhs}, {"abs_err", r.abs_err},
                     {"rel_err", r.rel_err}});
    json j = {{"command", cfg.command}, {"check", rep.name}, {"pass", rep.pass}, {"tol", rep.tol},
              {"max_abs", rep.max_abs}, {"max_rel", rep.max_rel}, {"seed", cfg.seed}, {"residuals", res}};
    out << j.dump(2) << "\n";
    return;
  }
  out << rep.name << ": " << (rep.pass ? "PASS" : "FAIL") << "  max_rel=" << num(rep.max_rel)
      << " max_abs=" << num(rep.max_abs) << " tol=" << num(rep.tol) << " checks=" << rep.residuals.size()
      << " seed=" << cfg.seed << "\n";
  for (const auto& r : rep.residuals) {
    bool bad = !(r.rel_err <= rep.tol);
    out << "  " << (bad ? "FAIL " : "ok   ") << label(r.label) << "  x=" << num(r.x) << "  lhs=" << num(r.lhs)
        << "  rhs=" << num(r.rhs) << "  rel=" << num(r.rel_err) << "\n";
  }
}

dsl::Format output_format(const RunConfig& cfg) {
  if (cfg.json) return dsl::Format::Json;
  auto f = dsl::parse_format(cfg.format);
  if (!f) throw ParseError("unknown format '" + cfg.format + "' (text, latex or json)", 0, 0);
  return *f;
}

// ---------------------------------------------------------------------------

int cmd_linearize(const RunConfig& cfg, std::ostream& out) {
  auto p = dsl::parse_file(cfg.path);
  auto dom = p.domain(cfg.seed);
  auto ctx = make_ctx(p, dom, cfg);
  certify_twists(p, dom, base_ops(p.expr), cfg.assume_nonzero);
  auto lin = shuffle::linearize(p.expr, ctx);
  dsl::Format fmt = output_format(cfg);
  dsl::RenderOptions opt{&p.ops};
  if (fmt == dsl::Format::Json) {
    json j = {{"command", "linearize"},
              {"problem", p.name},
              {"tensor", dsl::to_json(lin)},
              {"operated", dsl::to_json(shuffle::to_operated(lin, ctx, cfg.twisted))}};
    out << j.dump(2) << "\n";
  } else if (cfg.twisted) {
    out << dsl::render(shuffle::to_operated(lin, ctx, true), fmt, opt) << "\n";
  } else {
    out << dsl::render(lin, fmt, opt) << "\n";
  }
  return kOk;
}

int cmd_verify(const RunConfig& cfg, std::ostream& out) {
  auto p = dsl::parse_file(cfg.path);
  auto dom = p.domain(cfg.seed);
  auto ctx = make_ctx(p, dom, cfg);
  double tol = cfg.tol > 0 ? cfg.tol : 1e-6;
  quad::EvalConfig ec;
  ec.oracle = cfg.oracle == "naive" ? quad::Oracle::Naive : quad::Oracle::Grid;

  quad::Side rhs;
  std::string name;
  shuffle::TensorExpr lin;
  ir::OperatedExpr claim;
  if (p.claim) {
    claim = *p.claim;
    name = "verify claim";
    rhs = [&](const quad::Assignment& a, double x) { return quad::eval_operated(claim, p.ops, a, x); };
  } else {
    certify_twists(p, dom, base_ops(p.expr), cfg.assume_nonzero);
    lin = shuffle::linearize(p.expr, ctx);
    name = "verify normal form";
    rhs = [&](const quad::Assignment& a, double x) {
      return ec.oracle == quad::Oracle::Naive ? [&] {
        double s = 0.0;
        for (const auto& w : lin.words()) s += quad::eval_word_naive(w, p.ops, a, x);
        return s;
      }()
                                              : quad::eval_tensor(lin, p.ops, a, x, ec);
    };
  }
  quad::Side lhs = [&](const quad::Assignment& a, double x) { return quad::eval_operated(p.expr, p.ops, a, x); };
  auto s = sampling(p, dom, cfg, has_fractional_exponent(p.expr), 3);
  auto rep = quad::check_identity(name + (p.name.empty() ? "" : " " + p.name), lhs, rhs, s.pool, s.xs, tol);
  print_report(rep, cfg, out, s.labels);
  return rep.pass ? kOk : kVerifyFail;
}

int cmd_check_mtrba(const RunConfig& cfg, std::ostream& out) {
  auto p = dsl::parse_file(cfg.path);
  auto dom = p.domain(cfg.seed);
  double tol = cfg.tol > 0 ? cfg.tol : 1e-7;
  const auto& ops = p.ops.declared();
  if (ops.empty()) throw ParseError("check-mtrba needs at least one operator declaration", 0, 0);
  std::vector<std::string> names;
  for (const auto& op : ops) names.push_back(op.name);
  certify_twists(p, dom, names, cfg.assume_nonzero);

  auto pool = quad::test_pool(dom);
  auto xs = cfg.at.empty() ? dom.draw_points(5, cfg.seed) : cfg.at;
  quad::CheckReport all;
  all.name = "mtrba";
  all.tol = tol;
  for (const auto& a : ops)
    for (const auto& b : ops)
      for (const auto& [fn, f] : pool)
        for (const auto& [gn, g] : pool) {
          auto r = quad::check_mtrba(a, b, f, g, xs, tol);
          for (auto& res : r.residuals) res.label += " f=" + fn + " g=" + gn;
          all.merge(r);
        }
  print_report(all, cfg, out);
  bool pass = all.pass;
  if (cfg.reynolds) {
    quad::CheckReport rey;
    rey.name = "reynolds";
    rey.tol = tol;
    for (const auto& op : ops)
      for (const auto& [fn, f] : pool)
        for (const auto& [gn, g] : pool) {
          auto r = quad::check_reynolds(op, f, g, xs, tol);
          for (auto& res : r.residuals) res.label += " f=" + fn + " g=" + gn;
          rey.merge(r);
        }
    print_report(rey, cfg, out);
    pass = pass && rey.pass;
  }
  if (cfg.lemma) {
    quad::CheckReport lem;
    lem.name = "lemma";
    lem.tol = tol;
    for (const auto& [fn, f] : pool)
      for (const auto& [gn, g] : pool) {
        auto r = quad::check_lemma(ops, f, g, xs, tol);
        for (auto& res : r.residuals) res.label += " f=" + fn + " g=" + gn;
        lem.merge(r);
      }
    print_report(lem, cfg, out);
    pass = pass && lem.pass;
  }
  return pass ? kOk : kVerifyFail;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  auto p = dsl::parse_file(cfg.path);
  auto dom = p.domain(cfg.seed);
  auto s = sampling(p, dom, cfg, has_fractional_exponent(p.expr), 3);
  json rows = json::array();
  for (std::size_t i = 0; i < s.pool.size(); ++i)
    for (double x : s.xs) {
      double v = quad::eval_operated(p.expr, p.ops, s.pool[i], x);
      if (cfg.json) rows.push_back({{"assignment", s.labels[i]}, {"x", x}, {"value", v}});
      else out << s.labels[i] << "  x=" << num(x) << "  value=" << num(v) << "\n";
    }
  if (cfg.json) out << json{{"command", "eval"}, {"seed", cfg.seed}, {"values", rows}}.dump(2) << "\n";
  return kOk;
}

int cmd_render(const RunConfig& cfg, std::ostream& out) {
  auto p = dsl::parse_file(cfg.path);
  dsl::Format fmt = output_format(cfg);
  dsl::RenderOptions opt{&p.ops};
  if (fmt == dsl::Format::Json) {
    json j = {{"command", "render"}, {"problem", p.name}, {"expr", dsl::to_json(p.expr)}};
    if (p.claim) j["claim"] = dsl::to_json(*p.claim);
    out << j.dump(2) << "\n";
    return kOk;
  }
  out << dsl::render(p.expr, fmt, opt) << "\n";
  if (p.claim) out << dsl::render(*p.claim, fmt, opt) << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Symbolic linearization and numeric certification of separable Volterra equations", "veq"};
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* sub, bool numeric) {
    sub->add_option("FILE", cfg.path, "problem file")->required();
    sub->add_option("--format", cfg.format, "text, latex or json")
        ->check(CLI::IsMember({"text", "latex", "json"}));
    sub->add_flag("--json", cfg.json, "machine-readable output");
    sub->add_option("--seed", cfg.seed, "seed for sample points and pool choice (VEQ_SEED overrides)");
    sub->add_option("--depth-cap", cfg.depth_cap, "maximum operator nesting")->check(CLI::PositiveNumber);
    sub->add_flag("--twisted", cfg.twisted, "read back with twisted brackets");
    sub->add_flag("--assume-nonzero", cfg.assume_nonzero, "skip the zero-freeness scan of k");
    if (numeric) {
      sub->add_option("--tol", cfg.tol, "relative tolerance")->check(CLI::PositiveNumber);
      sub->add_option("--oracle", cfg.oracle, "grid or naive")->check(CLI::IsMember({"grid", "naive"}));
      sub->add_option("--at", cfg.at, "evaluation points")->delimiter(',');
      sub->add_option("--assign", cfg.assign, "NAME=FUNCTION of t for an unknown");
      sub->add_option("--samples", cfg.samples, "random assignments for several unknowns")
          ->check(CLI::PositiveNumber);
    }
  };
  auto* lin = app.add_subcommand("linearize", "print the operator-linear normal form");
  add_common(lin, false);
  auto* ver = app.add_subcommand("verify", "compare the equation with its normal form numerically");
  add_common(ver, true);
  auto* mt = app.add_subcommand("check-mtrba", "certify the matching twisted Rota-Baxter identities");
  add_common(mt, true);
  mt->add_flag("--reynolds", cfg.reynolds, "also check the Reynolds identity");
  mt->add_flag("--lemma", cfg.lemma, "also check the mixed-conjugate identities");
  auto* ev = app.add_subcommand("eval", "evaluate the equation's left side");
  add_common(ev, true);
  auto* rd = app.add_subcommand("render", "print the parsed equation");
  add_common(rd, false);

  std::vector<std::string> argv_s{"veq"};
  argv_s.insert(argv_s.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_s) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kOk : kParse;
  }
  if (const char* env = std::getenv("VEQ_SEED"); env && *env) {
    try {
      cfg.seed = std::stoull(env);
    } catch (const std::exception&) {
      err << "veq: VEQ_SEED must be a nonnegative integer\n";
      return kParse;
    }
  }
  cfg.command = app.get_subcommands().front()->get_name();
  if (cfg.format == "json") cfg.json = true;

  try {
    if (cfg.command == "linearize") return cmd_linearize(cfg, out);
    if (cfg.command == "verify") return cmd_verify(cfg, out);
    if (cfg.command == "check-mtrba") return cmd_check_mtrba(cfg, out);
    if (cfg.command == "eval") return cmd_eval(cfg, out);
    return cmd_render(cfg, out);
  } catch (const ParseError& e) {
    err << "veq: " << cfg.path << ":" << e.what() << "\n";
    return kParse;
  } catch (const MissingTwistError& e) {
    err << "veq: missing twist: " << e.what() << "\n";
    return kMissingTwist;
  } catch (const DepthCapError& e) {
    err << "veq: " << e.what() << "\n";
    return kDepthCap;
  } catch (const QuadratureError& e) {
    err << "veq: quadrature did not converge: " << e.what() << "\n";
    return kQuadrature;
  } catch (const UnassignedUnknownError& e) {
    err << "veq: " << e.what() << "\n";
    return kParse;
  } catch (const Error& e) {
    err << "veq: " << e.what() << "\n";
    return kError;
  }
}

}  // namespace veq::cli
