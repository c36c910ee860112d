#include "veq/dsl.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace veq::dsl {

using ir::OperatedExpr;
using ir::OperatedMonomial;
using coef::Kind;
using coef::VarMonomial;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Lexer

enum class Tok { Ident, Number, Sym, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  int line = 0;
  int col = 0;
  bool bol = false;  // first token on its line
};

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  bool bol = true;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
        bol = true;
      } else {
        ++col;
      }
    }
  };
  while (i < src.size()) {
    char c = src[i];
    if (c == '#') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    Token t;
    t.line = line;
    t.col = col;
    t.bol = bol;
    std::size_t j = i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      t.kind = Tok::Ident;
    } else if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      while (j < src.size() && (std::isdigit(static_cast<unsigned char>(src[j])) || src[j] == '.')) ++j;
      t.kind = Tok::Number;
    } else if (std::string_view("+-*/^()[]{},=").find(c) != std::string_view::npos) {
      j = i + 1;
      t.kind = Tok::Sym;
    } else {
      throw ParseError(std::string("syntax error: unexpected character '") + c + "'", line, col);
    }
    t.text = std::string(src.substr(i, j - i));
    bol = false;
    advance(j - i);
    out.push_back(std::move(t));
  }
  Token end;
  end.line = line;
  end.col = col;
  end.bol = true;
  out.push_back(end);
  return out;
}

// ---------------------------------------------------------------------------
// Syntax tree

struct Ast {
  enum K { Num, Name, Call, Index, Neg, Add, Sub, Mul, Div, Pow } k = Num;
  Scalar num;
  std::string name;
  std::vector<Ast> kids;
  int line = 0;
  int col = 0;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  bool at_end() const { return peek().kind == Tok::End; }
  bool is_sym(const char* s) const { return peek().kind == Tok::Sym && peek().text == s; }
  bool is_ident(const char* s) const { return peek().kind == Tok::Ident && peek().text == s; }

  [[noreturn]] void fail(const std::string& what, const Token& t) const {
    std::string got = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
    throw ParseError("syntax error: expected " + what + ", got " + got, t.line, t.col);
  }
  const Token& expect_sym(const char* s) {
    if (!is_sym(s)) fail(std::string("'") + s + "'", peek());
    return next();
  }
  const Token& expect_ident(const char* what = "a name") {
    if (peek().kind != Tok::Ident) fail(what, peek());
    return next();
  }

  Ast expr() {
    Ast lhs = term();
    while (is_sym("+") || is_sym("-")) {
      const Token& op = next();
      Ast rhs = term();
      lhs = binary(op.text == "+" ? Ast::Add : Ast::Sub, std::move(lhs), std::move(rhs), op);
    }
    return lhs;
  }

 private:
  static Ast binary(Ast::K k, Ast a, Ast b, const Token& at) {
    Ast n;
    n.k = k;
    n.line = at.line;
    n.col = at.col;
    n.kids.push_back(std::move(a));
    n.kids.push_back(std::move(b));
    return n;
  }

  Ast term() {
    Ast lhs = unary();
    while (is_sym("*") || is_sym("/")) {
      const Token& op = next();
      Ast rhs = unary();
      lhs = binary(op.text == "*" ? Ast::Mul : Ast::Div, std::move(lhs), std::move(rhs), op);
    }
    return lhs;
  }

  Ast unary() {
    if (is_sym("-") || is_sym("+")) {
      const Token& op = next();
      Ast inner = unary();
      if (op.text == "+") return inner;
      Ast n;
      n.k = Ast::Neg;
      n.line = op.line;
      n.col = op.col;
      n.kids.push_back(std::move(inner));
      return n;
    }
    return power();
  }

  Ast power() {
    Ast base = atom();
    if (is_sym("^")) {
      const Token& op = next();
      Ast ex = unary();  // right associative; allows x^-1
      return binary(Ast::Pow, std::move(base), std::move(ex), op);
    }
    return base;
  }

  Ast atom() {
    const Token& t = peek();
    Ast n;
    n.line = t.line;
    n.col = t.col;
    if (t.kind == Tok::Number) {
      next();
      auto v = Scalar::parse(t.text);
      if (!v) throw ParseError("syntax error: malformed number '" + t.text + "'", t.line, t.col);
      n.k = Ast::Num;
      n.num = *v;
      return n;
    }
    if (t.kind == Tok::Ident) {
      next();
      n.name = t.text;
      if (is_sym("(")) {
        next();
        n.k = Ast::Call;
        n.kids.push_back(expr());
        while (is_sym(",")) {
          next();
          n.kids.push_back(expr());
        }
        expect_sym(")");
        return n;
      }
      if (is_sym("[")) {
        next();
        n.k = Ast::Index;
        n.kids.push_back(expr());
        expect_sym("]");
        return n;
      }
      n.k = Ast::Name;
      return n;
    }
    if (is_sym("(")) {
      next();
      Ast inner = expr();
      expect_sym(")");
      return inner;
    }
    fail("an expression", t);
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Lowering

const std::set<std::string> kKeywords = {"problem", "op", "unknown", "interval", "param", "claim"};
const std::set<std::string> kBuiltins = {"exp", "sin", "cos", "sqrt", "integral", "x", "t", "inf"};

const std::string kTSentinel = "\x01t";

struct Scope {
  std::map<std::string, double> params;  // name -> probe
  std::set<std::string> unknowns;
  const coef::OpTable* ops = nullptr;
};

/// How the variable names x and t lower to coefficient functions.
struct VarRule {
  bool x_ok = true;
  bool t_ok = false;
  bool t_sentinel = false;  // t becomes an opaque marker (two-variable kernels)
  const char* why = "";     // message when a forbidden variable is used
};

[[noreturn]] void undeclared(const std::string& name, const Ast& at) {
  throw UndeclaredSymbolError("undeclared symbol '" + name + "'", at.line, at.col);
}

Scalar const_value(const CoefFn& f, const Ast& at, const char* what) {
  auto c = f.as_const();
  if (!c) throw ParseError(std::string(what) + " must be a rational constant", at.line, at.col);
  return *c;
}

CoefFn lower_coef(const Ast& a, const Scope& sc, const VarRule& vr);

CoefFn lower_builtin(const Ast& a, const Scope& sc, const VarRule& vr) {
  auto arity = [&](std::size_t n) {
    if (a.kids.size() != n)
      throw ParseError(a.name + " takes " + std::to_string(n) + " argument(s)", a.line, a.col);
  };
  if (a.name == "integral") {
    arity(2);
    Scalar lo = const_value(lower_coef(a.kids[0], sc, {}), a.kids[0], "integral lower limit");
    return CoefFn::integral(lo, lower_coef(a.kids[1], sc, {}));
  }
  arity(1);
  CoefFn arg = lower_coef(a.kids[0], sc, vr);
  if (a.name == "exp") return CoefFn::exp(arg);
  if (a.name == "sin") return CoefFn::sin(arg);
  if (a.name == "cos") return CoefFn::cos(arg);
  return arg.pow(Scalar(1, 2));  // sqrt
}

bool is_builtin_fn(const std::string& n) { return n == "exp" || n == "sin" || n == "cos" || n == "sqrt" || n == "integral"; }

CoefFn lower_coef(const Ast& a, const Scope& sc, const VarRule& vr) {
  switch (a.k) {
    case Ast::Num:
      return CoefFn(a.num);
    case Ast::Name: {
      if (a.name == "x") {
        if (!vr.x_ok) throw NonSeparableKernelError(vr.why, a.line, a.col);
        return CoefFn::x();
      }
      if (a.name == "t") {
        if (!vr.t_ok) {
          if (*vr.why) throw NonSeparableKernelError(vr.why, a.line, a.col);
          undeclared(a.name, a);
        }
        return vr.t_sentinel ? CoefFn::param(kTSentinel, 0.5) : CoefFn::x();
      }
      auto it = sc.params.find(a.name);
      if (it != sc.params.end()) return CoefFn::param(a.name, it->second);
      if (sc.unknowns.contains(a.name))
        throw ParseError("unknown '" + a.name + "' cannot appear inside a coefficient function", a.line, a.col);
      undeclared(a.name, a);
    }
    case Ast::Call:
      if (is_builtin_fn(a.name)) return lower_builtin(a, sc, vr);
      if (sc.ops && sc.ops->contains(a.name))
        throw ParseError("operator '" + a.name + "' cannot appear inside a coefficient function", a.line, a.col);
      undeclared(a.name, a);
    case Ast::Index:
      if (sc.ops && sc.ops->contains(a.name))
        throw ParseError("operator '" + a.name + "' cannot appear inside a coefficient function", a.line, a.col);
      undeclared(a.name, a);
    case Ast::Neg:
      return -lower_coef(a.kids[0], sc, vr);
    case Ast::Add:
      return lower_coef(a.kids[0], sc, vr) + lower_coef(a.kids[1], sc, vr);
    case Ast::Sub:
      return lower_coef(a.kids[0], sc, vr) - lower_coef(a.kids[1], sc, vr);
    case Ast::Mul:
      return lower_coef(a.kids[0], sc, vr) * lower_coef(a.kids[1], sc, vr);
    case Ast::Div: {
      CoefFn d = lower_coef(a.kids[1], sc, vr);
      if (d.is_zero()) throw ParseError("division by zero", a.line, a.col);
      return lower_coef(a.kids[0], sc, vr) / d;
    }
    case Ast::Pow: {
      Scalar e = const_value(lower_coef(a.kids[1], sc, {}), a.kids[1], "exponent");
      CoefFn b = lower_coef(a.kids[0], sc, vr);
      if (b.is_zero() && e.sign() <= 0) throw ParseError("zero to a non-positive power", a.line, a.col);
      return b.pow(e);
    }
  }
  undeclared(a.name, a);
}

// Two-variable kernels: the marker for t is swapped back for x.
bool mentions_marker(const CoefFn& f) {
  switch (f.kind()) {
    case Kind::Param:
      return f.name() == kTSentinel;
    case Kind::Prod:
      return std::any_of(f.factors().begin(), f.factors().end(), [](const coef::Factor& g) { return mentions_marker(g.base); });
    case Kind::Const:
    case Kind::X:
      return false;
    default:
      return std::any_of(f.args().begin(), f.args().end(), mentions_marker);
  }
}

CoefFn marker_to_x(const CoefFn& f) {
  switch (f.kind()) {
    case Kind::Param:
      return f.name() == kTSentinel ? CoefFn::x() : f;
    case Kind::Sum: {
      CoefFn s;
      for (const auto& g : f.args()) s = s + marker_to_x(g);
      return s;
    }
    case Kind::Prod: {
      CoefFn p(f.number());
      for (const auto& g : f.factors()) p = p * marker_to_x(g.base).pow(g.exponent);
      return p;
    }
    case Kind::Exp:
      return CoefFn::exp(marker_to_x(f.args()[0]));
    case Kind::Sin:
      return CoefFn::sin(marker_to_x(f.args()[0]));
    case Kind::Cos:
      return CoefFn::cos(marker_to_x(f.args()[0]));
    default:
      return f;
  }
}

/// K(x, t) = k(x) h(t) when every factor depends on one variable only;
/// exponentials of sums are split first.
std::pair<CoefFn, CoefFn> separate(const CoefFn& K, const Ast& at) {
  auto fail = [&] { throw NonSeparableKernelError("kernel does not factor as k(x)*h(t)", at.line, at.col); };
  std::vector<coef::Factor> fs;
  CoefFn k(1), h(1);
  if (K.kind() == Kind::Prod) {
    k = CoefFn(K.number());
    fs = K.factors();
  } else {
    fs.push_back({K, Scalar(1)});
  }
  for (const auto& f : fs) {
    bool hx = f.base.depends_on_x(), ht = mentions_marker(f.base);
    if (hx && ht) {
      if (f.base.kind() != Kind::Exp) fail();
      CoefFn xs, ts;
      const CoefFn& arg = f.base.args()[0];
      std::vector<CoefFn> terms = arg.kind() == Kind::Sum ? arg.args() : std::vector<CoefFn>{arg};
      for (const auto& t : terms) {
        bool tx = t.depends_on_x(), tt = mentions_marker(t);
        if (tx && tt) fail();
        if (tt) ts = ts + t;
        else xs = xs + t;
      }
      k = k * CoefFn::exp(xs).pow(f.exponent);
      h = h * CoefFn::exp(ts).pow(f.exponent);
    } else if (ht) {
      h = h * f.base.pow(f.exponent);
    } else {
      k = k * f.base.pow(f.exponent);
    }
  }
  return {k, marker_to_x(h)};
}

ir::Context formal_ctx() {
  ir::Context c;
  c.depth_cap = 1 << 20;
  return c;
}

bool is_check_name(const std::string& n) { return n.rfind(coef::kCheckPrefix, 0) == 0; }

OperatedExpr lower_operated(const Ast& a, const Scope& sc) {
  const ir::Context ctx = formal_ctx();
  switch (a.k) {
    case Ast::Num:
      return OperatedExpr(CoefFn(a.num));
    case Ast::Name:
      if (sc.unknowns.contains(a.name)) return OperatedExpr::unknown(a.name);
      if (sc.ops && sc.ops->contains(a.name))
        throw ParseError("operator '" + a.name + "' needs an argument", a.line, a.col);
      return OperatedExpr(lower_coef(a, sc, {}));
    case Ast::Call:
    case Ast::Index: {
      if (a.k == Ast::Call && is_builtin_fn(a.name)) return OperatedExpr(lower_coef(a, sc, {}));
      if (!sc.ops || !sc.ops->contains(a.name)) undeclared(a.name, a);
      if (a.k == Ast::Index && !is_check_name(a.name))
        throw ParseError("syntax error: '[' applies to Int_ operators only", a.line, a.col);
      if (a.kids.size() != 1) throw ParseError("operator '" + a.name + "' takes one argument", a.line, a.col);
      return ir::bracket(a.name, lower_operated(a.kids[0], sc), ctx);
    }
    case Ast::Neg:
      return -lower_operated(a.kids[0], sc);
    case Ast::Add:
      return lower_operated(a.kids[0], sc) + lower_operated(a.kids[1], sc);
    case Ast::Sub:
      return lower_operated(a.kids[0], sc) - lower_operated(a.kids[1], sc);
    case Ast::Mul:
      return lower_operated(a.kids[0], sc) * lower_operated(a.kids[1], sc);
    case Ast::Div: {
      OperatedExpr d = lower_operated(a.kids[1], sc);
      if (d.terms().size() != 1 || !d.terms()[0].mono.is_coefficient())
        throw ParseError("division by an expression that is not a coefficient function", a.kids[1].line, a.kids[1].col);
      CoefFn c = CoefFn(d.terms()[0].coef) * d.terms()[0].mono.head;
      return lower_operated(a.kids[0], sc).times(c.recip());
    }
    case Ast::Pow: {
      Scalar e = const_value(lower_coef(a.kids[1], sc, {}), a.kids[1], "exponent");
      OperatedExpr b = lower_operated(a.kids[0], sc);
      if (b.is_zero()) return e.sign() > 0 ? b : throw ParseError("zero to a non-positive power", a.line, a.col);
      if (b.terms().size() == 1 && b.terms()[0].mono.brackets.empty()) {
        const auto& t = b.terms()[0];
        if (!t.mono.vars.empty() && e.sign() <= 0)
          throw ParseError("unknowns take positive exponents only", a.line, a.col);
        CoefFn c = (CoefFn(t.coef) * t.mono.head).pow(e);
        return OperatedExpr(CoefPoly(c, t.mono.vars.pow(e)));
      }
      auto n = e.to_long();
      if (!e.is_integer() || !n || *n < 0)
        throw ParseError("sums and operator terms take nonnegative integer exponents only", a.line, a.col);
      return b.pow(*n);
    }
  }
  undeclared(a.name, a);
}

void check_fresh(const std::string& name, const Token& at, const Scope& sc, const coef::OpTable& ops) {
  if (kKeywords.contains(name) || kBuiltins.contains(name))
    throw ParseError("'" + name + "' is reserved", at.line, at.col);
  if (is_check_name(name)) throw ParseError("names starting with Int_ are reserved", at.line, at.col);
  if (sc.params.contains(name) || sc.unknowns.contains(name) || ops.contains(name))
    throw ParseError("'" + name + "' is already declared", at.line, at.col);
}

double parse_bound(Parser& p) {
  bool neg = false;
  if (p.is_sym("-")) {
    p.next();
    neg = true;
  } else if (p.is_sym("+")) {
    p.next();
  }
  const Token& t = p.peek();
  double v;
  if (t.kind == Tok::Ident && (t.text == "inf" || t.text == "infinity")) {
    p.next();
    v = std::numeric_limits<double>::infinity();
  } else if (t.kind == Tok::Number) {
    p.next();
    auto q = Scalar::parse(t.text);
    if (!q) throw ParseError("syntax error: malformed number '" + t.text + "'", t.line, t.col);
    Scalar s = *q;
    if (p.is_sym("/")) {
      p.next();
      const Token& d = p.peek();
      if (d.kind != Tok::Number) p.fail("a number", d);
      p.next();
      auto dq = Scalar::parse(d.text);
      if (!dq || dq->is_zero()) throw ParseError("bad denominator", d.line, d.col);
      s = s / *dq;
    }
    v = s.to_double();
  } else {
    p.fail("a number or inf", t);
  }
  return neg ? -v : v;
}

Problem parse_tokens(std::vector<Token> toks) {
  Parser p(std::move(toks));
  Problem prob;
  Scope sc;
  sc.ops = &prob.ops;
  bool have_interval = false;
  std::optional<Scalar> lower;

  auto end_of_statement = [&](const char* what) {
    if (!p.at_end() && !p.peek().bol) p.fail(std::string("end of line after ") + what, p.peek());
  };

  if (p.is_ident("problem")) {
    p.next();
    prob.name = p.expect_ident("a problem name").text;
    end_of_statement("the problem name");
  }

  while (!p.at_end()) {
    const Token& kw = p.peek();
    if (kw.kind != Tok::Ident || !kKeywords.contains(kw.text) || kw.text == "claim")
      break;
    if (kw.text == "problem") throw ParseError("syntax error: the problem header must come first", kw.line, kw.col);
    p.next();
    if (kw.text == "unknown") {
      if (p.at_end() || p.peek().bol) p.fail("an unknown name", p.peek());
      while (!p.at_end() && !p.peek().bol) {
        const Token& n = p.expect_ident("an unknown name");
        check_fresh(n.text, n, sc, prob.ops);
        sc.unknowns.insert(n.text);
        prob.unknowns.push_back(n.text);
        if (p.is_sym(",")) p.next();
      }
    } else if (kw.text == "param") {
      if (p.at_end() || p.peek().bol) p.fail("a parameter name", p.peek());
      while (!p.at_end() && !p.peek().bol) {
        const Token& n = p.expect_ident("a parameter name");
        check_fresh(n.text, n, sc, prob.ops);
        double probe = CoefFn::param(n.text).probe();
        if (p.is_sym("=")) {
          p.next();
          probe = parse_bound(p);
          if (!std::isfinite(probe)) throw ParseError("parameter probe must be finite", n.line, n.col);
        }
        sc.params[n.text] = probe;
        prob.params.push_back(n.text);
        if (p.is_sym(",")) p.next();
      }
    } else if (kw.text == "interval") {
      if (have_interval) throw ParseError("interval declared twice", kw.line, kw.col);
      have_interval = true;
      const Token& open = p.peek();
      if (!(p.is_sym("(") || p.is_sym("["))) p.fail("'(' or '['", open);
      p.next();
      prob.interval.lo_open = open.text == "(";
      prob.interval.lo = parse_bound(p);
      p.expect_sym(",");
      prob.interval.hi = parse_bound(p);
      const Token& close = p.peek();
      if (!(p.is_sym(")") || p.is_sym("]"))) p.fail("')' or ']'", close);
      p.next();
      prob.interval.hi_open = close.text == ")";
      if (!(prob.interval.lo < prob.interval.hi)) throw ParseError("empty interval", open.line, open.col);
      end_of_statement("the interval");
    } else {  // op
      const Token& n = p.expect_ident("an operator name");
      check_fresh(n.text, n, sc, prob.ops);
      p.expect_sym("{");
      std::optional<Scalar> a;
      std::optional<CoefFn> k, h;
      const Token* a_tok = nullptr;
      std::optional<Ast> K;
      while (true) {
        const Token& key = p.expect_ident("a, k, h or K");
        p.expect_sym("=");
        Ast val = p.expr();
        if (key.text == "a") {
          a = const_value(lower_coef(val, sc, {false, false, false, "lower limit must be a constant"}), val, "lower limit");
          a_tok = &key;
        } else if (key.text == "k") {
          k = lower_coef(val, sc, {true, false, false, "k must depend on x only"});
        } else if (key.text == "h") {
          h = lower_coef(val, sc, {false, true, false, "h must depend on t only"});
        } else if (key.text == "K") {
          K = val;
        } else {
          throw ParseError("syntax error: unknown operator field '" + key.text + "'", key.line, key.col);
        }
        if (p.is_sym(",")) {
          p.next();
          continue;
        }
        p.expect_sym("}");
        break;
      }
      if (!a) throw ParseError("operator '" + n.text + "' needs a lower limit a=", n.line, n.col);
      if (K) {
        if (k || h) throw ParseError("give either K= or k= and h=", K->line, K->col);
        auto [kk, hh] = separate(lower_coef(*K, sc, {true, true, true, ""}), *K);
        k = kk;
        h = hh;
      }
      if (!k) k = CoefFn(1);
      if (!h) h = CoefFn(1);
      if (lower && *lower != *a)
        throw MixedLowerLimitError("operator '" + n.text + "' has lower limit " + a->str() +
                                       " but earlier operators use " + lower->str(),
                                   a_tok->line, a_tok->col);
      lower = a;
      prob.ops.add({n.text, *a, *k, *h});
      end_of_statement("the operator declaration");
    }
  }

  if (p.at_end()) throw ParseError("syntax error: missing equation", p.peek().line, p.peek().col);
  if (p.is_ident("claim")) p.fail("an equation", p.peek());
  Ast lhs = p.expr();
  prob.expr = lower_operated(lhs, sc);
  if (p.is_sym("=")) {
    p.next();
    prob.expr = prob.expr - lower_operated(p.expr(), sc);
  }
  end_of_statement("the equation");
  if (p.is_ident("claim")) {
    p.next();
    prob.claim = lower_operated(p.expr(), sc);
    end_of_statement("the claim");
  }
  if (!p.at_end()) p.fail("end of input", p.peek());

  if (!have_interval) {
    prob.interval.lo = lower ? lower->to_double() : 0.0;
    prob.interval.hi = std::numeric_limits<double>::infinity();
  }
  if (lower && (lower->to_double() < prob.interval.lo || lower->to_double() > prob.interval.hi))
    throw ParseError("lower limit " + lower->str() + " lies outside the interval", 0, 0);
  return prob;
}

Scope scope_of(const Problem& prob) {
  Scope sc;
  for (const auto& u : prob.unknowns) sc.unknowns.insert(u);
  for (const auto& n : prob.params) sc.params[n] = CoefFn::param(n).probe();
  sc.ops = &prob.ops;
  return sc;
}

// ---------------------------------------------------------------------------
// Text

struct Printed {
  std::string s;
  int prec;  // 1 sum or leading minus, 2 product, 3 power, 4 atom
};

Printed scalar_text(const Scalar& q) {
  if (q.sign() < 0) return {q.str(), 1};
  return {q.str(), q.is_integer() ? 4 : 2};
}

std::string exponent_text(const Scalar& e) {
  if (e.is_integer() && e.sign() >= 0) return "^" + e.str();
  return "^(" + e.str() + ")";
}

Printed coef_text(const CoefFn& f);

std::string wrap(const Printed& p, int need) { return p.prec >= need ? p.s : "(" + p.s + ")"; }

std::string factor_text(const coef::Factor& g, bool absolute) {
  Scalar e = absolute ? g.exponent.abs() : g.exponent;
  Printed b = coef_text(g.base);
  if (e.is_one()) return wrap(b, 3);
  return wrap(b, 4) + exponent_text(e);
}

Printed coef_text(const CoefFn& f) {
  switch (f.kind()) {
    case Kind::Const:
      return scalar_text(f.number());
    case Kind::X:
      return {"x", 4};
    case Kind::Param:
      return {f.name(), 4};
    case Kind::Sum: {
      std::string s;
      for (std::size_t i = 0; i < f.args().size(); ++i) {
        Printed t = coef_text(f.args()[i]);
        if (i == 0) s = t.s;
        else if (t.s[0] == '-') s += " - " + t.s.substr(1);
        else s += " + " + t.s;
      }
      return {s, 1};
    }
    case Kind::Prod: {
      std::vector<std::string> num, den;
      for (const auto& g : f.factors()) (g.exponent.sign() > 0 ? num : den).push_back(factor_text(g, true));
      Scalar c = f.number();
      std::string s = c.sign() < 0 ? "-" : "";
      Scalar ac = c.abs();
      std::vector<std::string> parts;
      if (!ac.is_one() || num.empty()) parts.push_back(ac.str());
      parts.insert(parts.end(), num.begin(), num.end());
      for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? "*" : "") + parts[i];
      if (den.size() == 1) s += "/" + den[0];
      else if (!den.empty()) {
        s += "/(";
        for (std::size_t i = 0; i < den.size(); ++i) s += (i ? "*" : "") + den[i];
        s += ")";
      }
      if (c.sign() < 0) return {s, 1};
      if (parts.size() == 1 && den.empty() && ac.is_one() && f.factors().size() == 1)
        return {s, f.factors()[0].exponent.is_one() ? coef_text(f.factors()[0].base).prec : 3};
      return {s, 2};
    }
    case Kind::Exp:
      return {"exp(" + coef_text(f.args()[0]).s + ")", 4};
    case Kind::Sin:
      return {"sin(" + coef_text(f.args()[0]).s + ")", 4};
    case Kind::Cos:
      return {"cos(" + coef_text(f.args()[0]).s + ")", 4};
    case Kind::Int:
      return {"integral(" + f.number().str() + ", " + coef_text(f.args()[0]).s + ")", 4};
  }
  return {"?", 4};
}

std::string vars_text(const VarMonomial& m) {
  std::string s;
  for (const auto& [v, e] : m.exponents()) {
    if (!s.empty()) s += "*";
    s += v;
    if (!e.is_one()) s += exponent_text(e);
  }
  return s;
}

std::string mono_text(const Scalar& coef, const OperatedMonomial& m, bool lone);

std::string bracket_text(const ir::Bracket& b) {
  std::string inner = mono_text(Scalar(1), *b.payload, true);
  if (is_check_name(b.op)) return b.op + "[ " + inner + " ]";
  return b.op + "(" + inner + ")";
}

/// |coef| * head * vars * brackets; the sign is handled by the caller.
std::string mono_text(const Scalar& coef, const OperatedMonomial& m, bool lone) {
  std::vector<std::string> front;
  Scalar ac = coef.abs();
  if (!ac.is_one()) front.push_back(ac.str());
  if (!m.head.is_one()) {
    Printed h = coef_text(m.head);
    bool alone = lone && coef.is_one() && m.vars.empty() && m.brackets.empty();
    front.push_back(alone ? h.s : wrap(h, 2));
  }
  std::string v = vars_text(m.vars);
  if (!v.empty()) front.push_back(v);
  std::string head;
  for (std::size_t i = 0; i < front.size(); ++i) head += (i ? "*" : "") + front[i];
  std::vector<std::string> parts;
  if (!head.empty()) parts.push_back(head);
  for (const auto& b : m.brackets) parts.push_back(bracket_text(b));
  if (parts.empty()) return "1";
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? " * " : "") + parts[i];
  return s;
}

/// Coefficient-only terms with a sum head are written term by term.
std::vector<OperatedExpr::Term> display_terms(const OperatedExpr& e, bool lone) {
  std::vector<OperatedExpr::Term> out;
  for (const auto& t : e.terms()) {
    if (!t.mono.is_coefficient() || t.mono.head.kind() != Kind::Sum || lone) {
      out.push_back(t);
      continue;
    }
    for (const auto& g : t.mono.head.args()) {
      auto [c, prim] = g.split_content();
      out.push_back({t.coef * c, OperatedMonomial(prim, {})});
    }
  }
  return out;
}

void append_terms_text(std::string& s, const OperatedExpr& e, bool lone) {
  for (const auto& t : display_terms(e, lone)) {
    std::string body = mono_text(t.coef, t.mono, lone);
    bool neg = t.coef.sign() < 0;
    if (s.empty()) s = (neg ? "-" : "") + body;
    else s += (neg ? " - " : " + ") + body;
  }
}

std::string operated_text(const OperatedExpr& e) {
  std::string s;
  append_terms_text(s, e, e.terms().size() == 1);
  return s.empty() ? "0" : s;
}

// ---------------------------------------------------------------------------
// LaTeX

std::string dummy(int depth) {
  static const char* names[] = {"x", "t", "s", "u", "v", "w"};
  if (depth < 6) return names[depth];
  return "t_{" + std::to_string(depth - 5) + "}";
}

std::string latex_name(const std::string& n) {
  std::size_t i = n.size();
  while (i > 1 && std::isdigit(static_cast<unsigned char>(n[i - 1]))) --i;
  std::string stem = n.substr(0, i), sub = n.substr(i);
  std::string out;
  for (char c : stem) out += c == '_' ? std::string("\\_") : std::string(1, c);
  if (stem.size() > 1) out = "\\mathrm{" + out + "}";
  if (!sub.empty()) out += "_{" + sub + "}";
  return out;
}

Printed scalar_latex(const Scalar& q) {
  if (q.is_integer()) return {q.str(), q.sign() < 0 ? 1 : 4};
  Scalar a = q.abs();
  std::string s = "\\frac{" + a.num().get_str() + "}{" + a.den().get_str() + "}";
  return {(q.sign() < 0 ? "-" : "") + s, q.sign() < 0 ? 1 : 2};
}

std::string latex_exponent(const Scalar& e) { return "^{" + e.str() + "}"; }

Printed coef_latex(const CoefFn& f, int depth);

std::string lwrap(const Printed& p, int need) { return p.prec >= need ? p.s : "\\left(" + p.s + "\\right)"; }

std::string factor_latex(const coef::Factor& g, int depth) {
  Scalar e = g.exponent.abs();
  if (g.base.kind() == Kind::Exp) {
    Printed arg = coef_latex(g.base.args()[0] * CoefFn(e), depth);
    return "e^{" + arg.s + "}";
  }
  Printed b = coef_latex(g.base, depth);
  if (e.is_one()) return lwrap(b, 3);
  return lwrap(b, 4) + latex_exponent(e);
}

Printed coef_latex(const CoefFn& f, int depth) {
  switch (f.kind()) {
    case Kind::Const:
      return scalar_latex(f.number());
    case Kind::X:
      return {dummy(depth), 4};
    case Kind::Param:
      return {latex_name(f.name()), 4};
    case Kind::Sum: {
      std::string s;
      for (std::size_t i = 0; i < f.args().size(); ++i) {
        Printed t = coef_latex(f.args()[i], depth);
        if (i == 0) s = t.s;
        else if (t.s[0] == '-') s += " - " + t.s.substr(1);
        else s += " + " + t.s;
      }
      return {s, 1};
    }
    case Kind::Prod: {
      std::vector<std::string> num, den;
      for (const auto& g : f.factors()) (g.exponent.sign() > 0 ? num : den).push_back(factor_latex(g, depth));
      Scalar c = f.number();
      Scalar ac = c.abs();
      std::string sign = c.sign() < 0 ? "-" : "";
      auto join = [](const std::vector<std::string>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + v[i];
        return s;
      };
      std::string body;
      if (den.empty()) {
        std::vector<std::string> parts;
        if (!ac.is_one()) parts.push_back(scalar_latex(ac).s);
        parts.insert(parts.end(), num.begin(), num.end());
        body = join(parts);
      } else {
        std::vector<std::string> top = num, bot = den;
        if (ac.num() != 1) top.insert(top.begin(), ac.num().get_str());
        if (ac.den() != 1) bot.insert(bot.begin(), ac.den().get_str());
        body = "\\frac{" + (top.empty() ? std::string("1") : join(top)) + "}{" + join(bot) + "}";
      }
      return {sign + body, c.sign() < 0 ? 1 : 2};
    }
    case Kind::Exp:
      return {"e^{" + coef_latex(f.args()[0], depth).s + "}", 4};
    case Kind::Sin:
      return {"\\sin\\left(" + coef_latex(f.args()[0], depth).s + "\\right)", 4};
    case Kind::Cos:
      return {"\\cos\\left(" + coef_latex(f.args()[0], depth).s + "\\right)", 4};
    case Kind::Int: {
      std::string v = dummy(depth + 1);
      return {"\\int_{" + scalar_latex(f.number()).s + "}^{" + dummy(depth) + "} " +
                  coef_latex(f.args()[0], depth + 1).s + "\\,d" + v,
              2};
    }
  }
  return {"?", 4};
}

std::string vars_latex(const VarMonomial& m, int depth) {
  std::string s;
  for (const auto& [v, e] : m.exponents()) {
    if (!s.empty()) s += " ";
    std::string base = latex_name(v);
    if (depth > 0) base += "(" + dummy(depth) + ")";
    s += base;
    if (!e.is_one()) s += latex_exponent(e);
  }
  return s;
}

std::string mono_latex(const Scalar& coef, const OperatedMonomial& m, int depth, const RenderOptions& opt);

std::string bracket_latex(const ir::Bracket& b, int depth, const RenderOptions& opt) {
  std::string inner = mono_latex(Scalar(1), *b.payload, depth + 1, opt);
  std::string v = dummy(depth + 1);
  std::string upper = dummy(depth);
  if (is_check_name(b.op)) {
    std::string base = b.op.substr(coef::kCheckPrefix.size());
    if (opt.ops && opt.ops->contains(b.op)) {
      const auto& spec = opt.ops->get(b.op);
      std::string w = spec.h.is_one() ? "" : lwrap(coef_latex(spec.h, depth + 1), 2) + " ";
      return "\\int_{" + scalar_latex(spec.a).s + "}^{" + upper + "} " + w + inner + "\\,d" + v;
    }
    std::string sub = latex_name(base);
    return "\\int_{a}^{" + upper + "} h_{" + sub + "} k_{" + sub + "}\\, " + inner + "\\,d" + v;
  }
  if (opt.ops && opt.ops->contains(b.op)) {
    const auto& spec = opt.ops->get(b.op);
    std::string k = spec.k.is_one() ? "" : lwrap(coef_latex(spec.k, depth), 2) + " ";
    std::string h = spec.h.is_one() ? "" : lwrap(coef_latex(spec.h, depth + 1), 2) + " ";
    return k + "\\int_{" + scalar_latex(spec.a).s + "}^{" + upper + "} " + h + inner + "\\,d" + v;
  }
  return latex_name(b.op) + "\\left[" + inner + "\\right]";
}

std::string mono_latex(const Scalar& coef, const OperatedMonomial& m, int depth, const RenderOptions& opt) {
  std::vector<std::string> parts;
  Scalar ac = coef.abs();
  if (!ac.is_one()) parts.push_back(scalar_latex(ac).s);
  if (!m.head.is_one()) parts.push_back(lwrap(coef_latex(m.head, depth), 2));
  std::string v = vars_latex(m.vars, depth);
  if (!v.empty()) parts.push_back(v);
  for (const auto& b : m.brackets) parts.push_back(bracket_latex(b, depth, opt));
  if (parts.empty()) return "1";
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? " " : "") + parts[i];
  return s;
}

void append_terms_latex(std::string& s, const OperatedExpr& e, const RenderOptions& opt) {
  for (const auto& t : display_terms(e, false)) {
    std::string body = mono_latex(t.coef, t.mono, 0, opt);
    bool neg = t.coef.sign() < 0;
    if (s.empty()) s = (neg ? "-" : "") + body;
    else s += (neg ? " - " : " + ") + body;
  }
}

// ---------------------------------------------------------------------------
// JSON

json vars_json(const VarMonomial& m) {
  json j = json::object();
  for (const auto& [v, e] : m.exponents()) j[v] = e.str();
  return j;
}

Scalar scalar_from(const json& j) {
  auto q = Scalar::parse(j.get<std::string>());
  if (!q) throw Error("malformed rational '" + j.get<std::string>() + "'");
  return *q;
}

VarMonomial vars_from(const json& j) {
  VarMonomial m;
  for (const auto& [v, e] : j.items()) m = m * VarMonomial::var(v, scalar_from(e));
  return m;
}

json mono_json(const OperatedMonomial& m) {
  json br = json::array();
  for (const auto& b : m.brackets) br.push_back({{"op", b.op}, {"payload", mono_json(*b.payload)}});
  return {{"head", to_json(m.head)}, {"vars", vars_json(m.vars)}, {"brackets", br}};
}

OperatedMonomial mono_from(const json& j) {
  std::vector<ir::Bracket> br;
  for (const auto& b : j.at("brackets"))
    br.push_back({b.at("op").get<std::string>(), std::make_shared<const OperatedMonomial>(mono_from(b.at("payload")))});
  return OperatedMonomial(coef_from_json(j.at("head")), vars_from(j.at("vars")), std::move(br));
}

void expect_kind(const json& j, const char* kind) {
  if (!j.is_object() || j.value("kind", "") != kind) throw Error(std::string("expected a JSON object of kind '") + kind + "'");
}

}  // namespace

// ---------------------------------------------------------------------------

double Problem::anchor() const {
  if (auto a = lower_limit()) return a->to_double();
  if (std::isfinite(interval.lo)) return interval.lo;
  if (std::isfinite(interval.hi)) return interval.hi - 2.0;
  return 0.0;
}

coef::Domain Problem::domain(std::uint64_t seed) const { return coef::Domain(interval, anchor(), seed); }

Problem parse(std::string_view text) { return parse_tokens(lex(text)); }

Problem parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

ir::OperatedExpr parse_expr(std::string_view text, const Problem& scope) {
  Parser p(lex(text));
  Ast a = p.expr();
  if (!p.at_end()) p.fail("end of input", p.peek());
  return lower_operated(a, scope_of(scope));
}

CoefFn parse_function(std::string_view text, const std::vector<std::string>& params) {
  Parser p(lex(text));
  Ast a = p.expr();
  if (!p.at_end()) p.fail("end of input", p.peek());
  Scope sc;
  for (const auto& n : params) sc.params[n] = CoefFn::param(n).probe();
  return lower_coef(a, sc, {true, true, false, ""});
}

std::optional<Format> parse_format(std::string_view name) {
  if (name == "text") return Format::Text;
  if (name == "latex") return Format::Latex;
  if (name == "json") return Format::Json;
  return std::nullopt;
}

std::string render(const CoefFn& f, Format fmt) {
  switch (fmt) {
    case Format::Text:
      return coef_text(f).s;
    case Format::Latex:
      return coef_latex(f, 0).s;
    case Format::Json:
      return to_json(f).dump();
  }
  return {};
}

std::string render(const CoefPoly& p, Format fmt) {
  if (fmt == Format::Json) return to_json(p).dump();
  return render(OperatedExpr(p), fmt);
}

std::string render(const ir::OperatedExpr& e, Format fmt, const RenderOptions& opt) {
  switch (fmt) {
    case Format::Text:
      return operated_text(e);
    case Format::Latex: {
      std::string s;
      append_terms_latex(s, e, opt);
      return s.empty() ? "0" : s;
    }
    case Format::Json:
      return to_json(e).dump();
  }
  return {};
}

std::string render(const shuffle::TensorExpr& e, Format fmt, const RenderOptions& opt) {
  if (fmt == Format::Json) return to_json(e).dump();
  std::string s;
  const ir::Context ctx = formal_ctx();
  std::size_t total = 0;
  std::vector<OperatedExpr> parts;
  for (const auto& w : e.words()) {
    parts.push_back(shuffle::to_operated(shuffle::TensorExpr(w), ctx));
    total += parts.back().terms().size();
  }
  for (const auto& part : parts) {
    if (fmt == Format::Text) append_terms_text(s, part, total == 1);
    else append_terms_latex(s, part, opt);
  }
  return s.empty() ? "0" : s;
}

json to_json(const CoefFn& f) {
  switch (f.kind()) {
    case Kind::Const:
      return {{"kind", "const"}, {"value", f.number().str()}};
    case Kind::X:
      return {{"kind", "x"}};
    case Kind::Param:
      return {{"kind", "param"}, {"name", f.name()}, {"probe", f.probe()}};
    case Kind::Sum: {
      json args = json::array();
      for (const auto& g : f.args()) args.push_back(to_json(g));
      return {{"kind", "sum"}, {"args", args}};
    }
    case Kind::Prod: {
      json fs = json::array();
      for (const auto& g : f.factors()) fs.push_back({{"base", to_json(g.base)}, {"exp", g.exponent.str()}});
      return {{"kind", "prod"}, {"coef", f.number().str()}, {"factors", fs}};
    }
    case Kind::Exp:
      return {{"kind", "exp"}, {"arg", to_json(f.args()[0])}};
    case Kind::Sin:
      return {{"kind", "sin"}, {"arg", to_json(f.args()[0])}};
    case Kind::Cos:
      return {{"kind", "cos"}, {"arg", to_json(f.args()[0])}};
    case Kind::Int:
      return {{"kind", "int"}, {"lower", f.number().str()}, {"integrand", to_json(f.args()[0])}};
  }
  return {};
}

json to_json(const CoefPoly& p) {
  json terms = json::array();
  for (const auto& [m, c] : p.terms()) terms.push_back({{"vars", vars_json(m)}, {"coef", to_json(c)}});
  return {{"kind", "poly"}, {"terms", terms}};
}

json to_json(const ir::OperatedExpr& e) {
  json terms = json::array();
  for (const auto& t : e.terms()) terms.push_back({{"coef", t.coef.str()}, {"mono", mono_json(t.mono)}});
  return {{"kind", "operated"}, {"terms", terms}};
}

json to_json(const shuffle::TensorExpr& e) {
  json words = json::array();
  for (const auto& w : e.words()) {
    json tail = json::array();
    for (const auto& l : w.tail) tail.push_back({{"op", l.op}, {"factor", to_json(l.factor)}});
    words.push_back({{"head", to_json(w.head)}, {"tail", tail}});
  }
  return {{"kind", "tensor"}, {"words", words}};
}

CoefFn coef_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind")) throw Error("expected a coefficient function object");
  const std::string k = j.at("kind").get<std::string>();
  if (k == "const") return CoefFn(scalar_from(j.at("value")));
  if (k == "x") return CoefFn::x();
  if (k == "param") return CoefFn::param(j.at("name").get<std::string>(), j.at("probe").get<double>());
  if (k == "sum") {
    CoefFn s;
    for (const auto& a : j.at("args")) s = s + coef_from_json(a);
    return s;
  }
  if (k == "prod") {
    CoefFn p(scalar_from(j.at("coef")));
    for (const auto& g : j.at("factors")) p = p * coef_from_json(g.at("base")).pow(scalar_from(g.at("exp")));
    return p;
  }
  if (k == "exp") return CoefFn::exp(coef_from_json(j.at("arg")));
  if (k == "sin") return CoefFn::sin(coef_from_json(j.at("arg")));
  if (k == "cos") return CoefFn::cos(coef_from_json(j.at("arg")));
  if (k == "int") return CoefFn::integral(scalar_from(j.at("lower")), coef_from_json(j.at("integrand")));
  throw Error("unknown coefficient kind '" + k + "'");
}

CoefPoly poly_from_json(const json& j) {
  expect_kind(j, "poly");
  CoefPoly p;
  for (const auto& t : j.at("terms")) p = p + CoefPoly(coef_from_json(t.at("coef")), vars_from(t.at("vars")));
  return p;
}

ir::OperatedExpr operated_from_json(const json& j) {
  expect_kind(j, "operated");
  std::vector<OperatedExpr::Term> terms;
  for (const auto& t : j.at("terms")) terms.push_back({scalar_from(t.at("coef")), mono_from(t.at("mono"))});
  return OperatedExpr::from_terms(std::move(terms));
}

shuffle::TensorExpr tensor_from_json(const json& j) {
  expect_kind(j, "tensor");
  std::vector<shuffle::TensorWord> ws;
  for (const auto& w : j.at("words")) {
    shuffle::TensorWord tw;
    tw.head = poly_from_json(w.at("head"));
    for (const auto& l : w.at("tail")) tw.tail.push_back({l.at("op").get<std::string>(), poly_from_json(l.at("factor"))});
    ws.push_back(std::move(tw));
  }
  return shuffle::TensorExpr::from_words(std::move(ws));
}

}  // namespace veq::dsl
