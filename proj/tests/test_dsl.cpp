#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "support.hpp"
#include "veq/dsl.hpp"

#include <cmath>

using namespace veq;
using namespace veq::testing;
using dsl::Format;

namespace {

const char* kThomasFermi = R"(problem thomas_fermi
op P1 { a=0, k=1, h=1 }
op P2 { a=0, k=1, h=t^(-1/2) }
unknown y
param B
y - 1 - B*x - P1(P2(y^(3/2)))
)";

const char* kPopulation = R"(# logistic growth with memory
interval (0, 10)
op P { a=0, k=1, h=1 }
unknown u
param u0 A B C
u - u0 - A*P(u) + B*P(u^2) + C*P(u*P(u))
)";

template <class E>
int error_line(const char* src) {
  try {
    dsl::parse(src);
  } catch (const E& e) {
    return e.line;
  }
  return -1;
}

dsl::Problem scope_pq() {
  return dsl::parse(R"(op P { a=0, k=exp(-x), h=exp(t) }
op Q { a=0, k=1, h=1 }
unknown y z
0
)");
}

}  // namespace

TEST_CASE("parse: Thomas-Fermi source") {
  auto p = dsl::parse(kThomasFermi);
  CHECK(p.name == "thomas_fermi");
  REQUIRE(p.ops.declared().size() == 2);
  CHECK(p.ops.get("P2").h == X().pow(Scalar(-1, 2)));
  CHECK(p.ops.get("P1").k.is_one());
  CHECK(p.unknowns == std::vector<std::string>{"y"});
  CHECK(*p.lower_limit() == Scalar(0));
  CHECK(p.interval.lo == 0.0);
  CHECK(std::isinf(p.interval.hi));

  ir::Context f{nullptr, nullptr, 100};
  auto y = ir::OperatedExpr::unknown("y");
  auto expected = y - ir::OperatedExpr(CoefFn(1)) - ir::OperatedExpr(CoefFn::param("B") * X()) -
                  ir::bracket("P1", ir::bracket("P2", ir::OperatedExpr::unknown("y", Scalar(3, 2)), f), f);
  CHECK(p.expr == expected);
  CHECK_FALSE(p.claim.has_value());
}

TEST_CASE("parse: population model, equations and claims") {
  auto p = dsl::parse(kPopulation);
  CHECK(p.interval.hi == 10.0);
  CHECK(p.params.size() == 4);
  CHECK(p.expr.terms().size() == 5);

  auto q = dsl::parse("op P { a=1, k=x, h=1 }\nunknown y\ny = 1 + P(y)\nclaim y - 1 - x*Int_P[ y ]\n");
  CHECK(p.anchor() == 0.0);
  CHECK(q.anchor() == 1.0);
  REQUIRE(q.claim.has_value());
  CHECK(q.expr == dsl::parse_expr("y - 1 - P(y)", q));
  CHECK(q.claim->terms().size() == 3);
}

TEST_CASE("parse: two-variable kernels separate") {
  auto p = dsl::parse("op P { a=0, K=exp(-x+t) }\nop Q { a=0, K=2*x*t^2 }\nunknown y\nP(y)\n");
  CHECK(p.ops.get("P").k == CoefFn::exp(-X()));
  CHECK(p.ops.get("P").h == CoefFn::exp(X()));
  CoefFn kq = p.ops.get("Q").k * p.ops.get("Q").h;
  CHECK(kq == 2 * X().pow(3));
}

TEST_CASE("parse errors carry positions") {
  CHECK(error_line<ParseError>("unknown y\ny + * 2\n") == 2);
  CHECK(error_line<UndeclaredSymbolError>("unknown y\n\ny + z\n") == 3);
  CHECK(error_line<UndeclaredSymbolError>("unknown y\nR(y)\n") == 2);
  CHECK(error_line<MixedLowerLimitError>("op P {a=0,k=1,h=1}\nop Q {a=1,k=1,h=1}\nunknown y\ny\n") == 2);
  CHECK(error_line<NonSeparableKernelError>("op P {a=0,k=t,h=1}\nunknown y\ny\n") == 1);
  CHECK(error_line<NonSeparableKernelError>("\nop P {a=0,k=1,h=x*t}\nunknown y\ny\n") == 2);
  CHECK(error_line<NonSeparableKernelError>("op P {a=0,K=exp(x*t)}\nunknown y\ny\n") == 1);
  CHECK(error_line<NonSeparableKernelError>("op P {a=0,K=x+t}\nunknown y\ny\n") == 1);
  CHECK(error_line<ParseError>("unknown y\n") > 0);
  CHECK(error_line<ParseError>("unknown y\ny\ny\n") == 3);
  CHECK(error_line<ParseError>("unknown y x\ny\n") == 1);
  CHECK(error_line<ParseError>("unknown y\ny/y\n") == 2);
  CHECK(error_line<ParseError>("unknown y\ny^(-1)\n") == 2);

  try {
    dsl::parse("unknown y\ny + w\n");
    FAIL("expected an error");
  } catch (const UndeclaredSymbolError& e) {
    CHECK(e.col == 5);
    CHECK(std::string(e.what()).find("2:5:") == 0);
  }
}

TEST_CASE("render: examples") {
  // word x ⊗ (P, y) reads back as x · ρ̌_P(y)
  shuffle::TensorWord w{CoefPoly(X()), {{"P", CoefPoly::unknown("y")}}};
  shuffle::TensorExpr t(w);
  CHECK(dsl::render(t) == "x * Int_P[ y ]");
  CHECK(dsl::render(t, Format::Latex) == "x \\int_{a}^{x} h_{P} k_{P}\\, y(t)\\,dt");

  auto p = dsl::parse(kThomasFermi);
  dsl::RenderOptions opt{&p.ops};
  shuffle::TensorWord w2{CoefPoly(X()), {{"P2", CoefPoly::unknown("y", Scalar(3, 2))}}};
  CHECK(dsl::render(shuffle::TensorExpr(w2), Format::Latex, opt) ==
        "x \\int_{0}^{x} \\frac{1}{t^{1/2}} y(t)^{3/2}\\,dt");

  CHECK(dsl::render(CoefFn(Scalar(-3, 2)) * X().pow(Scalar(-1, 2))) == "-3/2/x^(1/2)");
  CHECK(dsl::render(X() * X() + 1) == "1 + x^2");
  CHECK(dsl::render(CoefFn::exp(-X()) * CoefFn::param("B")) == "B*exp(-x)");
  CHECK(dsl::render(CoefFn::exp(-X()), Format::Latex) == "e^{-x}");
  CHECK(dsl::render(CoefFn(Scalar(1, 2)) * X(), Format::Latex) == "\\frac{1}{2} x");
  CHECK(dsl::render(ir::OperatedExpr()) == "0");

  auto e = dsl::parse_expr("-(1 + x)*y - 2*P1(y*P2(y)) + x", p);
  CHECK(dsl::parse_expr(dsl::render(e), p) == e);
}

TEST_CASE("render: parse(render(e)) = e on random expressions") {
  auto scope = scope_pq();
  RandomSpec s;
  s.ops = {"P", "Q", "Int_P"};
  s.max_depth = 3;
  Rng r(11);
  for (int i = 0; i < 200; ++i) {
    auto e = random_operated(r, s, s.max_depth, i % 2 == 0);
    std::string text = dsl::render(e);
    auto back = dsl::parse_expr(text, scope);
    CHECK_MESSAGE(back == e, text);
  }
}

TEST_CASE("json: loss-free roundtrip") {
  RandomSpec s;
  s.ops = {"P", "Q", "Int_Q"};
  Rng r(5);
  for (int i = 0; i < 100; ++i) {
    auto e = random_operated(r, s, 3, true);
    auto j = nlohmann::json::parse(dsl::render(e, Format::Json));
    CHECK(dsl::operated_from_json(j) == e);

    auto t = random_tensor(r, s, 4, 3);
    CHECK(dsl::tensor_from_json(dsl::to_json(t)) == t);
  }
  CoefFn odd = CoefFn::integral(Scalar(0), CoefFn::exp(X() * X())) * CoefFn::sin(X()) + CoefFn::param("B", 0.25);
  auto jo = dsl::to_json(odd);
  CHECK(dsl::coef_from_json(jo) == odd);
  CHECK(dsl::coef_from_json(jo).probe() == 0.0);  // sums carry no probe
  CHECK(jo["kind"] == "sum");
  CHECK(dsl::to_json(CoefFn(Scalar(3, 2)))["value"] == "3/2");
}

TEST_CASE("parse_function and formats") {
  CHECK(dsl::parse_function("t^(-1/2)") == X().pow(Scalar(-1, 2)));
  CHECK(dsl::parse_function("sqrt(x)*exp(2*x)/exp(x)") == X().pow(Scalar(1, 2)) * CoefFn::exp(X()));
  CHECK(dsl::parse_function("A*x", {"A"}) == CoefFn::param("A") * X());
  CHECK_THROWS_AS(dsl::parse_function("A*x"), UndeclaredSymbolError);
  CHECK(dsl::parse_format("latex") == Format::Latex);
  CHECK_FALSE(dsl::parse_format("yaml").has_value());
}
