#pragma once

// Problem files and expression rendering.
//
//   problem NAME                       (optional header)
//   interval (0, inf)                  brackets select closed ends
//   op P { a=0, k=exp(-x), h=exp(t) }  or  op P { a=0, K=exp(-x+t) }
//   unknown y z
//   param B = 0.5                      (optional probe value)
//   y - 1 - B*x - P1(P2(y^(3/2)))      equation: expr or lhs = rhs
//   claim x * Int_P2[ y^(3/2) ]        (optional) asserted equal form
//
// Operator application is NAME(expr); the conjugate ρ̌ of a declared
// operator is written Int_NAME[ expr ]. Comments run from '#' to the end
// of the line.

#include "veq/coef.hpp"
#include "veq/ir.hpp"
#include "veq/shuffle.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace veq::dsl {

using coef::CoefFn;
using coef::CoefPoly;

struct Problem {
  std::string name;
  Interval interval;
  coef::OpTable ops;
  std::vector<std::string> unknowns;
  std::vector<std::string> params;
  /// lhs − rhs for an equation.
  ir::OperatedExpr expr;
  std::optional<ir::OperatedExpr> claim;

  std::optional<Scalar> lower_limit() const { return ops.lower_limit(); }
  /// Centre of the sampling window: the lower limit, else the left end.
  double anchor() const;
  coef::Domain domain(std::uint64_t seed = 42) const;
};

Problem parse(std::string_view text);
Problem parse_file(const std::string& path);

/// An expression over the symbols declared in `scope`.
ir::OperatedExpr parse_expr(std::string_view text, const Problem& scope);
/// A coefficient function of x (t is accepted as the same variable).
CoefFn parse_function(std::string_view text, const std::vector<std::string>& params = {});

enum class Format { Text, Latex, Json };
std::optional<Format> parse_format(std::string_view name);

struct RenderOptions {
  /// Supplies lower limits and kernels for LaTeX integrals.
  const coef::OpTable* ops = nullptr;
};

std::string render(const CoefFn& f, Format fmt = Format::Text);
std::string render(const CoefPoly& p, Format fmt = Format::Text);
std::string render(const ir::OperatedExpr& e, Format fmt = Format::Text, const RenderOptions& opt = {});
/// Words are read back one by one (ρ̌ brackets Int_ω) in normal-form order.
std::string render(const shuffle::TensorExpr& e, Format fmt = Format::Text, const RenderOptions& opt = {});

nlohmann::json to_json(const CoefFn& f);
nlohmann::json to_json(const CoefPoly& p);
nlohmann::json to_json(const ir::OperatedExpr& e);
nlohmann::json to_json(const shuffle::TensorExpr& e);

CoefFn coef_from_json(const nlohmann::json& j);
CoefPoly poly_from_json(const nlohmann::json& j);
ir::OperatedExpr operated_from_json(const nlohmann::json& j);
shuffle::TensorExpr tensor_from_json(const nlohmann::json& j);

}  // namespace veq::dsl
