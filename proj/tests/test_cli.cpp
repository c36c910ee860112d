#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "json.hpp"
#include "veq/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using veq::cli::run;

namespace {

const std::string kRoot = VEQ_SOURCE_DIR;

std::string problem(const std::string& name) { return kRoot + "/problems/" + name + ".veq"; }

std::string golden(const std::string& name) {
  std::ifstream in(kRoot + "/tests/golden/" + name + ".txt");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string temp_file(const std::string& name, const std::string& body) {
  auto path = std::filesystem::temp_directory_path() / ("veq_cli_" + name + ".veq");
  std::ofstream(path) << body;
  return path.string();
}

}  // namespace

TEST_CASE("linearize: goldens") {
  auto r = call({"linearize", problem("thomas_fermi")});
  CHECK(r.code == 0);
  CHECK(r.out == golden("thomas_fermi"));

  r = call({"linearize", problem("exp_kernel")});
  CHECK(r.code == 0);
  CHECK(r.out == golden("exp_kernel"));
  CHECK(call({"linearize", "--twisted", problem("exp_kernel")}).out == golden("exp_kernel_twisted"));
  CHECK(call({"linearize", "--twisted", problem("xt_kernel")}).out == golden("xt_kernel_twisted"));

  // already operator linear: unchanged up to writing P as its conjugate (k = 1)
  CHECK(call({"linearize", problem("population")}).out == golden("population"));
}

TEST_CASE("linearize: formats") {
  auto j = nlohmann::json::parse(call({"linearize", "--format", "json", problem("thomas_fermi")}).out);
  CHECK(j["command"] == "linearize");
  CHECK(j["tensor"]["kind"] == "tensor");
  CHECK(j["tensor"]["words"].size() == 3);
  auto l = call({"linearize", "--format", "latex", problem("thomas_fermi")});
  CHECK(l.code == 0);
  CHECK(l.out.find("\\int_{0}^{x}") != std::string::npos);
  auto rd = call({"render", problem("thomas_fermi")});
  CHECK(rd.out == "y - P1(P2(y^(3/2))) - 1 - B*x\n");
}

TEST_CASE("exit codes") {
  CHECK(call({}).code == 2);
  CHECK(call({"frobnicate", problem("population")}).code == 2);
  CHECK(call({"linearize", "--format", "yaml", problem("population")}).code == 2);
  CHECK(call({"linearize", "/nonexistent/file.veq"}).code == 1);

  auto syntax = call({"linearize", temp_file("syntax", "unknown y\ny + * 2\n")});
  CHECK(syntax.code == 2);
  CHECK(syntax.err.find(":2:5: syntax error") != std::string::npos);
  CHECK(call({"render", temp_file("undeclared", "unknown y\ny + z\n")}).code == 2);
  CHECK(call({"render", temp_file("mixed", "op P {a=0,k=1,h=1}\nop Q {a=1,k=1,h=1}\nunknown y\ny\n")}).code == 2);

  CHECK(call({"linearize", problem("twist_missing")}).code == 3);
  CHECK(call({"check-mtrba", problem("twist_missing")}).code == 3);
  // k vanishes inside the interval: the sampling certificate refuses it
  auto inner = temp_file("zero_k", "interval (0, 4)\nop P {a=0,k=x-1,h=1}\nunknown y\nP(y)*P(y)\n");
  CHECK(call({"linearize", inner}).code == 3);
  CHECK(call({"linearize", "--assume-nonzero", inner}).code == 0);

  CHECK(call({"linearize", "--depth-cap", "1", problem("half_kernel")}).code == 4);
  CHECK(call({"linearize", "--depth-cap", "2", problem("half_kernel")}).code == 0);

  auto bad = call({"verify", problem("corrupted_tf"), "--assign", "y=t^2", "--at", "0.5,1,2"});
  CHECK(bad.code == 5);
  CHECK(bad.out.find("FAIL") != std::string::npos);

  auto div = temp_file("diverge", "op P {a=0,k=1,h=t^(-1)}\nunknown y\nP(y)\n");
  CHECK(call({"verify", div, "--assign", "y=1", "--at", "1"}).code == 6);
  CHECK(call({"verify", div, "--assign", "z=1"}).code == 2);
}

TEST_CASE("verify: shipped examples pass; the counterexample shows 1 vs 2/3") {
  for (const char* name : {"thomas_fermi", "exp_kernel", "xt_kernel", "population", "half_kernel"}) {
    auto r = call({"verify", problem(name)});
    CHECK_MESSAGE(r.code == 0, name << "\n" << r.out << r.err);
  }
  auto tf = call({"verify", problem("thomas_fermi"), "--assign", "y=t^2", "--at", "0.5,1,2", "--oracle", "naive"});
  CHECK(tf.code == 0);

  auto rb = call({"verify", problem("rb_counterexample"), "--at", "1"});
  CHECK(rb.code == 5);
  CHECK(rb.out.find("x=1  lhs=1  rhs=0.666666666667") != std::string::npos);
}

TEST_CASE("check-mtrba") {
  CHECK(call({"check-mtrba", problem("mtrba_family")}).code == 0);
  CHECK(call({"check-mtrba", problem("phantom_family")}).code == 0);
  CHECK(call({"check-mtrba", problem("half_kernel")}).code == 0);
  auto r = call({"check-mtrba", "--reynolds", "--json", problem("reynolds")});
  CHECK(r.code == 0);
  CHECK(r.out.find("\"check\": \"reynolds\"") != std::string::npos);
  // K = x is twisted by x/1 only when a != 0; with a = 1 it passes too
  auto shifted = temp_file("kx1", "interval (1, 3)\nop P {a=1,k=x,h=1}\nunknown y\ny\n");
  CHECK(call({"check-mtrba", shifted}).code == 0);
}

TEST_CASE("determinism and VEQ_SEED") {
  auto a = call({"verify", "--json", problem("exp_kernel")});
  auto b = call({"verify", "--json", problem("exp_kernel")});
  CHECK(a.out == b.out);
  auto c = call({"verify", "--json", "--seed", "9", problem("exp_kernel")});
  CHECK(c.out != a.out);

  setenv("VEQ_SEED", "9", 1);
  auto d = call({"verify", "--json", problem("exp_kernel")});
  auto e = call({"verify", "--json", "--seed", "42", problem("exp_kernel")});
  unsetenv("VEQ_SEED");
  CHECK(d.out == c.out);
  CHECK(e.out == c.out);  // the environment wins over --seed
  CHECK(nlohmann::json::parse(d.out)["seed"] == 9);
}
