#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "kacrice/cli.hpp"
#include "kacrice/system.hpp"

using namespace kacrice;

namespace {

std::string data(const std::string& name) { return std::string(KACRICE_DATA_DIR) + "/" + name; }

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "kacrice");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string temp_file(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << text;
  return path.string();
}

std::size_t data_rows(const std::string& csv) {
  std::size_t rows = 0;
  std::istringstream in(csv);
  for (std::string line; std::getline(in, line);)
    if (!line.empty() && line[0] != '#') ++rows;
  return rows - 1;  // header
}

}  // namespace

TEST_CASE("input errors exit with code 1") {
  const Run missing = run({"integrate", "/nonexistent/x.sys"});
  CHECK(missing.code == kExitInputError);
  CHECK(missing.err.find("cannot open") != std::string::npos);

  const std::string bad = temp_file("kacrice_bad.sys", "vars: t\nparams: k\ndomain: (0,inf)\nparambox: [0,1]\neq: k*t - (1\n");
  const Run parse = run({"integrate", bad});
  CHECK(parse.code == kExitInputError);
  CHECK(parse.err.rfind(bad + ":5:13: ", 0) == 0);

  CHECK(run({"integrate"}).code == kExitInputError);
  CHECK(run({"integrate", data("ex13.sys"), "--no-such-flag"}).code == kExitInputError);
  CHECK(run({"integrate", data("ex13.sys"), "--box", "0,1"}).code == kExitInputError);
  CHECK(run({"integrate", data("ex13.sys"), "--linear", "nope"}).code == kExitInputError);
  CHECK(run({"partition", data("degree5.sys"), "--mode", "odd", "--grid", "2", "2"}).code == kExitInputError);
}

TEST_CASE("integrate prints the config header and the estimate record") {
  const Run r = run({"integrate", data("ex13.sys"), "--max-n", "1e6"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.rfind("# kacrice integrate\n# input = " + data("ex13.sys") + "\n# seed = 1\n", 0) == 0);
  CHECK(r.out.find("# max-n = 1e+06\n") != std::string::npos);
  CHECK(r.out.find("r_hat,stderr,n,status,seconds,singular\n") != std::string::npos);
  CHECK(r.out.find(",Converged,") != std::string::npos);
}

TEST_CASE("the pathological slice fails the ramp with a scale warning") {
  const Run r = run({"integrate", data("dhk_slice.sys"), "--min-plausible", "1", "--max-plausible", "5", "--max-n",
                     "1e6"});
  CHECK(r.code == kExitRampFailed);
  CHECK(r.err.find("scale disparity") != std::string::npos);
  CHECK(r.out.find(",RampFailed,") != std::string::npos);
}

TEST_CASE("integrate reports a reached sample cap") {
  const Run r = run({"integrate", data("joshi.sys"), "--max-n", "1e3", "--rel-err", "1e-6"});
  CHECK(r.code == kExitCapReached);
}

TEST_CASE("partition writes one CSV row per grid cell, deterministically") {
  const std::vector<std::string> args{"partition", data("degree5.sys"), "--grid", "10", "10", "--mmin", "0",
                                      "--mmax", "5", "--max-n-per-box", "2e4", "--workers", "2"};
  const Run a = run(args), b = run(args);
  CHECK((a.code == kExitOk || a.code == kExitCapReached));
  CHECK(data_rows(a.out) == 100);
  CHECK(a.out == b.out);
  CHECK(a.out.rfind("# kacrice partition\n", 0) == 0);
  CHECK(a.out.find("# grid = 10 10\n") != std::string::npos);
  CHECK(a.out.find("lo_k1,hi_k1,lo_k2,hi_k2,r_hat,stderr,class,multistat,n,status\n") != std::string::npos);

  auto other = args;
  other.push_back("--seed");
  other.push_back("2");
  CHECK(run(other).out != a.out);

  const std::string ppm_path = (std::filesystem::temp_directory_path() / "kacrice_d5.ppm").string();
  auto ppm_args = args;
  for (const char* extra : {"--out", "ppm", "-o"}) ppm_args.push_back(extra);
  ppm_args.push_back(ppm_path);
  CHECK(run(ppm_args).out.empty());
  std::ifstream in(ppm_path, std::ios::binary);
  const std::string ppm((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(ppm.rfind("P6\n# kacrice partition\n", 0) == 0);
  CHECK(ppm.find("\n10 10\n255\n") != std::string::npos);
  CHECK(ppm.size() == ppm.find("\n10 10\n255\n") + 11 + 300);
}

TEST_CASE("bisection partition honours --delta") {
  const Run r = run({"partition", data("hk2.sys"), "--box", "1,3", "--box", "2,4", "--delta", "1", "1", "--mode",
                     "crn", "--max-n-per-box", "1e4"});
  CHECK(r.out.find("# delta = 1 1\n") != std::string::npos);
  CHECK(data_rows(r.out) >= 1);
  CHECK(data_rows(r.out) <= 4);
}

TEST_CASE("search prints the step table") {
  const Run r = run({"search", data("hk2.sys"), "--box", "1,3", "--box", "2,4", "--depth", "1", "1", "--mode", "crn",
                     "--max-n-per-box", "1e5"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("step   sub-box") != std::string::npos);
  CHECK(r.out.find("\n0      [1,3]x[2,4]") != std::string::npos);
  CHECK(r.out.find("[2,3]x[2,4]") != std::string::npos);
  CHECK(r.out.find("\nfinal ") != std::string::npos);
}

TEST_CASE("oracle reports both estimates or exit 4") {
  const Run r = run({"oracle", data("ex14.sys"), "--max-n", "1e5", "--oracle-n", "1e5"});
  CHECK(r.out.find("\nkac-rice,") != std::string::npos);
  CHECK(r.out.find("\noracle,") != std::string::npos);
  CHECK(r.out.find("# discrepancy = ") != std::string::npos);

  const std::string circle = temp_file("kacrice_circle.sys",
                                       "vars: x y\nparams: a b\ndomain: (0,inf) (0,inf)\nparambox: [1,2] [0,1]\n"
                                       "linear: a b\neq: x^2 + y^2 - a\neq: x^2 - y^2 - b\n");
  CHECK(run({"oracle", circle}).code == kExitOracleUnavailable);
}

TEST_CASE("crn reduce emits a parseable system") {
  const Run r = run({"crn", "reduce", data("hk.net")});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.rfind("# kacrice crn-reduce\n", 0) == 0);
  const ParametrizedSystem sys = parse_system(r.out);
  CHECK(sys.space.m() == 8);
  CHECK(sys.equations.size() == 6);
  CHECK(sys.linear_params == std::vector<std::string>{"k1", "k2", "k3", "k4", "T1", "T2"});
  CHECK(write_system(sys) == r.out.substr(r.out.find("vars:")));

  CHECK(run({"crn", "reduce", data("hk.net"), "--columns", "0", "1", "2", "5"}).code == kExitOk);
  CHECK(run({"crn", "reduce", data("hk.net"), "--columns", "0", "0", "1", "2"}).code == kExitInputError);
}
