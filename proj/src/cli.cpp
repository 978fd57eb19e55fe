#include "kacrice/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "kacrice/crn.hpp"
#include "kacrice/oracle.hpp"
#include "kacrice/regions.hpp"

namespace kacrice {

namespace {

// Shortest text that reads back to the same double.
std::string exact(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

template <typename T>
std::string join(const std::vector<T>& v, const char* sep = " ") {
  std::ostringstream s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    s << (i ? sep : "");
    if constexpr (std::is_floating_point_v<T>)
      s << exact(v[i]);
    else
      s << v[i];
  }
  return s.str();
}

std::string num(double x, int digits = 6) {
  std::ostringstream s;
  s << std::setprecision(digits) << x;
  return s.str();
}

std::string with_hash(const std::string& lines) {
  std::string out;
  std::istringstream in(lines);
  for (std::string line; std::getline(in, line);) out += "# " + line + "\n";
  return out;
}

unsigned default_workers() {
  if (const char* env = std::getenv("KACRICE_WORKERS")) {
    try {
      const long w = std::stol(env);
      if (w >= 1) return static_cast<unsigned>(w);
    } catch (const std::exception&) {
    }
  }
  return 1;
}

/// Thrown for bad flag values; reported like any input error.
class UsageError : public Error {
 public:
  using Error::Error;
};

std::uint64_t to_count(double x, const char* flag) {
  if (!(x >= 1) || x > 1.8e19) throw UsageError(std::string(flag) + " must be at least 1");
  return static_cast<std::uint64_t>(std::llround(x));
}

ParametrizedSystem load_system(const RunConfig& cfg) {
  ParametrizedSystem sys = read_system_file(cfg.input);
  if (!cfg.box.empty()) {
    if (cfg.box.size() != 2 * sys.space.m())
      throw UsageError("--box needs " + std::to_string(sys.space.m()) + " lo,hi pairs");
    for (std::size_t i = 0; i < sys.space.m(); ++i) sys.param_box[i] = {cfg.box[2 * i], cfg.box[2 * i + 1]};
    sys.validate();
  }
  if (!cfg.linear.empty()) sys.linear_params = cfg.linear;
  if (sys.linear_params.empty()) throw UsageError("no linear parameters: pass --linear or add a 'linear:' line");
  return sys;
}

StoppingRule make_rule(const RunConfig& cfg) {
  StoppingRule rule;
  rule.rel_err = cfg.rel_err;
  rule.plausible_lo = cfg.min_plausible;
  rule.plausible_hi = cfg.max_plausible;
  rule.max_n = to_count(cfg.max_n, "--max-n");
  rule.validate();
  return rule;
}

RunOptions make_options(const RunConfig& cfg) {
  RunOptions o;
  o.seed = cfg.seed;
  o.workers = cfg.workers;
  o.antithetic = cfg.antithetic;
  return o;
}

ClassifyOptions make_classify(const RunConfig& cfg) {
  ClassifyOptions c;
  c.m_min = cfg.m_min;
  c.m_max = cfg.m_max;
  if (cfg.mode == "crn")
    c.mode = Mode::Crn;
  else if (cfg.mode == "general")
    c.mode = Mode::General;
  else
    throw UsageError("--mode must be crn or general");
  c.tol = cfg.tol;
  c.validate();
  return c;
}

std::size_t axis_index(const VarSpace& space, const std::string& name) {
  const auto k = space.k_names();
  for (std::size_t i = 0; i < k.size(); ++i)
    if (k[i] == name) return i;
  try {
    std::size_t used = 0;
    const unsigned long i = std::stoul(name, &used);
    if (used == name.size() && i < space.m()) return i;
  } catch (const std::exception&) {
  }
  throw UsageError("unknown parameter '" + name + "'");
}

/// Bisection limits from --depth, else from --delta.
std::vector<int> limits_for(const RunConfig& cfg, const Box& box) {
  if (!cfg.depth.empty()) {
    if (cfg.depth.size() != box.size()) throw UsageError("--depth needs one value per parameter");
    for (int d : cfg.depth)
      if (d < 0) throw UsageError("--depth values must be nonnegative");
    return cfg.depth;
  }
  if (cfg.delta.size() != box.size()) throw UsageError("pass --delta or --depth with one value per parameter");
  for (double d : cfg.delta)
    if (!(d > 0)) throw UsageError("--delta values must be positive");
  return depth_limits(box, cfg.delta);
}

BoxEstimator box_estimator(const RunConfig& cfg, const ParametrizedSystem& sys) {
  return make_box_estimator(sys, sys.linear_params, make_rule(cfg), make_options(cfg), cfg.sigma,
                            to_count(cfg.max_n_per_box, "--max-n-per-box"));
}

std::string box_string(const Box& b) {
  std::string s;
  for (std::size_t i = 0; i < b.size(); ++i)
    s += (i ? "x" : "") + std::string("[") + num(b[i].lo) + "," + num(b[i].hi) + "]";
  return s;
}

int exit_for(Status s) {
  switch (s) {
    case Status::Converged:
      return kExitOk;
    case Status::RampFailed:
      return kExitRampFailed;
    case Status::CapReached:
      return kExitCapReached;
  }
  return kExitOk;
}

/// Writes to --output or to `out`.
void emit(const RunConfig& cfg, const std::string& text, std::ostream& out) {
  if (cfg.output.empty() || cfg.output == "-") {
    out << text;
    return;
  }
  std::ofstream f(cfg.output, std::ios::binary);
  if (!f) throw UsageError("cannot write '" + cfg.output + "'");
  f << text;
}

}  // namespace

std::string RunConfig::echo() const {
  std::ostringstream s;
  s << "kacrice " << command << "\n";
  s << "input = " << input << "\n";
  s << "seed = " << seed << "\n";
  s << "workers = " << workers << "\n";
  if (command == "crn-reduce") {
    if (!columns.empty()) s << "columns = " << join(columns) << "\n";
    if (!box.empty()) s << "box = " << join(box) << "\n";
    return s.str();
  }
  s << "rel-err = " << exact(rel_err) << "\n";
  s << "min-plausible = " << (min_plausible ? exact(*min_plausible) : "default") << "\n";
  s << "max-plausible = " << (max_plausible ? exact(*max_plausible) : "default") << "\n";
  s << "max-n = " << exact(max_n) << "\n";
  s << "antithetic = " << (antithetic ? "true" : "false") << "\n";
  s << "sigma = " << (sigma ? exact(*sigma) : "uniform") << "\n";
  s << "linear = " << (linear.empty() ? "file" : join(linear)) << "\n";
  s << "box = " << (box.empty() ? "file" : join(box)) << "\n";
  if (command == "oracle") s << "oracle-n = " << exact(oracle_n) << "\n";
  if (command == "partition" || command == "search") {
    s << "max-n-per-box = " << exact(max_n_per_box) << "\n";
    if (!grid.empty()) s << "grid = " << join(grid) << "\n";
    if (!delta.empty()) s << "delta = " << join(delta) << "\n";
    if (!depth.empty()) s << "depth = " << join(depth) << "\n";
    s << "mmin = " << exact(m_min) << "\n";
    s << "mmax = " << exact(m_max) << "\n";
    s << "mode = " << mode << "\n";
    s << "tol = " << exact(tol) << "\n";
    if (command == "search") s << "keep-both = " << (keep_both ? "true" : "false") << "\n";
    if (command == "partition") {
      s << "format = " << format << "\n";
      if (!axes.empty()) s << "axes = " << join(axes) << "\n";
    }
  }
  return s.str();
}

int cmd_integrate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const ParametrizedSystem sys = load_system(cfg);
  const IntegrandSpec spec = make_integrand_spec(sys, sys.linear_params, sys.param_box, cfg.sigma);
  const IntegrationResult res = run_integration(spec, make_rule(cfg), make_options(cfg));
  for (const auto& w : res.warnings) err << "warning: " << w << "\n";

  const Estimate& e = res.estimate;
  std::ostringstream s;
  s << with_hash(cfg.echo());
  for (const auto& w : res.warnings) s << "# warning: " << w << "\n";
  s << "r_hat,stderr,n,status,seconds,singular\n";
  s << std::setprecision(17) << e.value << "," << e.std_error << "," << e.n << "," << to_string(e.status) << ","
    << std::setprecision(4) << res.seconds << "," << res.singular << "\n";
  emit(cfg, s.str(), out);
  err << "r_hat = " << num(e.value) << " +- " << num(e.std_error, 3) << " (N = " << e.n << ", "
      << to_string(e.status) << ")\n";
  return exit_for(e.status);
}

int cmd_partition(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const ParametrizedSystem sys = load_system(cfg);
  const ClassifyOptions copts = make_classify(cfg);
  const BoxEstimator est = box_estimator(cfg, sys);

  std::vector<BoxReport> reports;
  if (!cfg.grid.empty()) {
    if (cfg.grid.size() != sys.space.m()) throw UsageError("--grid needs one count per parameter");
    for (int c : cfg.grid)
      if (c < 1) throw UsageError("--grid counts must be positive");
    reports = grid_partition(sys.param_box, cfg.grid, est, copts);
  } else {
    reports = bisect_partition(sys.param_box, limits_for(cfg, sys.param_box), est, copts);
  }

  int code = kExitOk;
  for (const auto& r : reports) {
    if (!r.error.empty()) {
      err << "warning: box " << box_string(r.box) << ": " << r.error << "\n";
      code = kExitRampFailed;
    } else if (r.est.status == Status::RampFailed) {
      code = kExitRampFailed;
    } else if (r.est.status == Status::CapReached && code == kExitOk) {
      code = kExitCapReached;
    }
  }

  if (cfg.format == "csv") {
    emit(cfg, export_csv(reports, sys.space.k_names(), cfg.echo()), out);
  } else if (cfg.format == "ppm") {
    std::array<std::size_t, 2> axes{0, 1};
    if (!cfg.axes.empty()) {
      if (cfg.axes.size() != 2) throw UsageError("--axes needs two parameters");
      axes = {axis_index(sys.space, cfg.axes[0]), axis_index(sys.space, cfg.axes[1])};
    } else if (sys.space.m() < 2) {
      throw UsageError("ppm output needs two parameters");
    }
    std::string ppm = export_ppm(reports, axes, cfg.m_min, cfg.m_max);
    // Comments are legal right after the magic number.
    ppm.insert(3, with_hash(cfg.echo()));
    emit(cfg, ppm, out);
  } else {
    throw UsageError("--out must be csv or ppm");
  }

  std::size_t counts[3] = {0, 0, 0};
  for (const auto& r : reports) ++counts[static_cast<int>(r.cls)];
  err << reports.size() << " boxes: " << counts[0] << " AllMin, " << counts[1] << " AllMax, " << counts[2]
      << " Mixed\n";
  return code;
}

int cmd_search(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const ParametrizedSystem sys = load_system(cfg);
  const ClassifyOptions copts = make_classify(cfg);
  const auto res = search_max(sys.param_box, limits_for(cfg, sys.param_box), box_estimator(cfg, sys), copts,
                              cfg.keep_both ? SearchMode::KeepBoth : SearchMode::Greedy);

  std::ostringstream s;
  s << with_hash(cfg.echo());
  std::size_t width = 7;
  for (const auto& t : res.trace) width = std::max(width, box_string(t.report.box).size());
  s << std::left << std::setw(5) << "step" << "  " << std::setw(static_cast<int>(width)) << "sub-box" << "  "
    << std::setw(8) << "r_hat" << "  " << std::setw(9) << "stderr" << "  " << "chosen\n";
  int last_step = -1;
  for (const auto& t : res.trace) {
    const std::string step = t.step == last_step ? "" : std::to_string(t.step);
    last_step = t.step;
    const std::string r = t.report.error.empty() ? num(t.report.est.value, 4) : "error";
    std::ostringstream row;
    row << std::left << std::setw(5) << step << "  " << std::setw(static_cast<int>(width)) << box_string(t.report.box)
        << "  " << std::setw(8) << r << "  " << std::setw(9) << num(t.report.est.std_error, 2) << "  "
        << (t.kept ? "*" : "");
    std::string line = row.str();
    line.erase(line.find_last_not_of(' ') + 1);
    s << line << "\n";
  }
  s << "final " << box_string(res.final.box) << " r_hat " << num(res.final.est.value, 4) << " class "
    << to_string(res.final.cls) << " reached " << (res.reached ? "yes" : "no") << "\n";
  emit(cfg, s.str(), out);
  if (!res.reached) err << "search ended without reaching mmax - tol\n";
  return kExitOk;
}

int cmd_oracle(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const ParametrizedSystem sys = load_system(cfg);
  UnivariateReduction red;
  try {
    red = reduce_to_univariate(sys);
  } catch (const NotReducible& e) {
    err << "oracle unavailable: " << e.what() << "\n";
    return kExitOracleUnavailable;
  }
  const IntegrandSpec spec = make_integrand_spec(sys, sys.linear_params, sys.param_box, cfg.sigma);
  const IntegrationResult kr = run_integration(spec, make_rule(cfg), make_options(cfg));
  for (const auto& w : kr.warnings) err << "warning: " << w << "\n";
  OracleOptions oo;
  oo.seed = cfg.seed;
  oo.workers = cfg.workers;
  oo.sigma = cfg.sigma;
  const OracleResult orc = direct_expectation(sys, red, sys.param_box, to_count(cfg.oracle_n, "--oracle-n"), oo);

  const double combined = std::hypot(kr.estimate.std_error, orc.estimate.std_error);
  const double diff = kr.estimate.value - orc.estimate.value;
  const double units = combined > 0 ? std::abs(diff) / combined : (diff == 0 ? 0.0 : INFINITY);

  std::ostringstream s;
  s << with_hash(cfg.echo());
  s << "method,r_hat,stderr,n,status,seconds\n" << std::setprecision(17);
  s << "kac-rice," << kr.estimate.value << "," << kr.estimate.std_error << "," << kr.estimate.n << ","
    << to_string(kr.estimate.status) << "," << std::setprecision(4) << kr.seconds << "\n";
  s << std::setprecision(17) << "oracle," << orc.estimate.value << "," << orc.estimate.std_error << ","
    << orc.estimate.n << ",Converged," << std::setprecision(4) << orc.seconds << "\n";
  s << "# discrepancy = " << num(units, 3) << " combined stderr; rejected oracle samples = " << orc.rejected << "\n";
  emit(cfg, s.str(), out);
  return exit_for(kr.estimate.status);
}

int cmd_crn_reduce(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const ReactionNetwork net = read_network_file(cfg.input);
  std::optional<std::vector<std::size_t>> columns;
  if (!cfg.columns.empty()) columns = cfg.columns;
  std::optional<Box> box;
  if (!cfg.box.empty()) {
    if (cfg.box.size() % 2) throw UsageError("--box needs lo,hi pairs");
    Box b;
    for (std::size_t i = 0; i < cfg.box.size(); i += 2) b.push_back({cfg.box[i], cfg.box[i + 1]});
    box = b;
  }
  const ReducedSystem red = reduced_system(net, columns, box);
  emit(cfg, with_hash(cfg.echo()) + write_system(red.sys), out);
  err << red.sys.equations.size() << " equations, " << red.sys.space.m() << " parameters; linear "
      << join(red.linear_params) << "\n";
  return kExitOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  cfg.workers = default_workers();

  CLI::App app{"Expected number of positive solutions of parametrized polynomial systems", "kacrice"};
  app.require_subcommand(1);

  // Range-checked after parsing.
  std::vector<std::string> box_pairs;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("input", cfg.input, "system file")->required();
    sub->add_option("--seed", cfg.seed, "random seed")->capture_default_str();
    sub->add_option("--workers", cfg.workers, "worker threads (default: KACRICE_WORKERS or 1)");
    sub->add_option("-o,--output", cfg.output, "output path (default: standard output)");
    sub->add_option("--box", box_pairs, "parameter box as lo,hi pairs in parameter order");
  };
  auto add_rule = [&](CLI::App* sub) {
    sub->add_option("--rel-err", cfg.rel_err, "target stderr / estimate")->capture_default_str();
    sub->add_option("--min-plausible", cfg.min_plausible, "plausible interval lower end");
    sub->add_option("--max-plausible", cfg.max_plausible, "plausible interval upper end");
    sub->add_option("--max-n", cfg.max_n, "sample cap (e.g. 1e7)")->capture_default_str();
    sub->add_flag("--antithetic", cfg.antithetic, "antithetic pairs");
    sub->add_option("--sigma", cfg.sigma, "truncated normal parameters with this deviation");
    sub->add_option("--linear", cfg.linear, "linear parameters, one per equation");
  };
  auto add_regions = [&](CLI::App* sub) {
    sub->add_option("--delta", cfg.delta, "smallest box width per axis");
    sub->add_option("--depth", cfg.depth, "bisection depth per axis (overrides --delta)");
    sub->add_option("--mmin", cfg.m_min, "generic minimum solution count")->capture_default_str();
    sub->add_option("--mmax", cfg.m_max, "generic maximum solution count")->capture_default_str();
    sub->add_option("--mode", cfg.mode, "crn or general")->capture_default_str();
    sub->add_option("--tol", cfg.tol, "classification tolerance")->capture_default_str();
    sub->add_option("--max-n-per-box", cfg.max_n_per_box, "per-box sample cap")->capture_default_str();
  };

  auto* integrate = app.add_subcommand("integrate", "estimate the expected solution count over the box");
  add_common(integrate);
  add_rule(integrate);

  auto* partition = app.add_subcommand("partition", "classify sub-boxes by solution count");
  add_common(partition);
  add_rule(partition);
  add_regions(partition);
  partition->add_option("--grid", cfg.grid, "equal cells per axis instead of bisection");
  partition->add_option("--out", cfg.format, "csv or ppm")->capture_default_str();
  partition->add_option("--axes", cfg.axes, "two parameters for the ppm image");

  auto* search = app.add_subcommand("search", "bisect toward a box with the maximal count");
  add_common(search);
  add_rule(search);
  add_regions(search);
  search->add_flag("--keep-both", cfg.keep_both, "keep every half above mmin");

  auto* oracle = app.add_subcommand("oracle", "compare with direct root counting");
  add_common(oracle);
  add_rule(oracle);
  oracle->add_option("--oracle-n", cfg.oracle_n, "oracle samples")->capture_default_str();

  auto* crn = app.add_subcommand("crn", "reaction network tools");
  crn->require_subcommand(1);
  auto* reduce = crn->add_subcommand("reduce", "write the steady-state system of a network");
  add_common(reduce);
  reduce->add_option("--columns", cfg.columns, "reactions whose constants become linear");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "kacrice: " << e.what() << "\n";
    return kExitInputError;
  }

  try {
    for (const auto& pair : box_pairs) {
      const auto comma = pair.find(',');
      std::size_t a = 0, b = 0;
      if (comma == std::string::npos) throw UsageError("--box expects lo,hi but got '" + pair + "'");
      const std::string lo = pair.substr(0, comma), hi = pair.substr(comma + 1);
      cfg.box.push_back(std::stod(lo, &a));
      cfg.box.push_back(std::stod(hi, &b));
      if (a != lo.size() || b != hi.size()) throw UsageError("--box expects lo,hi but got '" + pair + "'");
    }
    if (cfg.workers < 1) throw UsageError("--workers must be at least 1");

    if (*integrate) {
      cfg.command = "integrate";
      return cmd_integrate(cfg, out, err);
    }
    if (*partition) {
      cfg.command = "partition";
      return cmd_partition(cfg, out, err);
    }
    if (*search) {
      cfg.command = "search";
      return cmd_search(cfg, out, err);
    }
    if (*oracle) {
      cfg.command = "oracle";
      return cmd_oracle(cfg, out, err);
    }
    cfg.command = "crn-reduce";
    return cmd_crn_reduce(cfg, out, err);
  } catch (const ParseError& e) {
    err << cfg.input << ":" << e.line() << ":" << e.column() << ": " << e.message() << "\n";
  } catch (const std::invalid_argument&) {
    err << "kacrice: --box values must be numbers\n";
  } catch (const std::exception& e) {
    err << "kacrice: " << (cfg.input.empty() ? "" : cfg.input + ": ") << e.what() << "\n";
  }
  return kExitInputError;
}

}  // namespace kacrice
