#include "kacrice/regions.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace kacrice {

namespace {

double width(const Interval& iv) { return iv.hi - iv.lo; }

}  // namespace

std::string to_string(BoxClass c) {
  switch (c) {
    case BoxClass::AllMin:
      return "AllMin";
    case BoxClass::AllMax:
      return "AllMax";
    case BoxClass::Mixed:
      return "Mixed";
  }
  return "?";
}

void ClassifyOptions::validate() const {
  if (!(m_min <= m_max)) throw Error("m_min must not exceed m_max");
  if (!(tol > 0)) throw Error("classification tolerance must be positive");
}

Classification classify(double r, double e, const ClassifyOptions& opts) {
  Classification c;
  const double low = opts.mode == Mode::Crn ? 1.0 : opts.m_min;
  if (r + 3 * e >= opts.m_max - opts.tol && r - 3 * e >= opts.m_max - 3 * opts.tol) {
    c.cls = BoxClass::AllMax;
  } else if (r <= low + opts.tol) {
    c.cls = BoxClass::AllMin;
  }
  c.multistat = opts.mode == Mode::Crn && r > 1.0 + opts.tol;
  return c;
}

BoxEstimator make_box_estimator(const ParametrizedSystem& sys, const std::vector<std::string>& linear_params,
                                StoppingRule rule, RunOptions opts, std::optional<double> sigma,
                                std::uint64_t max_n_per_box) {
  auto dec = std::make_shared<const LinearDecomposition>(decompose_linear(sys, linear_params));
  auto compiled = std::make_shared<const CompiledDecomposition>(*dec);
  rule.max_n = std::min(rule.max_n, max_n_per_box);
  rule.validate();
  return [sys, dec, compiled, rule, opts, sigma](const Box& box, std::uint64_t id) {
    const IntegrandSpec spec = make_integrand_spec(sys, dec, compiled, box, sigma);
    RunOptions o = opts;
    o.run_id = id;
    return run_integration(spec, rule, o).estimate;
  };
}

std::vector<int> depth_limits(const Box& box, const std::vector<double>& delta) {
  if (delta.size() != box.size()) throw DimensionError("need one precision per parameter");
  std::vector<int> out;
  for (std::size_t i = 0; i < box.size(); ++i) {
    if (!(delta[i] > 0)) throw Error("precision must be positive");
    out.push_back(std::max(0, static_cast<int>(std::ceil(std::log2(width(box[i]) / delta[i])))));
  }
  return out;
}

std::array<Box, 2> bisect(const Box& box, std::size_t axis) {
  std::array<Box, 2> halves{box, box};
  const Interval& iv = box.at(axis);
  const double mid = iv.lo + (iv.hi - iv.lo) / 2;
  halves[0][axis].hi = mid;
  halves[1][axis].lo = mid;
  return halves;
}

namespace {

BoxReport evaluate(const Box& box, std::vector<int> depth, std::uint64_t id, const BoxEstimator& estimate,
                   const ClassifyOptions& opts) {
  BoxReport rep;
  rep.box = box;
  rep.depth = std::move(depth);
  rep.id = id;
  try {
    rep.est = estimate(box, id);
    const Classification c = classify(rep.est.value, rep.est.std_error, opts);
    rep.cls = c.cls;
    rep.multistat = c.multistat;
  } catch (const Error& e) {
    rep.error = e.what();
    rep.cls = BoxClass::Mixed;
  }
  return rep;
}

/// Next axis to split: (bisections so far) mod m, skipping exhausted axes.
std::optional<std::size_t> next_axis(const std::vector<int>& depth, const std::vector<int>& limits) {
  const std::size_t m = depth.size();
  int steps = 0;
  for (int d : depth) steps += d;
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t axis = (static_cast<std::size_t>(steps) + k) % m;
    if (depth[axis] < limits[axis]) return axis;
  }
  return std::nullopt;
}

}  // namespace

std::vector<BoxReport> grid_partition(const Box& box, const std::vector<int>& counts, const BoxEstimator& estimate,
                                      const ClassifyOptions& opts) {
  opts.validate();
  if (counts.size() != box.size()) throw DimensionError("need one cell count per parameter");
  std::size_t total = 1;
  for (int c : counts) {
    if (c < 1) throw Error("cell counts must be at least 1");
    total *= static_cast<std::size_t>(c);
  }
  std::vector<BoxReport> out;
  std::vector<int> index(box.size(), 0);
  for (std::size_t cell = 0; cell < total; ++cell) {
    Box b = box;
    for (std::size_t i = 0; i < box.size(); ++i) {
      const double w = width(box[i]) / counts[i];
      b[i].lo = box[i].lo + w * index[i];
      b[i].hi = index[i] + 1 == counts[i] ? box[i].hi : box[i].lo + w * (index[i] + 1);
    }
    out.push_back(evaluate(b, std::vector<int>(box.size(), 0), cell, estimate, opts));
    for (std::size_t i = box.size(); i-- > 0;) {
      if (++index[i] < counts[i]) break;
      index[i] = 0;
    }
  }
  return out;
}

std::vector<BoxReport> bisect_partition(const Box& box, const std::vector<int>& limits, const BoxEstimator& estimate,
                                        const ClassifyOptions& opts) {
  opts.validate();
  if (limits.size() != box.size()) throw DimensionError("need one depth limit per parameter");
  struct Item {
    Box box;
    std::vector<int> depth;
  };
  std::deque<Item> queue{{box, std::vector<int>(box.size(), 0)}};
  std::vector<BoxReport> out;
  std::uint64_t id = 0;
  while (!queue.empty()) {
    Item item = std::move(queue.front());
    queue.pop_front();
    BoxReport rep = evaluate(item.box, item.depth, id++, estimate, opts);
    const auto axis = next_axis(item.depth, limits);
    if (rep.cls != BoxClass::Mixed || !rep.error.empty() || !axis) {
      out.push_back(std::move(rep));
      continue;
    }
    auto halves = bisect(item.box, *axis);
    std::vector<int> depth = item.depth;
    ++depth[*axis];
    queue.push_back({std::move(halves[0]), depth});
    queue.push_back({std::move(halves[1]), depth});
  }
  return out;
}

SearchResult search_max(const Box& box, const std::vector<int>& limits, const BoxEstimator& estimate,
                        const ClassifyOptions& opts, SearchMode mode, std::uint64_t max_estimates) {
  opts.validate();
  if (limits.size() != box.size()) throw DimensionError("need one depth limit per parameter");
  const double goal = opts.m_max - opts.tol;
  std::uint64_t id = 0;
  SearchResult res;
  BoxReport first = evaluate(box, std::vector<int>(box.size(), 0), id++, estimate, opts);
  res.trace.push_back({0, first, true});
  res.final = first;
  if (first.error.empty() && first.est.value >= goal) {
    res.reached = true;
    return res;
  }
  std::vector<BoxReport> frontier{first};
  for (int step = 1; !frontier.empty() && id < max_estimates; ++step) {
    std::vector<BoxReport> children;
    for (const auto& parent : frontier) {
      const auto axis = next_axis(parent.depth, limits);
      if (!axis || id + 2 > max_estimates) continue;
      auto halves = bisect(parent.box, *axis);
      std::vector<int> depth = parent.depth;
      ++depth[*axis];
      for (auto& h : halves) children.push_back(evaluate(h, depth, id++, estimate, opts));
    }
    if (children.empty()) break;
    const std::size_t base = res.trace.size();
    for (const auto& c : children) res.trace.push_back({step, c, false});

    std::vector<BoxReport> next;
    if (mode == SearchMode::Greedy) {
      // One parent, so children are its two halves.
      const bool second = children[1].error.empty() &&
                          (!children[0].error.empty() || children[1].est.value > children[0].est.value);
      const std::size_t pick = second ? 1 : 0;
      res.trace[base + pick].kept = true;
      next.push_back(children[pick]);
    } else {
      for (std::size_t i = 0; i < children.size(); ++i) {
        if (children[i].error.empty() && children[i].est.value > opts.m_min + opts.tol) {
          res.trace[base + i].kept = true;
          next.push_back(children[i]);
        }
      }
    }
    if (mode == SearchMode::Greedy) {
      res.final = next.front();
    } else {
      for (const auto& c : next)
        if (c.est.value > res.final.est.value) res.final = c;
    }
    if (!res.final.error.empty()) break;
    if (res.final.est.value >= goal) {
      res.reached = true;
      break;
    }
    frontier = std::move(next);
  }
  return res;
}

std::string export_csv(const std::vector<BoxReport>& reports, const std::vector<std::string>& param_names,
                       const std::string& comment) {
  std::ostringstream out;
  if (!comment.empty()) {
    std::istringstream lines(comment);
    for (std::string line; std::getline(lines, line);) out << "# " << line << '\n';
  }
  for (const auto& p : param_names) out << "lo_" << p << ",hi_" << p << ',';
  out << "r_hat,stderr,class,multistat,n,status\n";
  out.precision(17);
  for (const auto& r : reports) {
    if (r.box.size() != param_names.size()) throw DimensionError("report box does not match the parameter names");
    for (const auto& iv : r.box) out << iv.lo << ',' << iv.hi << ',';
    out << r.est.value << ',' << r.est.std_error << ',' << to_string(r.cls) << ',' << (r.multistat ? 1 : 0) << ','
        << r.est.n << ',' << (r.error.empty() ? to_string(r.est.status) : "Error") << '\n';
  }
  return out.str();
}

std::array<unsigned char, 3> colour_for(double r, double m_min, double m_max) {
  auto lerp = [](double a, double b, double t) { return static_cast<unsigned char>(std::lround(a + (b - a) * t)); };
  const double knee = std::min(3.0, m_max);
  if (!(r > m_min)) return {255, 255, 255};
  if (r <= knee || m_max <= knee) {
    const double t = knee > m_min ? std::clamp((r - m_min) / (knee - m_min), 0.0, 1.0) : 1.0;
    return {255, 255, lerp(255, 0, t)};
  }
  const double t = std::clamp((r - knee) / (m_max - knee), 0.0, 1.0);
  return {255, lerp(255, 0, t), 0};
}

std::string export_ppm(const std::vector<BoxReport>& reports, std::array<std::size_t, 2> axes, double m_min,
                       double m_max) {
  if (reports.empty()) throw Error("no boxes to draw");
  const std::size_t m = reports.front().box.size();
  if (axes[0] >= m || axes[1] >= m || axes[0] == axes[1]) throw AxisMismatch("invalid image axes");
  for (const auto& r : reports)
    for (std::size_t i = 0; i < m; ++i)
      if (i != axes[0] && i != axes[1] &&
          (r.box[i].lo != reports.front().box[i].lo || r.box[i].hi != reports.front().box[i].hi))
        throw AxisMismatch("parameter " + std::to_string(i) + " varies across boxes");

  std::array<double, 2> lo, hi, step;
  for (int k = 0; k < 2; ++k) {
    lo[k] = hi[k] = reports.front().box[axes[k]].lo;
    step[k] = width(reports.front().box[axes[k]]);
    for (const auto& r : reports) {
      lo[k] = std::min(lo[k], r.box[axes[k]].lo);
      hi[k] = std::max(hi[k], r.box[axes[k]].hi);
      step[k] = std::min(step[k], width(r.box[axes[k]]));
    }
  }
  const auto w = static_cast<std::size_t>(std::lround((hi[0] - lo[0]) / step[0]));
  const auto h = static_cast<std::size_t>(std::lround((hi[1] - lo[1]) / step[1]));
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  for (std::size_t row = 0; row < h; ++row) {
    const double y = hi[1] - (static_cast<double>(row) + 0.5) * step[1];
    for (std::size_t col = 0; col < w; ++col) {
      const double x = lo[0] + (static_cast<double>(col) + 0.5) * step[0];
      std::array<unsigned char, 3> px{128, 128, 128};
      for (const auto& r : reports) {
        const Interval& ix = r.box[axes[0]];
        const Interval& iy = r.box[axes[1]];
        if (x >= ix.lo && x <= ix.hi && y >= iy.lo && y <= iy.hi) {
          if (r.error.empty()) px = colour_for(r.est.value, m_min, m_max);
          break;
        }
      }
      out.append(reinterpret_cast<const char*>(px.data()), 3);
    }
  }
  return out;
}

}  // namespace kacrice
