#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kacrice/mc.hpp"
#include "kacrice/system.hpp"

namespace kacrice {

enum class BoxClass { AllMin, AllMax, Mixed };
std::string to_string(BoxClass c);

enum class Mode { General, Crn };

struct ClassifyOptions {
  double m_min = 1.0;
  double m_max = 3.0;
  Mode mode = Mode::General;
  double tol = 0.05;

  void validate() const;
};

struct Classification {
  BoxClass cls = BoxClass::Mixed;
  bool multistat = false;  // CRN mode: r > 1 + tol
};

/// AllMax needs r + 3e >= m_max - tol and r - 3e >= m_max - 3 tol. AllMin
/// needs r <= m_min + tol, or r <= 1 + tol in CRN mode.
Classification classify(double r, double e, const ClassifyOptions& opts);

struct BoxReport {
  Box box;
  Estimate est;
  BoxClass cls = BoxClass::Mixed;
  bool multistat = false;
  std::vector<int> depth;  // bisections per axis
  std::uint64_t id = 0;    // stream id of the integration
  std::string error;       // nonempty if the estimate failed
};

/// Estimates r over a box; `id` selects independent random streams.
using BoxEstimator = std::function<Estimate(const Box& box, std::uint64_t id)>;

/// Integrates sys over each box with a shared decomposition. The per-box
/// sample cap is min(rule.max_n, max_n_per_box).
BoxEstimator make_box_estimator(const ParametrizedSystem& sys, const std::vector<std::string>& linear_params,
                                StoppingRule rule, RunOptions opts, std::optional<double> sigma = std::nullopt,
                                std::uint64_t max_n_per_box = 1'000'000'000ULL);

/// L_i = ceil(log2(len_i / delta_i)), at least 0.
std::vector<int> depth_limits(const Box& box, const std::vector<double>& delta);

/// a + (b - a) / 2, splitting axis `axis`; the lower half comes first.
std::array<Box, 2> bisect(const Box& box, std::size_t axis);

/// Equal cells, row-major (last axis fastest); cell index is the stream id.
std::vector<BoxReport> grid_partition(const Box& box, const std::vector<int>& counts, const BoxEstimator& estimate,
                                      const ClassifyOptions& opts);

/// FIFO work queue. AllMin and AllMax boxes are emitted; Mixed boxes are
/// bisected along axis (bisections so far) mod m, skipping exhausted axes,
/// and emitted once every axis reached its limit.
std::vector<BoxReport> bisect_partition(const Box& box, const std::vector<int>& limits, const BoxEstimator& estimate,
                                        const ClassifyOptions& opts);

enum class SearchMode { Greedy, KeepBoth };

struct TraceEntry {
  int step = 0;
  BoxReport report;
  bool kept = false;
};

struct SearchResult {
  std::vector<TraceEntry> trace;
  BoxReport final;
  bool reached = false;  // final r >= m_max - tol
};

/// Greedy keeps the half with larger r (ties go to the lower half);
/// KeepBoth keeps every half with r > m_min + tol. Stops once some box has
/// r >= m_max - tol or nothing can be bisected further. `max_estimates`
/// bounds the total number of integrations.
SearchResult search_max(const Box& box, const std::vector<int>& limits, const BoxEstimator& estimate,
                        const ClassifyOptions& opts, SearchMode mode = SearchMode::Greedy,
                        std::uint64_t max_estimates = 100'000);

class AxisMismatch : public Error {
 public:
  using Error::Error;
};

/// Columns: lo_<p>, hi_<p> per parameter, r_hat, stderr, class, multistat,
/// n, status. `comment` lines are emitted first, each prefixed by "# ".
std::string export_csv(const std::vector<BoxReport>& reports, const std::vector<std::string>& param_names,
                       const std::string& comment = "");

/// Binary P6 image over two parameter axes at the finest cell width present.
/// x grows with axes[0], y with axes[1] (top row is the largest value).
/// Colour runs white at m_min to yellow at min(3, m_max), then to red at
/// m_max when m_max > 3. Throws AxisMismatch if another axis varies.
std::string export_ppm(const std::vector<BoxReport>& reports, std::array<std::size_t, 2> axes, double m_min,
                       double m_max);

/// RGB colour for r under the export_ppm scale.
std::array<unsigned char, 3> colour_for(double r, double m_min, double m_max);

}  // namespace kacrice
