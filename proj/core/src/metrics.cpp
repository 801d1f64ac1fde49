#include "iplpmb/metrics.hpp"

#include "iplpmb/assignment.hpp"
#include "iplpmb/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

namespace iplpmb {

void GospaConfig::validate() const {
  if (!(cutoff > 0.0) || !(p >= 1.0) || !(alpha > 0.0 && alpha <= 2.0)) {
    throw InvalidArgument("GOSPA needs c > 0, p >= 1 and 0 < alpha <= 2");
  }
}

GospaResult gospa(std::span<const Eigen::Vector3d> truth, std::span<const Eigen::Vector3d> estimate,
                  const GospaConfig& cfg) {
  cfg.validate();
  // Rows are the smaller set; the metric is symmetric.
  const bool swapped = truth.size() > estimate.size();
  const auto rows = swapped ? estimate : truth;
  const auto cols = swapped ? truth : estimate;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto m = static_cast<Eigen::Index>(cols.size());
  const double unmatched = std::pow(cfg.cutoff, cfg.p) / cfg.alpha;

  // Matching a pair costs d^p instead of leaving both points unmatched.
  CostMatrix cost = CostMatrix::Constant(n, m + n, std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const double d = (rows[static_cast<std::size_t>(i)] - cols[static_cast<std::size_t>(j)]).norm();
      if (d < cfg.cutoff) {
        cost(i, j) = std::pow(d, cfg.p) - 2.0 * unmatched;
      }
    }
    cost(i, m + i) = 0.0;
  }
  const Assignment a = solve_assignment(cost);

  GospaResult out;
  // Summed in truth order whichever set indexes the rows.
  std::vector<double> per_truth(truth.size(), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int j = a.row_to_col[static_cast<std::size_t>(i)];
    if (j < m) {
      const auto ti = static_cast<std::size_t>(swapped ? j : i);
      per_truth[ti] = std::pow((truth[ti] - estimate[static_cast<std::size_t>(swapped ? i : j)]).norm(), cfg.p);
      ++out.num_matched;
    }
  }
  double loc = 0.0;
  for (double v : per_truth) {
    loc += v;
  }
  const std::size_t unmatched_rows = rows.size() - out.num_matched;
  const std::size_t unmatched_cols = cols.size() - out.num_matched;
  out.num_missed = swapped ? unmatched_cols : unmatched_rows;
  out.num_false = swapped ? unmatched_rows : unmatched_cols;
  const double missed = unmatched * static_cast<double>(out.num_missed);
  const double false_targets = unmatched * static_cast<double>(out.num_false);
  out.localization = std::pow(loc, 1.0 / cfg.p);
  out.missed = std::pow(missed, 1.0 / cfg.p);
  out.false_targets = std::pow(false_targets, 1.0 / cfg.p);
  out.total = std::pow(loc + missed + false_targets, 1.0 / cfg.p);
  return out;
}

MapEstimate extract_map_estimate(const PmbMap& map, double r_threshold) {
  if (!(r_threshold > 0.0 && r_threshold < 1.0)) {
    throw InvalidArgument("extract_map_estimate: threshold must lie in (0, 1)");
  }
  MapEstimate out;
  for (const auto& b : map.bernoullis) {
    if (b.existence < r_threshold) {
      continue;
    }
    const LandmarkKind kind = b.map_kind();
    const auto& d = b.kind_densities[kind_index(kind)];
    if (!d) {
      continue;
    }
    (kind == LandmarkKind::VA ? out.va : out.sp).push_back(d->mean().head<3>());
  }
  return out;
}

double heading_error_deg(double estimate, double truth) {
  return wrap_angle(estimate - truth) * 180.0 / std::numbers::pi;
}

UeEstimate UeEstimate::from_density(const GaussianDensity& ue) {
  if (ue.dim() != kUeDim) {
    throw DimensionMismatch("UeEstimate: expected a 5-dim UE density");
  }
  return {ue.mean(), ue.cov().diagonal().cwiseMax(0.0).cwiseSqrt()};
}

double UeEstimate::position_std() const {
  return std::sqrt(std[0] * std[0] + std[1] * std[1]);
}

UeErrorSummary ue_error_summary(const std::vector<std::vector<UeEstimate>>& estimates,
                                std::span<const UEState> truth) {
  UeErrorSummary out;
  const std::size_t t_len = truth.size();
  for (std::size_t r = 0; r < estimates.size(); ++r) {
    if (estimates[r].size() != t_len) {
      throw LengthMismatch("ue_error_summary: run " + std::to_string(r) + " has " +
                           std::to_string(estimates[r].size()) + " estimates for " + std::to_string(t_len) +
                           " truth states");
    }
  }
  if (estimates.empty() || t_len == 0) {
    return out;
  }
  const auto runs = static_cast<double>(estimates.size());
  const double samples = runs * static_cast<double>(t_len);
  double sq_pos = 0.0;
  double sq_head = 0.0;
  double sq_bias = 0.0;
  double emp_pos = 0.0;
  double emp_head = 0.0;
  double emp_bias = 0.0;
  for (std::size_t t = 0; t < t_len; ++t) {
    Eigen::Vector4d sum = Eigen::Vector4d::Zero();     // ex, ey, eh, eb
    Eigen::Vector4d sum_sq = Eigen::Vector4d::Zero();
    for (const auto& run : estimates) {
      const UeEstimate& e = run[t];
      const Eigen::Vector4d err(e.mean[0] - truth[t].position.x(), e.mean[1] - truth[t].position.y(),
                                heading_error_deg(e.mean[kHeadingIndex], truth[t].heading),
                                e.mean[kBiasIndex] - truth[t].clock_bias);
      sum += err;
      sum_sq += err.cwiseProduct(err);
      sq_pos += err[0] * err[0] + err[1] * err[1];
      sq_head += err[2] * err[2];
      sq_bias += err[3] * err[3];
      out.position_std += e.position_std();
      out.heading_std_deg += e.std[kHeadingIndex] * 180.0 / std::numbers::pi;
      out.bias_std += e.std[kBiasIndex];
    }
    const Eigen::Vector4d mean = sum / runs;
    const Eigen::Vector4d var = (sum_sq / runs - mean.cwiseProduct(mean)).cwiseMax(0.0);
    emp_pos += std::sqrt(var[0] + var[1]);
    emp_head += std::sqrt(var[2]);
    emp_bias += std::sqrt(var[3]);
  }
  const auto steps = static_cast<double>(t_len);
  out.position_rmse = std::sqrt(sq_pos / samples);
  out.heading_rmse_deg = std::sqrt(sq_head / samples);
  out.bias_rmse = std::sqrt(sq_bias / samples);
  out.position_std /= samples;
  out.heading_std_deg /= samples;
  out.bias_std /= samples;
  out.position_std_empirical = emp_pos / steps;
  out.heading_std_empirical_deg = emp_head / steps;
  out.bias_std_empirical = emp_bias / steps;
  return out;
}

}  // namespace iplpmb
