#include "longarm/estimate.hpp"

#include <cmath>

namespace longarm {

void finalize_rows(std::vector<EstimateRow>& rows, double level) {
  for (auto& row : rows) {
    if (row.trials == 0) continue;
    row.gamma_hat = static_cast<double>(row.hits) / static_cast<double>(row.trials);
    const auto [lo, hi] = wilson_ci(row.hits, row.trials, level);
    row.ci_lo = lo;
    row.ci_hi = hi;
  }
}

std::optional<FitResult> fit_table(const std::vector<EstimateRow>& rows, std::int64_t min_hits) {
  std::vector<FitPoint> pts;
  for (const auto& row : rows) {
    if (row.hits < min_hits || row.hits == row.trials || row.r < 1) continue;
    const double p = row.gamma_hat;
    const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(row.trials));
    pts.push_back({static_cast<double>(row.r), p, se});
  }
  if (pts.size() < 3) return std::nullopt;
  return loglog_fit(pts);
}

}  // namespace longarm
