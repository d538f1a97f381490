#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "longarm/analysis.hpp"
#include "longarm/lattice.hpp"

namespace longarm {

struct EstimateRow {
  Coord r = 0;
  std::int64_t hits = 0;
  std::int64_t trials = 0;
  double gamma_hat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::int64_t cap = 0;
  double cap_tail_bound = 0.0;
  // Hits decided only by the cap (BRW) or by the vertex cap (LRP).
  std::int64_t truncated = 0;
  std::int64_t indeterminate = 0;

  double indeterminate_fraction() const {
    return trials > 0 ? static_cast<double>(indeterminate) / static_cast<double>(trials) : 0.0;
  }
};

struct EstimateTable {
  std::vector<EstimateRow> rows;
  bool percolation = false;
  std::optional<FitResult> fit;
};

/// Fills gamma_hat and the Wilson interval of each row from hits/trials.
void finalize_rows(std::vector<EstimateRow>& rows, double level = 0.95);

/// Log-log fit of gamma_hat against r over rows with at least `min_hits`
/// hits; empty when fewer than three rows qualify.
std::optional<FitResult> fit_table(const std::vector<EstimateRow>& rows, std::int64_t min_hits = 10);

}  // namespace longarm
