#pragma once

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "longarm/estimate.hpp"
#include "longarm/exact.hpp"
#include "longarm/gw.hpp"
#include "longarm/kernel.hpp"

namespace longarm {

using json = nlohmann::json;

/// {"d", "alpha" (number or "infinite"), "lambda", "shape", "kappa", "tab_radius",
///  "weights", "tail"}; missing fields take the KernelSpec defaults.
KernelSpec kernel_spec_from_json(const json& j);
json to_json(const KernelSpec& spec);

/// "geometric-half", "binary", or an explicit table [p_0, p_1, ...].
OffspringDist offspring_from_json(const json& j);

/// {"vertices": n, "edges": [[u, v, p], ...]}.
TinyGraph graph_from_json(const json& j);

/// {"type": "true" | "edge_open" | "connected" | "witnesses", ...}. All but
/// "true" are increasing.
EdgeEvent event_from_json(const json& j, const TinyGraph& g);

struct JobConfig {
  enum class Model { BRW, LRP };

  Model model = Model::BRW;
  KernelSpec kernel;
  json offspring = "binary";
  std::optional<double> p;  // empty: estimate p_c first
  std::vector<Coord> radii;
  std::int64_t samples = 0;
  Coord window = 0;
  std::uint64_t seed = 1;
  unsigned workers = 0;
  std::string output;
  double cap_K = 100.0;
  std::optional<std::int64_t> cap;
  std::int64_t vertex_cap = std::int64_t{1} << 20;
  std::vector<std::int64_t> n_grid = {8, 16, 32, 64, 128, 256, 512};
  std::int64_t pc_samples = 20000;
  double p_lo = 0.0;
  double p_hi = -1.0;

  /// Fields absent from `j` keep their current values.
  void merge(const json& j);
  /// Checks every precondition of the selected estimator before sampling.
  void validate() const;
  json to_json() const;
};

struct JobOutput {
  std::string csv;
  json metadata;
};

JobOutput run_job(const JobConfig& job);

std::string estimate_csv(const EstimateTable& table);
json estimate_json(const EstimateTable& table);
json to_json(const FitResult& fit);

/// Shortest round-trip decimal form, identical on every run.
std::string format_number(double x);

std::string git_describe();

}  // namespace longarm
