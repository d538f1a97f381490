#include "longarm/job.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <sstream>

#include "longarm/analysis.hpp"
#include "longarm/brw.hpp"
#include "longarm/errors.hpp"
#include "longarm/lrp.hpp"

#ifndef LONGARM_GIT_DESCRIBE
#define LONGARM_GIT_DESCRIBE "unknown"
#endif

namespace longarm {

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace

KernelSpec kernel_spec_from_json(const json& j) {
  require(j.is_object(), "kernel must be a JSON object");
  KernelSpec s;
  s.d = get_or<int>(j, "d", s.d);
  s.shape = kernel_shape_from_string(get_or<std::string>(j, "shape", "canonical"));
  if (j.contains("alpha") && !j.at("alpha").is_null()) {
    const json& a = j.at("alpha");
    if (a.is_string()) {
      require(a.get<std::string>() == "infinite", "alpha must be a number or \"infinite\"");
    } else {
      s.alpha = a.get<double>();
    }
  }
  s.lambda = get_or<double>(j, "lambda", s.lambda);
  s.kappa = get_or<double>(j, "kappa", s.kappa);
  s.tab_radius = get_or<Coord>(j, "tab_radius", s.tab_radius);
  s.custom_weights = get_or<std::vector<double>>(j, "weights", {});
  s.custom_tail = get_or<double>(j, "tail", s.custom_tail);
  return s;
}

json to_json(const KernelSpec& spec) {
  json j;
  j["d"] = spec.d;
  j["shape"] = to_string(spec.shape);
  j["alpha"] = spec.alpha ? json(*spec.alpha) : json("infinite");
  j["lambda"] = spec.lambda;
  if (spec.shape == KernelShape::Exponential) j["kappa"] = spec.kappa;
  if (spec.shape == KernelShape::CustomTable) {
    j["weights"] = spec.custom_weights;
    j["tail"] = spec.custom_tail;
  }
  j["tab_radius"] = spec.tab_radius;
  return j;
}

OffspringDist offspring_from_json(const json& j) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "geometric-half") return OffspringDist::geometric_half();
    if (name == "binary") return OffspringDist::binary();
    throw ValidationError("unknown offspring law '" + name + "'");
  }
  require(j.is_array(), "offspring must be a name or a probability table");
  return OffspringDist(j.get<std::vector<double>>());
}

TinyGraph graph_from_json(const json& j) {
  require(j.is_object(), "graph must be a JSON object");
  TinyGraph g;
  g.vertices = get_or<int>(j, "vertices", 0);
  require(j.contains("edges") && j.at("edges").is_array(), "graph needs an 'edges' array");
  for (const auto& e : j.at("edges")) {
    require(e.is_array() && e.size() == 3, "each edge is [u, v, p]");
    g.edges.push_back({e[0].get<int>(), e[1].get<int>(), e[2].get<double>()});
  }
  g.validate();
  return g;
}

EdgeEvent event_from_json(const json& j, const TinyGraph& g) {
  require(j.is_object() && j.contains("type"), "event needs a 'type'");
  const auto type = j.at("type").get<std::string>();
  if (type == "true") return [](std::uint32_t) { return true; };
  if (type == "edge_open") {
    const int e = get_or<int>(j, "edge", -1);
    require(e >= 0 && e < static_cast<int>(g.edges.size()), "edge_open needs a valid 'edge'");
    return [e](std::uint32_t mask) { return ((mask >> e) & 1U) != 0; };
  }
  if (type == "connected") {
    const int a = get_or<int>(j, "a", -1), b = get_or<int>(j, "b", -1);
    require(a >= 0 && a < g.vertices && b >= 0 && b < g.vertices, "connected needs vertices 'a' and 'b'");
    return [g, a, b](std::uint32_t mask) { return connected(g, mask, a, b); };
  }
  if (type == "witnesses") {
    std::vector<std::uint32_t> sets;
    for (const auto& w : j.at("sets")) {
      std::uint32_t mask = 0;
      for (const auto& e : w) {
        const int idx = e.get<int>();
        require(idx >= 0 && idx < static_cast<int>(g.edges.size()), "witness edge out of range");
        mask |= 1U << idx;
      }
      sets.push_back(mask);
    }
    return up_closure(std::move(sets));
  }
  throw ValidationError("unknown event type '" + type + "'");
}

void JobConfig::merge(const json& j) {
  require(j.is_object(), "job configuration must be a JSON object");
  if (j.contains("model")) {
    const auto m = j.at("model").get<std::string>();
    require(m == "brw" || m == "lrp", "model must be \"brw\" or \"lrp\"");
    model = m == "brw" ? Model::BRW : Model::LRP;
  }
  if (j.contains("kernel")) kernel = kernel_spec_from_json(j.at("kernel"));
  if (j.contains("offspring")) offspring = j.at("offspring");
  if (j.contains("p")) {
    const json& v = j.at("p");
    if (v.is_string()) {
      require(v.get<std::string>() == "auto-pc", "p must be a number or \"auto-pc\"");
      p.reset();
    } else {
      p = v.get<double>();
    }
  }
  radii = get_or<std::vector<Coord>>(j, "radii", radii);
  samples = get_or<std::int64_t>(j, "samples", samples);
  window = get_or<Coord>(j, "window", window);
  seed = get_or<std::uint64_t>(j, "seed", seed);
  workers = get_or<unsigned>(j, "workers", workers);
  output = get_or<std::string>(j, "output", output);
  cap_K = get_or<double>(j, "cap_K", cap_K);
  if (j.contains("cap")) cap = j.at("cap").is_null() ? std::nullopt : std::optional<std::int64_t>(j.at("cap").get<std::int64_t>());
  vertex_cap = get_or<std::int64_t>(j, "vertex_cap", vertex_cap);
  n_grid = get_or<std::vector<std::int64_t>>(j, "n_grid", n_grid);
  pc_samples = get_or<std::int64_t>(j, "pc_samples", pc_samples);
  p_lo = get_or<double>(j, "p_lo", p_lo);
  p_hi = get_or<double>(j, "p_hi", p_hi);
}

void JobConfig::validate() const {
  require(samples >= 1, "samples must be >= 1");
  require(!radii.empty(), "radii must be non-empty");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    require(radii[i] >= 0, "radii must be non-negative");
    require(i == 0 || radii[i] > radii[i - 1], "radii must be strictly increasing");
  }
  const Kernel k(kernel);
  if (model == Model::BRW) {
    (void)offspring_from_json(offspring);
    CapPolicy policy{cap_K, 1.0, cap};
    if (kernel.alpha) policy.rho = std::min(4.0, *kernel.alpha) / 2.0;
    else policy.rho = 2.0;
    for (Coord r : radii) (void)policy.cap(r);
  } else {
    require(window >= 1, "window must be >= 1");
    require(4 * radii.back() <= window, "largest radius must be <= R/4 (window margin)");
    require(vertex_cap >= 1, "vertex_cap must be >= 1");
    if (p) {
      (void)PercolationConfig(k, *p, window);
    } else {
      require(pc_samples >= 1, "pc_samples must be >= 1");
      require(n_grid.size() >= 3, "n_grid needs at least 3 sizes");
    }
  }
}

json JobConfig::to_json() const {
  json j;
  j["model"] = model == Model::BRW ? "brw" : "lrp";
  j["kernel"] = longarm::to_json(kernel);
  j["radii"] = radii;
  j["samples"] = samples;
  j["seed"] = seed;
  if (model == Model::BRW) {
    j["offspring"] = offspring;
    j["cap_K"] = cap_K;
    j["cap"] = cap ? json(*cap) : json(nullptr);
  } else {
    j["p"] = p ? json(*p) : json("auto-pc");
    j["window"] = window;
    j["vertex_cap"] = vertex_cap;
    if (!p) {
      j["n_grid"] = n_grid;
      j["pc_samples"] = pc_samples;
      j["p_lo"] = p_lo;
      j["p_hi"] = p_hi;
    }
  }
  return j;
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string estimate_csv(const EstimateTable& table) {
  std::ostringstream os;
  os << "r,hits,trials,gamma_hat,ci_lo,ci_hi,cap,cap_tail_bound";
  if (table.percolation) os << ",indeterminate_fraction";
  os << '\n';
  for (const auto& row : table.rows) {
    os << row.r << ',' << row.hits << ',' << row.trials << ',' << format_number(row.gamma_hat) << ','
       << format_number(row.ci_lo) << ',' << format_number(row.ci_hi) << ',' << row.cap << ','
       << format_number(row.cap_tail_bound);
    if (table.percolation) os << ',' << format_number(row.indeterminate_fraction());
    os << '\n';
  }
  return os.str();
}

json to_json(const FitResult& fit) {
  json j;
  j["slope"] = fit.slope;
  j["intercept"] = fit.intercept;
  j["slope_stderr"] = fit.slope_stderr;
  j["r_squared"] = fit.r_squared;
  j["weights"] = std::vector<double>(fit.weights.data(), fit.weights.data() + fit.weights.size());
  return j;
}

json estimate_json(const EstimateTable& table) {
  json j;
  json rows = json::array();
  for (const auto& row : table.rows) {
    json r;
    r["r"] = row.r;
    r["cap"] = row.cap;
    r["truncated"] = row.truncated;
    r["indeterminate"] = row.indeterminate;
    r["indeterminate_fraction"] = row.indeterminate_fraction();
    rows.push_back(r);
  }
  j["diagnostics"] = rows;
  j["fit"] = table.fit ? to_json(*table.fit) : json(nullptr);
  return j;
}

std::string git_describe() { return LONGARM_GIT_DESCRIBE; }

JobOutput run_job(const JobConfig& job) {
  job.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const Kernel kernel(job.kernel);
  JobOutput out;
  json meta;
  EstimateTable table;
  if (job.model == JobConfig::Model::BRW) {
    const OffspringDist off = offspring_from_json(job.offspring);
    BrwEstimateOptions opt;
    opt.samples = job.samples;
    opt.seed = job.seed;
    opt.workers = job.workers;
    opt.caps = CapPolicy{job.cap_K, job.kernel.alpha ? std::min(4.0, *job.kernel.alpha) / 2.0 : 2.0, job.cap};
    table = estimate_gamma_brw(off, kernel, job.radii, opt);
  } else {
    double p = 0.0;
    if (job.p) {
      p = *job.p;
    } else {
      PcOptions po;
      po.n_grid = job.n_grid;
      po.samples = job.pc_samples;
      po.seed = job.seed;
      po.workers = job.workers;
      po.p_lo = job.p_lo;
      po.p_hi = job.p_hi;
      const PcEstimate pc = estimate_pc(kernel, job.window, po);
      p = pc.p_c;
      meta["p_c"] = pc.p_c;
      meta["p_c_half_window"] = pc.p_c_half_window;
      meta["window_shift"] = pc.window_shift;
      meta["slope_at_p_c"] = pc.at_pc.slope;
      meta["slope_stderr_at_p_c"] = pc.at_pc.slope_stderr;
    }
    LrpEstimateOptions opt;
    opt.samples = job.samples;
    opt.seed = job.seed;
    opt.workers = job.workers;
    opt.vertex_cap = job.vertex_cap;
    table = estimate_gamma_lrp(kernel, p, job.radii, job.window, opt);
    meta["p"] = p;
  }
  out.csv = estimate_csv(table);
  const json est = estimate_json(table);
  meta["diagnostics"] = est["diagnostics"];
  meta["fit"] = est["fit"];
  meta["config"] = job.to_json();
  meta["git_describe"] = git_describe();
  meta["wall_time_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.metadata = meta;
  return out;
}

}  // namespace longarm
