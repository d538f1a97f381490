#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "longarm/analysis.hpp"
#include "longarm/errors.hpp"
#include "longarm/exact.hpp"
#include "longarm/gw.hpp"
#include "longarm/job.hpp"
#include "longarm/lrp.hpp"

using namespace longarm;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write '" + path + "'");
  out << text;
}

void emit_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// Kernel flags shared by every sampling subcommand. Only flags given on the
// command line end up in the JSON, so a config file can supply the rest.
struct KernelFlags {
  int d = 1;
  std::string alpha = "0.8";
  double lambda = 1.0;
  std::string shape = "canonical";
  double kappa = 1.0;
  Coord tab_radius = 0;
  std::vector<CLI::Option*> opts;

  void add(CLI::App* app) {
    opts.push_back(app->add_option("--d", d, "Dimension"));
    opts.push_back(app->add_option("--alpha", alpha, "Decay exponent, or \"infinite\""));
    opts.push_back(app->add_option("--lambda", lambda, "Spread parameter"));
    opts.push_back(app->add_option("--shape", shape, "canonical | bounded-uniform | exponential"));
    opts.push_back(app->add_option("--kappa", kappa, "Rate of the exponential profile"));
    opts.push_back(app->add_option("--tab-radius", tab_radius, "Tabulated shell radius (0 = default)"));
  }

  json to_json() const {
    json k;
    k["d"] = d;
    if (alpha == "infinite") {
      k["alpha"] = "infinite";
    } else {
      try {
        k["alpha"] = std::stod(alpha);
      } catch (const std::exception&) {
        throw ValidationError("--alpha must be a number or \"infinite\"");
      }
    }
    k["lambda"] = lambda;
    k["shape"] = shape;
    k["kappa"] = kappa;
    k["tab_radius"] = tab_radius;
    return k;
  }

  KernelSpec spec() const { return kernel_spec_from_json(to_json()); }
};

// Flags mirroring JobConfig for brw-gamma and lrp-gamma.
struct JobFlags {
  KernelFlags kernel;
  std::string config;
  std::string offspring = "binary";
  std::string p;
  std::vector<Coord> radii;
  std::int64_t samples = 0;
  Coord window = 0;
  std::uint64_t seed = 1;
  unsigned workers = 0;
  std::string output;
  double cap_K = 100.0;
  std::int64_t cap = 0;
  std::int64_t vertex_cap = 0;
  std::vector<std::int64_t> n_grid;
  std::int64_t pc_samples = 0;
  CLI::App* app = nullptr;

  void add(CLI::App* sub, bool brw) {
    app = sub;
    kernel.add(sub);
    sub->add_option("--config", config, "JSON job file; its fields override flags")->check(CLI::ExistingFile);
    sub->add_option("--radii", radii, "Radii, comma separated")->delimiter(',');
    sub->add_option("--samples", samples, "Realizations");
    sub->add_option("--seed", seed, "Master seed");
    sub->add_option("--workers", workers, "Worker threads (default LONGARM_WORKERS)");
    sub->add_option("--output", output, "CSV path; metadata goes to <output>.meta.json");
    if (brw) {
      sub->add_option("--offspring", offspring, "binary | geometric-half");
      sub->add_option("--cap-K", cap_K, "Cap prefactor K in K r^{2 rho}");
      sub->add_option("--cap", cap, "Fixed progeny cap for every radius");
    } else {
      sub->add_option("--p", p, "Edge density, or \"auto-pc\"");
      sub->add_option("--window", window, "Window radius R");
      sub->add_option("--vertex-cap", vertex_cap, "Vertex cap per cluster");
      sub->add_option("--n-grid", n_grid, "Cluster sizes for the p_c slope")->delimiter(',');
      sub->add_option("--pc-samples", pc_samples, "Clusters per bisection step");
    }
  }

  bool given(const char* name) const {
    const CLI::Option* opt = app->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  }

  JobConfig resolve(JobConfig::Model model) const {
    JobConfig job;
    job.model = model;
    json flags;
    json k = kernel.to_json();
    flags["kernel"] = k;
    if (given("--radii")) flags["radii"] = radii;
    if (given("--samples")) flags["samples"] = samples;
    if (given("--seed")) flags["seed"] = seed;
    if (given("--offspring")) flags["offspring"] = offspring;
    if (given("--cap-K")) flags["cap_K"] = cap_K;
    if (given("--cap")) flags["cap"] = cap;
    if (given("--window")) flags["window"] = window;
    if (given("--vertex-cap")) flags["vertex_cap"] = vertex_cap;
    if (given("--n-grid")) flags["n_grid"] = n_grid;
    if (given("--pc-samples")) flags["pc_samples"] = pc_samples;
    if (given("--p")) {
      if (p == "auto-pc") {
        flags["p"] = "auto-pc";
      } else {
        try {
          flags["p"] = std::stod(p);
        } catch (const std::exception&) {
          throw ValidationError("--p must be a number or \"auto-pc\"");
        }
      }
    }
    job.merge(flags);
    if (!config.empty()) job.merge(read_json_file(config));
    if (given("--workers")) job.workers = workers;
    if (given("--output")) job.output = output;
    return job;
  }
};

int run_estimate(const JobFlags& flags, JobConfig::Model model) {
  const JobConfig job = flags.resolve(model);
  const JobOutput out = run_job(job);
  write_text(job.output, out.csv);
  if (!job.output.empty() && job.output != "-") emit_json(job.output + ".meta.json", out.metadata);
  return 0;
}

json tail_slope_json(const TailSlope& t) {
  json j;
  j["p"] = t.p;
  j["slope"] = t.slope;
  j["slope_stderr"] = t.slope_stderr;
  j["tail"] = t.tail;
  j["escape_fraction"] = t.escape_fraction;
  return j;
}

// CSV with a header line; returns the named columns.
std::vector<std::vector<double>> read_csv_columns(const std::string& path, const std::vector<std::string>& names) {
  std::ifstream in(path);
  require(in.good(), "cannot open '" + path + "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "'" + path + "' is empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  std::vector<std::size_t> idx;
  for (const auto& n : names) {
    std::size_t k = 0;
    while (k < header.size() && header[k] != n) ++k;
    require(k < header.size(), "column '" + n + "' not found in '" + path + "'");
    idx.push_back(k);
  }
  std::vector<std::vector<double>> cols(names.size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    for (std::size_t c = 0; c < idx.size(); ++c) {
      require(idx[c] < cells.size(), "short row in '" + path + "'");
      try {
        cols[c].push_back(std::stod(cells[idx[c]]));
      } catch (const std::exception&) {
        throw ValidationError("non-numeric cell '" + cells[idx[c]] + "' in '" + path + "'");
      }
    }
  }
  return cols;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Branching random walk and long-range percolation one-arm estimators"};
  app.require_subcommand(1);

  JobFlags brw_flags, lrp_flags;
  auto* brw = app.add_subcommand("brw-gamma", "One-arm probabilities of the branching random walk");
  brw_flags.add(brw, true);
  auto* lrp = app.add_subcommand("lrp-gamma", "One-arm probabilities of critical long-range percolation");
  lrp_flags.add(lrp, false);

  KernelFlags pc_kernel;
  Coord pc_window = 1024;
  std::vector<std::int64_t> pc_grid = {8, 16, 32, 64, 128, 256, 512};
  std::int64_t pc_samples = 20000;
  std::uint64_t pc_seed = 1;
  unsigned pc_workers = 0;
  double pc_lo = 0.0, pc_hi = -1.0;
  std::string pc_output;
  auto* pc = app.add_subcommand("estimate-pc", "Critical point from the cluster-size tail slope");
  pc_kernel.add(pc);
  pc->add_option("--window", pc_window, "Window radius R");
  pc->add_option("--n-grid", pc_grid, "Cluster sizes")->delimiter(',');
  pc->add_option("--samples", pc_samples, "Clusters per bisection step");
  pc->add_option("--seed", pc_seed, "Master seed");
  pc->add_option("--workers", pc_workers, "Worker threads");
  pc->add_option("--p-lo", pc_lo, "Lower end of the bracket");
  pc->add_option("--p-hi", pc_hi, "Upper end of the bracket (negative: 1 / max D)");
  pc->add_option("--output", pc_output, "JSON path (default stdout)");

  KernelFlags green_kernel;
  std::int64_t green_N = 1'000'000;
  Coord green_R = 256;
  bool green_limit = false;
  std::string green_output;
  auto* green = app.add_subcommand("green", "Killed Green function along the first axis");
  green_kernel.add(green);
  green->add_option("--N", green_N, "Largest convolution power");
  green->add_option("--window", green_R, "Window radius R");
  green->add_flag("--window-limit", green_limit, "Extrapolate over windows R, 2R, 4R");
  green->add_option("--output", green_output, "CSV path; summary goes to <output>.meta.json");

  std::string prog_off = "binary";
  std::int64_t prog_n = 1000;
  std::string prog_output;
  auto* progeny = app.add_subcommand("progeny", "Total-progeny law of the Galton-Watson tree");
  progeny->add_option("--offspring", prog_off, "binary | geometric-half | JSON table");
  progeny->add_option("--n-max", prog_n, "Largest size");
  progeny->add_option("--output", prog_output, "CSV path");

  std::string enum_graph, enum_output;
  auto* enumerate_cmd = app.add_subcommand("enumerate", "Exact event probability on a small graph");
  enumerate_cmd->add_option("--graph", enum_graph, "JSON {vertices, edges, event}")->required()->check(CLI::ExistingFile);
  enumerate_cmd->add_option("--output", enum_output, "JSON path");

  std::string bk_graph, bk_output;
  auto* bk = app.add_subcommand("bk-check", "Disjoint occurrence against the product bound");
  bk->add_option("--graph", bk_graph, "JSON {vertices, edges, A, B}")->required()->check(CLI::ExistingFile);
  bk->add_option("--output", bk_output, "JSON path");

  double exp_alpha = 0.0;
  auto* exps = app.add_subcommand("exponents", "rho, xi and the beta interval for alpha");
  exps->add_option("--alpha", exp_alpha, "Decay exponent")->required();

  double cb_alpha = 0.0, cb_beta = 0.0, cb_eps = 0.0, cb_r = 0.0, cb_lambda = 0.5;
  auto* cb = app.add_subcommand("check-beta", "Constraint chains for beta, and the derived scales");
  cb->add_option("--alpha", cb_alpha, "Decay exponent")->required();
  cb->add_option("--beta", cb_beta, "Exponent beta (default: midpoint of the interval)");
  cb->add_option("--epsilon", cb_eps, "epsilon for the derived scales");
  cb->add_option("--r", cb_r, "Radius for the derived scales");
  cb->add_option("--lambda", cb_lambda, "Shell fraction lambda for the derived scales");

  std::string fit_input, fit_x = "r", fit_y = "gamma_hat", fit_se;
  std::int64_t fit_min_hits = 10;
  auto* fit = app.add_subcommand("fit", "Log-log fit of a CSV column");
  fit->add_option("--input", fit_input, "CSV file with a header")->required()->check(CLI::ExistingFile);
  fit->add_option("--x", fit_x, "Abscissa column");
  fit->add_option("--y", fit_y, "Ordinate column");
  fit->add_option("--stderr", fit_se, "Standard-error column (weights)");
  fit->add_option("--min-hits", fit_min_hits, "Estimator tables: drop rows with fewer hits");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*brw) return run_estimate(brw_flags, JobConfig::Model::BRW);
    if (*lrp) return run_estimate(lrp_flags, JobConfig::Model::LRP);

    if (*pc) {
      const Kernel kernel(pc_kernel.spec());
      PcOptions opt;
      opt.n_grid = pc_grid;
      opt.samples = pc_samples;
      opt.seed = pc_seed;
      opt.workers = pc_workers;
      opt.p_lo = pc_lo;
      opt.p_hi = pc_hi;
      const PcEstimate est = estimate_pc(kernel, pc_window, opt);
      json j;
      j["p_c"] = est.p_c;
      j["p_lo"] = est.p_lo;
      j["p_hi"] = est.p_hi;
      j["p_c_half_window"] = est.p_c_half_window;
      j["window_shift"] = est.window_shift;
      j["iterations"] = est.iterations;
      j["warned_low_dimension"] = est.warned_low_dimension;
      j["at_p_c"] = tail_slope_json(est.at_pc);
      j["kernel"] = to_json(kernel.spec());
      j["window"] = pc_window;
      j["git_describe"] = git_describe();
      emit_json(pc_output, j);
      return 0;
    }

    if (*green) {
      const Kernel kernel(green_kernel.spec());
      std::ostringstream os;
      os << "k,G\n";
      json meta;
      Field G;
      if (green_limit) {
        G = green_function_window_limit(kernel, green_N, green_R);
      } else {
        GreenResult res = green_function(kernel, green_N, green_R);
        meta["terms"] = res.terms;
        meta["residual"] = res.residual;
        meta["last_term"] = res.last_term;
        meta["mass_outside"] = res.G.mass_outside;
        G = std::move(res.G);
      }
      meta["renewal_residual"] = renewal_residual(kernel, G);
      meta["kernel"] = to_json(kernel.spec());
      meta["window"] = green_R;
      meta["N"] = green_N;
      meta["window_limit"] = green_limit;
      for (Coord k = 0; k <= G.R; ++k) os << k << ',' << format_number(G.axis(k)) << '\n';
      write_text(green_output, os.str());
      if (!green_output.empty() && green_output != "-") emit_json(green_output + ".meta.json", meta);
      return 0;
    }

    if (*progeny) {
      json off_json = prog_off;
      if (!prog_off.empty() && prog_off.front() == '[') off_json = json::parse(prog_off);
      const OffspringDist off = offspring_from_json(off_json);
      require(prog_n >= 1, "n-max must be >= 1");
      const auto pmf = total_progeny_pmf(off, prog_n);
      const auto tail = survival_tail(pmf);
      std::ostringstream os;
      os << "n,pmf,tail\n";
      for (std::size_t i = 0; i < pmf.size(); ++i) {
        os << i + 1 << ',' << format_number(pmf[i]) << ',' << format_number(tail[i]) << '\n';
      }
      write_text(prog_output, os.str());
      return 0;
    }

    if (*enumerate_cmd) {
      const json spec = read_json_file(enum_graph);
      const TinyGraph g = graph_from_json(spec);
      require(spec.contains("event"), "graph file needs an 'event'");
      json j;
      j["probability"] = enumerate(g, event_from_json(spec.at("event"), g));
      j["edges"] = g.edges.size();
      emit_json(enum_output, j);
      return 0;
    }

    if (*bk) {
      const json spec = read_json_file(bk_graph);
      const TinyGraph g = graph_from_json(spec);
      require(spec.contains("A") && spec.contains("B"), "graph file needs events 'A' and 'B'");
      const BkResult res = bk_check(g, event_from_json(spec.at("A"), g), event_from_json(spec.at("B"), g));
      json j;
      j["p_disjoint"] = res.p_disjoint;
      j["p_product"] = res.p_product;
      j["holds"] = res.p_disjoint <= res.p_product + 1e-12;
      emit_json(bk_output, j);
      return 0;
    }

    if (*exps) {
      const ExponentSet e = exponents(exp_alpha);
      json j;
      j["alpha"] = e.alpha;
      j["rho"] = e.rho;
      j["xi"] = e.xi;
      j["beta_lo"] = e.beta_lo;
      j["beta_hi"] = e.beta_hi;
      emit_json("", j);
      return 0;
    }

    if (*cb) {
      const ExponentSet e = exponents(cb_alpha);
      const double beta = cb->count("--beta") ? cb_beta : 0.5 * (e.beta_lo + e.beta_hi);
      const BetaReport rep = beta_constraints_hold(cb_alpha, beta);
      json j;
      j["alpha"] = cb_alpha;
      j["beta"] = beta;
      j["interval"] = {e.beta_lo, e.beta_hi};
      j["interval_nonempty"] = e.beta_lo < e.beta_hi;
      j["shell_exponent"] = rep.shell_exponent;
      j["growth"] = rep.growth;
      j["percolation"] = rep.percolation;
      j["all"] = rep.all();
      if (cb->count("--epsilon") && cb->count("--r")) {
        const DerivedScales s = derived_scales(cb_eps, cb_r, cb_lambda, cb_alpha, beta);
        j["scales"] = {{"delta", s.delta}, {"L", s.L}, {"N", s.N}, {"j", s.j}};
      }
      emit_json("", j);
      return 0;
    }

    if (*fit) {
      std::vector<std::string> names = {fit_x, fit_y};
      if (!fit_se.empty()) names.push_back(fit_se);
      const auto cols = read_csv_columns(fit_input, names);
      std::vector<double> hits;
      bool table = false;
      if (fit_y == "gamma_hat") {
        try {
          hits = read_csv_columns(fit_input, {"hits"})[0];
          table = true;
        } catch (const ValidationError&) {
        }
      }
      std::vector<FitPoint> pts;
      for (std::size_t i = 0; i < cols[0].size(); ++i) {
        const double x = cols[0][i], y = cols[1][i];
        if (!(x > 0.0) || !(y > 0.0)) continue;
        if (table && hits[i] < static_cast<double>(fit_min_hits)) continue;
        pts.push_back({x, y, fit_se.empty() ? 0.0 : cols[2][i]});
      }
      require(pts.size() >= 2, "fit needs at least two positive points");
      json j = to_json(loglog_fit(pts));
      j["points"] = pts.size();
      emit_json("", j);
      return 0;
    }
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalGuard& e) {
    std::cerr << "numerical guard: " << e.what() << '\n';
    return 3;
  } catch (const json::exception& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
