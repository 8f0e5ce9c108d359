// Copyright 2026 the sparsekit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sparsekit/afn.hpp"
#include "sparsekit/backend.hpp"
#include "sparsekit/errors.hpp"
#include "sparsekit/expdesign.hpp"
#include "sparsekit/io.hpp"
#include "sparsekit/kadison_singer.hpp"
#include "sparsekit/linalg.hpp"
#include "sparsekit/minip.hpp"
#include "sparsekit/random.hpp"
#include "sparsekit/sketch.hpp"
#include "sparsekit/sparsifier.hpp"

namespace sparsekit {

/// Everything one command needs. Unset optionals take per-command defaults.
struct RunConfig {
  std::string command;
  std::string input;
  std::optional<MatrixFormat> format;  // from the file extension when unset
  std::string weights;                 // expdesign: pi, one value per line
  std::optional<double> epsilon;
  std::optional<double> c;
  std::optional<double> tau;
  std::optional<double> lambda;
  std::optional<double> delta;
  std::optional<double> gamma;
  std::optional<std::size_t> n;
  std::optional<std::size_t> groups;  // N
  std::uint64_t seed = 0;
  Profile profile = Profile::kFull;
  double omega = 3.0;
  Backend backend = Backend::kExact;
  bool whiten = false;
  std::string variant = "reference";  // sparsify: reference | fast
  std::string suite = "all";          // oracle: minip | sketch | afn | all
  std::size_t bench_m = 4096;
  std::size_t bench_d = 16;
  std::optional<std::size_t> max_iterations;
  // Size overrides for the approximate backends (0: derived from the profile).
  std::size_t sketch_rows = 0;
  std::size_t sketch_count = 0;
  std::size_t replicas = 0;
  std::optional<double> sketch_constant;  // aipe k' constant
  bool strict = false;      // NumericalWarning counts become errors
  bool size_check = true;   // expdesign n-condition
};

/// Solver output, verdicts and counters; timings are kept apart so that two
/// runs of one config compare equal on `body`.
struct RunReport {
  nlohmann::json body;
  nlohmann::json timings = nlohmann::json::object();
  bool pass = true;
  std::string csv;  // bench only
};

inline nlohmann::json report_json(const RunReport &r) {
  nlohmann::json out = r.body;
  out["timings"] = r.timings;
  return out;
}

struct BenchRow {
  std::string variant;
  std::size_t m = 0;
  std::size_t d = 0;
  double epsilon = 0.0;
  std::size_t iterations = 0;
  double total_seconds = 0.0;
  double search_seconds = 0.0;
  double search_seconds_per_iteration = 0.0;
  bool operator==(const BenchRow &) const = default;
};

inline constexpr const char *kBenchHeader =
    "variant,m,d,epsilon,iterations,total_seconds,search_seconds,search_seconds_per_iteration";

inline void write_bench_csv(std::ostream &out, const std::vector<BenchRow> &rows) {
  out << kBenchHeader << '\n';
  for (const auto &r : rows) {
    out << r.variant << ',' << r.m << ',' << r.d << ',';
    detail::write_double(out, r.epsilon);
    out << ',' << r.iterations << ',';
    detail::write_double(out, r.total_seconds);
    out << ',';
    detail::write_double(out, r.search_seconds);
    out << ',';
    detail::write_double(out, r.search_seconds_per_iteration);
    out << '\n';
  }
}

inline std::vector<BenchRow> parse_bench_csv(std::istream &in) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kBenchHeader) {
    throw ParseError("line 1: expected header '" + std::string(kBenchHeader) + "'");
  }
  std::vector<BenchRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) detail::parse_fail(line_no, "expected 8 columns");
    BenchRow r;
    r.variant = std::string(detail::trim(cells[0]));
    r.m = detail::parse_count(cells[1], line_no);
    r.d = detail::parse_count(cells[2], line_no);
    r.epsilon = detail::parse_double(cells[3], line_no);
    r.iterations = detail::parse_count(cells[4], line_no);
    r.total_seconds = detail::parse_double(cells[5], line_no);
    r.search_seconds = detail::parse_double(cells[6], line_no);
    r.search_seconds_per_iteration = detail::parse_double(cells[7], line_no);
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

inline nlohmann::json config_echo(const RunConfig &c) {
  nlohmann::json j;
  j["command"] = c.command;
  j["input"] = c.input;
  if (c.format) j["format"] = *c.format == MatrixFormat::kCsv ? "csv" : "matrix-market";
  if (!c.weights.empty()) j["weights"] = c.weights;
  auto put = [&](const char *key, const auto &v) {
    if (v) j[key] = *v;
  };
  put("epsilon", c.epsilon);
  put("c", c.c);
  put("tau", c.tau);
  put("lambda", c.lambda);
  put("delta", c.delta);
  put("gamma", c.gamma);
  put("n", c.n);
  put("N", c.groups);
  put("max_iterations", c.max_iterations);
  put("sketch_constant", c.sketch_constant);
  if (c.sketch_rows) j["sketch_rows"] = c.sketch_rows;
  if (c.sketch_count) j["sketch_count"] = c.sketch_count;
  if (c.replicas) j["replicas"] = c.replicas;
  j["seed"] = c.seed;
  j["profile"] = to_string(c.profile);
  j["omega"] = c.omega;
  j["backend"] = to_string(c.backend);
  j["whiten"] = c.whiten;
  return j;
}

inline VectorFamily load_input(const RunConfig &c) {
  if (c.input.empty()) throw ConfigError("--input is required for " + c.command);
  return parse_matrix_file(c.input, c.format.value_or(format_from_path(c.input)));
}

inline void require_open_unit(const char *name, double v) {
  if (!(v > 0.0 && v < 1.0)) {
    throw ConfigError(std::string("violated 0 < ") + name + " < 1 (" + name + " = " +
                      std::to_string(v) + ")");
  }
}

inline double approx_c(const RunConfig &c) {
  if (c.backend == Backend::kExact) return c.c.value_or(1.0);
  if (!c.c || !c.tau) throw ConfigError("backend " + to_string(c.backend) + " needs --c and --tau");
  return *c.c;
}

/// Isotropic family from seeded Gaussian rows.
inline VectorFamily gaussian_isotropic(std::size_t m, std::size_t d, std::uint64_t seed) {
  RngState rng(seed);
  std::normal_distribution<double> g;
  VectorFamily raw(d);
  for (std::size_t i = 0; i < m; ++i) {
    Vector v(static_cast<Eigen::Index>(d));
    for (auto &x : v) x = g(rng);
    raw.add(v);
  }
  const std::vector<double> ones(m, 1.0);
  return whiten(raw, ones);
}

inline void apply_sizes(const RunConfig &c, AdeParams &aipe, MinIpParams &afn) {
  aipe.profile = c.profile;
  afn.profile = c.profile;
  if (c.sketch_constant) aipe.sketch_constant = *c.sketch_constant;
  if (c.sketch_count) aipe.sketch_count = c.sketch_count;
  afn.sketch_rows = c.sketch_rows;
  afn.sketch_count = c.sketch_count;
  afn.replicas = c.replicas;
  if (c.lambda) afn.lambda = *c.lambda;
}

inline nlohmann::json selection_json(const WeightedSelection &s) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto &[i, w] : s.entries()) out.push_back({{"index", i}, {"weight", w}});
  return out;
}

inline Vector unit_gaussian(RngState &rng, std::size_t d) {
  std::normal_distribution<double> g;
  Vector v(static_cast<Eigen::Index>(d));
  for (auto &x : v) x = g(rng);
  return v.normalized();
}

}  // namespace detail

/// Parameter windows checked before any solver runs.
inline void validate_config(const RunConfig &c) {
  if (c.epsilon) detail::require_open_unit("eps", *c.epsilon);
  if (c.delta) detail::require_open_unit("delta", *c.delta);
  if (c.tau) detail::require_open_unit("tau", *c.tau);
  if (c.lambda && !(*c.lambda > 0.0)) throw ConfigError("violated lambda > 0");
  if (c.c && !(*c.c > 0.0)) throw ConfigError("violated c > 0");
  if (!(c.omega >= 2.0 && c.omega <= 3.0)) throw ConfigError("violated 2 <= omega <= 3");
  if (c.command == "ks" || c.command == "expdesign") {
    if (c.backend != Backend::kExact) {
      check_backend_window(c.backend, detail::approx_c(c), *c.tau);
    }
  }
  if (c.command == "expdesign") {
    const double gamma = c.gamma.value_or(3.0);
    const double eps = c.epsilon.value_or(1.0 / 3.0);
    if (!(gamma >= 3.0)) throw ConfigError("violated gamma >= 3");
    if (!(eps <= 1.0 / gamma)) throw ConfigError("violated eps <= 1/gamma");
    if (!c.n) throw ConfigError("--n is required for expdesign");
  }
  if (c.command == "sparsify" && c.variant != "reference" && c.variant != "fast") {
    throw ConfigError("unknown variant '" + c.variant + "' (expected reference or fast)");
  }
}

inline RunReport run_sparsify(const RunConfig &cfg) {
  validate_config(cfg);
  RunReport r;
  r.body["config"] = detail::config_echo(cfg);
  auto t0 = detail::Clock::now();
  VectorFamily x = detail::load_input(cfg);
  r.timings["load"] = detail::seconds_since(t0);
  if (cfg.whiten) {
    t0 = detail::Clock::now();
    x = whiten(x, std::vector<double>(x.size(), 1.0));
    r.timings["whiten"] = detail::seconds_since(t0);
  }
  BssOptions opt;
  opt.epsilon = cfg.epsilon.value_or(0.5);
  opt.omega = cfg.omega;
  opt.record_trace = true;
  t0 = detail::Clock::now();
  const bool fast = cfg.variant == "fast";
  const BssResult res = fast ? sparsify_fast(x, opt) : bss_reference(x, opt);
  r.timings["solve"] = detail::seconds_since(t0);
  r.timings["search"] = res.search_seconds;
  if (cfg.strict && res.numerical_warnings > 0) {
    throw NumericalWarning(std::to_string(res.numerical_warnings) +
                           " tree searches reported numerical warnings");
  }
  t0 = detail::Clock::now();
  const SparsifierReport v = verify_sparsifier(x, res.selection, opt.epsilon);
  r.timings["verify"] = detail::seconds_since(t0);
  const std::size_t support_cap = bss_iterations(x.dim(), opt.epsilon);

  auto &out = r.body["result"];
  out["variant"] = cfg.variant;
  out["m"] = x.size();
  out["d"] = x.dim();
  out["iterations"] = res.iterations;
  out["search"] = to_string(res.search);
  out["fallbacks"] = res.fallbacks;
  out["numerical_warnings"] = res.numerical_warnings;
  out["selection"] = detail::selection_json(res.selection);
  nlohmann::json trace = nlohmann::json::array();
  for (const auto &s : res.trace) {
    trace.push_back({{"t", s.iteration}, {"index", s.index}, {"gap", s.gap},
                     {"lambda_min", s.lambda_min}, {"lambda_max", s.lambda_max},
                     {"fallback", s.fallback}});
  }
  out["trace"] = std::move(trace);
  const double eps = opt.epsilon;
  const double proved_lower = fast ? (1 - eps - 3 * eps * eps) / (1 + 3 * eps)
                                   : (1 - eps - 2 * eps * eps) / (1 + 2 * eps);
  r.pass = v.pass && v.support <= support_cap;
  r.body["verdict"] = {{"check", "spectrum inside (1 - eps - 2 eps^2, 1 + eps)"},
                       {"lambda_min", v.lambda_min},
                       {"lambda_max", v.lambda_max},
                       {"lower", v.lower_bound},
                       {"upper", v.upper_bound},
                       {"proved_lower", proved_lower},
                       {"support", v.support},
                       {"support_cap", support_cap},
                       {"pass", r.pass}};
  return r;
}

inline RunReport run_ks(const RunConfig &cfg) {
  validate_config(cfg);
  RunReport r;
  r.body["config"] = detail::config_echo(cfg);
  auto t0 = detail::Clock::now();
  const VectorFamily v = detail::load_input(cfg);
  r.timings["load"] = detail::seconds_since(t0);
  if (v.dim() == 0 || v.size() % v.dim() != 0) {
    throw PreconditionViolation("need m to be a multiple of d");
  }
  KsOptions opt;
  opt.groups = cfg.groups.value_or(v.size() / v.dim());
  opt.count = cfg.n.value_or(v.size() / 2);
  opt.backend = cfg.backend;
  opt.c = detail::approx_c(cfg);
  opt.tau = cfg.tau.value_or(0.5);
  opt.delta = cfg.delta.value_or(0.1);
  opt.seed = cfg.seed;
  detail::apply_sizes(cfg, opt.aipe, opt.afn);
  if (cfg.epsilon) opt.afn.epsilon = *cfg.epsilon;
  t0 = detail::Clock::now();
  const KsResult res = ks_select(v, opt);
  r.timings["solve"] = detail::seconds_since(t0);

  const double a_n = res.barriers.back();
  const double factor = cfg.backend == Backend::kExact  ? 1.0
                        : cfg.backend == Backend::kAipe ? 1.0 / opt.c
                                                        : 2.0 / opt.c;
  bool monotone = true;
  for (std::size_t j = 1; j < res.potentials.size(); ++j) {
    monotone = monotone && res.potentials[j] <= res.potentials[j - 1] * (1.0 + 1e-12);
  }
  const bool norm_ok =
      cfg.backend == Backend::kExact ? res.final_norm < a_n : res.final_norm <= factor * a_n;
  r.pass = norm_ok && monotone;
  auto &out = r.body["result"];
  out["backend"] = to_string(res.backend);
  out["order"] = res.order;
  out["scores"] = res.scores;
  out["potentials"] = res.potentials;
  out["beta"] = res.beta;
  out["final_norm"] = res.final_norm;
  out["fallbacks"] = res.fallbacks;
  r.body["verdict"] = {{"check", cfg.backend == Backend::kExact ? "norm < a_n" : "norm <= factor a_n"},
                       {"a_n", a_n},
                       {"factor", factor},
                       {"final_norm", res.final_norm},
                       {"potentials_nonincreasing", monotone},
                       {"pass", r.pass}};
  return r;
}

inline RunReport run_expdesign(const RunConfig &cfg) {
  validate_config(cfg);
  RunReport r;
  r.body["config"] = detail::config_echo(cfg);
  auto t0 = detail::Clock::now();
  const VectorFamily x = detail::load_input(cfg);
  std::vector<double> pi;
  if (!cfg.weights.empty()) {
    pi = parse_weight_file(cfg.weights, format_from_path(cfg.weights));
  } else {
    pi.assign(x.size(), static_cast<double>(*cfg.n) / static_cast<double>(x.size()));
  }
  r.timings["load"] = detail::seconds_since(t0);
  SwapOptions opt;
  opt.count = *cfg.n;
  opt.epsilon = cfg.epsilon.value_or(1.0 / 3.0);
  opt.gamma = cfg.gamma.value_or(3.0);
  opt.c = detail::approx_c(cfg);
  opt.tau = cfg.tau.value_or(0.5);
  opt.delta = cfg.delta.value_or(0.1);
  opt.backend = cfg.backend;
  opt.seed = cfg.seed;
  opt.whiten_input = cfg.whiten;
  opt.enforce_size_condition = cfg.size_check;
  opt.iteration_limit = cfg.max_iterations;
  detail::apply_sizes(cfg, opt.aipe, opt.afn);
  t0 = detail::Clock::now();
  const SwapResult res = swap_round(x, pi, opt);
  r.timings["solve"] = detail::seconds_since(t0);

  const double n = static_cast<double>(opt.count);
  bool witnesses = true;
  bool normalized = true;
  nlohmann::json steps = nlohmann::json::array();
  for (const auto &s : res.steps) {
    witnesses = witnesses && s.best_b_minus <= (1 - opt.epsilon) / (res.beta * n) &&
                s.best_b_plus >= 1 / (res.beta * n);
    normalized = normalized && std::abs(s.trace_a - 1.0) <= 1e-8;
    steps.push_back({{"t", s.iteration}, {"removed", s.removed}, {"added", s.added},
                     {"b_minus", s.b_minus}, {"b_plus", s.b_plus}, {"fallback", s.fallback}});
  }
  const RegretCheck rc = check_regret(res, opt.epsilon);
  r.pass = res.lambda_min >= res.target && witnesses && normalized;
  auto &out = r.body["result"];
  out["backend"] = to_string(res.backend);
  out["set"] = res.final_set;
  out["lambda_trace"] = res.lambda_trace;
  out["swaps"] = res.swaps;
  out["max_iterations"] = res.max_iterations;
  out["fallbacks"] = res.fallbacks;
  out["alpha"] = res.alpha;
  out["beta"] = res.beta;
  out["steps"] = std::move(steps);
  out["regret"] = {{"bound", rc.bound},
                   {"corrected_bound", rc.corrected_bound},
                   {"holds", rc.holds},
                   {"corrected_holds", rc.corrected_holds}};
  r.body["verdict"] = {{"check", "lambda_min >= 1 - gamma eps"},
                       {"lambda_min", res.lambda_min},
                       {"target", res.target},
                       {"witnesses", witnesses},
                       {"trace_normalized", normalized},
                       {"pass", r.pass}};
  return r;
}

/// Reference scan against the tree-driven variant on a seeded Gaussian family.
inline RunReport run_bench(const RunConfig &cfg) {
  validate_config(cfg);
  RunReport r;
  r.body["config"] = detail::config_echo(cfg);
  r.body["config"]["m"] = cfg.bench_m;
  r.body["config"]["d"] = cfg.bench_d;
  const VectorFamily x = detail::gaussian_isotropic(cfg.bench_m, cfg.bench_d, cfg.seed);
  BssOptions opt;
  opt.epsilon = cfg.epsilon.value_or(0.5);
  opt.omega = cfg.omega;
  opt.record_trace = false;
  std::vector<BenchRow> rows;
  nlohmann::json variants = nlohmann::json::array();
  for (const bool fast : {false, true}) {
    const auto t0 = detail::Clock::now();
    const BssResult res = fast ? sparsify_fast(x, opt) : bss_reference(x, opt);
    BenchRow row;
    row.variant = fast ? "fast-" + to_string(res.search) : "reference-" + to_string(res.search);
    row.m = x.size();
    row.d = x.dim();
    row.epsilon = opt.epsilon;
    row.iterations = res.iterations;
    row.total_seconds = detail::seconds_since(t0);
    row.search_seconds = res.search_seconds;
    row.search_seconds_per_iteration = res.search_seconds / static_cast<double>(res.iterations);
    variants.push_back({{"variant", row.variant},
                        {"iterations", row.iterations},
                        {"fallbacks", res.fallbacks},
                        {"selection", detail::selection_json(res.selection)}});
    r.timings[row.variant] = {{"total_seconds", row.total_seconds},
                              {"search_seconds", row.search_seconds}};
    rows.push_back(std::move(row));
  }
  r.body["result"]["variants"] = std::move(variants);
  r.pass = rows[1].search_seconds_per_iteration < rows[0].search_seconds_per_iteration;
  r.body["verdict"] = {{"check", "tree search per iteration below linear scan"},
                       {"pass", r.pass}};
  std::ostringstream csv;
  write_bench_csv(csv, rows);
  r.csv = csv.str();
  return r;
}

namespace detail {

inline nlohmann::json minip_oracle(const std::vector<Vector> &data, const RunConfig &cfg) {
  MinIpParams p;
  p.c = cfg.c.value_or(0.52);
  p.tau = cfg.tau.value_or(0.5);
  p.epsilon = cfg.epsilon.value_or(0.05);
  p.lambda = cfg.lambda.value_or(0.01);
  p.delta = cfg.delta.value_or(0.1);
  AdeParams unused;
  apply_sizes(cfg, unused, p);
  const auto index = RobustMinIpIndex::over_vectors(data, p, derive_seed(cfg.seed, 1));
  RngState qrng(derive_seed(cfg.seed, 2));
  RngState drng(derive_seed(cfg.seed, 3));
  const auto d = static_cast<std::size_t>(data[0].size());
  Vector x = unit_gaussian(drng, d);
  std::size_t successes = 0, promised = 0, promised_successes = 0, violations = 0;
  const std::size_t queries = 100;
  for (std::size_t t = 0; t < queries; ++t) {
    const MinIpResult exact = exact_min_ip_oracle(data, x);
    const auto ans = index.query(x, qrng);
    const bool promise = exact.value <= p.tau * index.data_scale() * x.norm();
    promised += promise ? 1 : 0;
    if (ans) {
      ++successes;
      promised_successes += promise ? 1 : 0;
      if (ans->normalized > index.acceptance_threshold() + 1e-12) ++violations;
    }
    // The next query depends on the previous answer.
    const Vector &y = ans ? data[ans->id] : data[t % data.size()];
    x = (x - 0.5 * y.normalized() + 0.3 * unit_gaussian(drng, d)).normalized();
  }
  const double failure =
      promised == 0 ? 0.0 : 1.0 - static_cast<double>(promised_successes) / promised;
  return {{"points", data.size()},
          {"queries", queries},
          {"successes", successes},
          {"bound_violations", violations},
          {"agreement", successes == 0 ? 1.0 : 1.0 - static_cast<double>(violations) / successes},
          {"promised", promised},
          {"failure_rate", failure},
          {"delta", p.delta},
          {"pass", violations == 0 && failure <= p.delta}};
}

inline Eigen::MatrixXd materialize_sketch(const TensorSrhtSketch &s) {
  const std::size_t d = s.dim(), b = s.rows();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(d * d));
  for (std::size_t r = 0; r < b; ++r) {
    const auto [ir, jr] = s.samples()[r];
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i * d + j)) =
            hadamard_entry(ir, i) * s.sign1()[i] * hadamard_entry(jr, j) * s.sign2()[j] /
            std::sqrt(static_cast<double>(b));
      }
    }
  }
  return m;
}

inline Eigen::MatrixXd materialize_sketch(const TensorSparseSketch &s) {
  const std::size_t d = s.dim(), b = s.rows(), k = s.sparsity(), buckets = b / k;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(b),
                                            static_cast<Eigen::Index>(d * d));
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t l = 0; l < k; ++l) {
        const std::size_t row = l * buckets + (s.bucket(1, i, l) + s.bucket(2, j, l)) % buckets;
        m(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(i * d + j)) +=
            s.sign(1, i, l) * s.sign(2, j, l) / std::sqrt(static_cast<double>(k));
      }
    }
  }
  return m;
}

template <class Sketch>
nlohmann::json sketch_check(const Sketch &s, RngState &rng) {
  const Eigen::MatrixXd m = materialize_sketch(s);
  const std::size_t d = s.dim();
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Vector u = unit_gaussian(rng, d);
    const Vector v = unit_gaussian(rng, d);
    Vector kron(static_cast<Eigen::Index>(d * d));
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        kron[static_cast<Eigen::Index>(i * d + j)] =
            u[static_cast<Eigen::Index>(i)] * v[static_cast<Eigen::Index>(j)];
      }
    }
    worst = std::max(worst, (s.apply_pair(u, v) - m * kron).cwiseAbs().maxCoeff());
  }
  const double fro = m.norm();
  return {{"dim", d},
          {"rows", s.rows()},
          {"max_abs_difference", worst},
          {"frobenius", fro},
          {"pass", worst <= 1e-9 && std::abs(fro - static_cast<double>(d)) <= 1e-9}};
}

inline nlohmann::json afn_oracle(const std::vector<Vector> &points, const RunConfig &cfg) {
  AfnParams p;
  p.approximation = 2.0;
  p.precision = 0.1;
  RngState rng(derive_seed(cfg.seed, 4));
  const auto d = static_cast<std::size_t>(points[0].size());
  std::vector<Vector> queries;
  for (int i = 0; i < 50; ++i) queries.push_back(unit_gaussian(rng, d));
  std::size_t total = 0, answered = 0, factor_violations = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto index = AfnStructure::build(points, p, derive_seed(cfg.seed, 100 + s));
    for (const auto &q : queries) {
      ++total;
      const auto ans = index.query(q);
      if (!ans) continue;
      ++answered;
      const double best = exact_furthest(points, q).distance;
      if (ans->distance < best / (p.approximation + p.precision) - 1e-12) ++factor_violations;
    }
  }
  const double rate = static_cast<double>(answered) / static_cast<double>(total);
  return {{"points", points.size()},
          {"queries", total},
          {"success_rate", rate},
          {"factor_violations", factor_violations},
          {"pass", factor_violations == 0 && rate >= 0.9}};
}

}  // namespace detail

/// Runs the named oracle suites on a fixture (or on seeded data when no input
/// is given) and reports agreement statistics.
inline RunReport run_oracle(const RunConfig &cfg) {
  validate_config(cfg);
  RunReport r;
  r.body["config"] = detail::config_echo(cfg);
  r.body["config"]["suite"] = cfg.suite;
  if (cfg.suite != "all" && cfg.suite != "minip" && cfg.suite != "sketch" && cfg.suite != "afn") {
    throw ConfigError("unknown suite '" + cfg.suite + "' (expected minip, sketch, afn or all)");
  }
  std::vector<Vector> data;
  if (!cfg.input.empty()) {
    const VectorFamily f = detail::load_input(cfg);
    if (f.empty() || f.dim() == 0) {
      r.body["status"] = "nothing to check";
      r.body["verdict"] = {{"pass", true}};
      return r;
    }
    for (std::size_t i = 0; i < f.size(); ++i) data.push_back(f[i]);
  }
  const auto t0 = detail::Clock::now();
  auto &suites = r.body["suites"];
  const bool all = cfg.suite == "all";
  if (all || cfg.suite == "minip") {
    std::vector<Vector> points = data;
    if (points.empty()) {
      RngState rng(derive_seed(cfg.seed, 10));
      for (std::size_t i = 0; i < 500; ++i) points.push_back(detail::unit_gaussian(rng, 16));
    }
    suites["minip"] = detail::minip_oracle(points, cfg);
  }
  if (all || cfg.suite == "sketch") {
    const std::size_t d = data.empty() ? 8 : static_cast<std::size_t>(data[0].size());
    RngState rng(derive_seed(cfg.seed, 11));
    suites["sketch"] = {
        {"tensor_srht", detail::sketch_check(TensorSrhtSketch(d, 64, derive_seed(cfg.seed, 12)), rng)},
        {"tensor_sparse",
         detail::sketch_check(TensorSparseSketch(d, 64, 8, derive_seed(cfg.seed, 13)), rng)}};
    suites["sketch"]["pass"] = suites["sketch"]["tensor_srht"]["pass"].get<bool>() &&
                               suites["sketch"]["tensor_sparse"]["pass"].get<bool>();
  }
  if (all || cfg.suite == "afn") {
    std::vector<Vector> points = data;
    if (points.empty()) {
      RngState rng(derive_seed(cfg.seed, 14));
      for (std::size_t i = 0; i < 200; ++i) points.push_back(detail::unit_gaussian(rng, 8));
    }
    suites["afn"] = detail::afn_oracle(points, cfg);
  }
  r.timings["oracles"] = detail::seconds_since(t0);
  r.pass = true;
  for (const auto &[name, s] : suites.items()) r.pass = r.pass && s["pass"].get<bool>();
  r.body["verdict"] = {{"pass", r.pass}};
  return r;
}

inline RunReport run_command(const RunConfig &cfg) {
  if (cfg.command == "sparsify") return run_sparsify(cfg);
  if (cfg.command == "ks") return run_ks(cfg);
  if (cfg.command == "expdesign") return run_expdesign(cfg);
  if (cfg.command == "bench") return run_bench(cfg);
  if (cfg.command == "oracle") return run_oracle(cfg);
  throw ConfigError("unknown command '" + cfg.command + "'");
}

/// Process exit status for each error class; 1 is reserved for a failed verdict.
inline int exit_code(ErrorCode code) { return 10 + static_cast<int>(code); }

}  // namespace sparsekit
