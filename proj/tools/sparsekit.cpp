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

// Command-line front end: sparsify, ks, expdesign, bench, oracle.

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "sparsekit/pipeline.hpp"

namespace {

using sparsekit::RunConfig;

void add_common(CLI::App *cmd, RunConfig &cfg, std::string &format, std::string &output) {
  cmd->add_option("--seed", cfg.seed, "master seed")->envname("SPARSEKIT_SEED");
  cmd->add_option("--output", output, "write the JSON report (CSV for bench) here");
  cmd->add_option("--format", format, "input format")
      ->check(CLI::IsMember({"matrix-market", "mtx", "csv"}));
  cmd->add_option("--profile", cfg.profile, "constant profile")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, sparsekit::Profile>{{"full", sparsekit::Profile::kFull},
                                                    {"desk", sparsekit::Profile::kDesk}}));
}

void add_input(CLI::App *cmd, RunConfig &cfg) {
  cmd->add_option("--input", cfg.input, "matrix file; rows are the vectors");
}

void add_backend(CLI::App *cmd, RunConfig &cfg) {
  cmd->add_option("--backend", cfg.backend, "search backend")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, sparsekit::Backend>{{"exact", sparsekit::Backend::kExact},
                                                    {"aipe", sparsekit::Backend::kAipe},
                                                    {"afn", sparsekit::Backend::kAfn}}));
  cmd->add_option("--c", cfg.c, "approximation constant c");
  cmd->add_option("--tau", cfg.tau, "query scaling tau");
  cmd->add_option("--delta", cfg.delta, "failure probability");
  cmd->add_option("--lambda", cfg.lambda, "Min-IP additive error");
  cmd->add_option("--sketch-rows", cfg.sketch_rows, "Min-IP sketch rows b (0: default)");
  cmd->add_option("--sketch-count", cfg.sketch_count, "sketches k (0: default)");
  cmd->add_option("--replicas", cfg.replicas, "Min-IP AFN replicas (0: default)");
  cmd->add_option("--sketch-constant", cfg.sketch_constant, "aipe sketch-count constant");
}

void emit(const std::string &text, const std::string &output) {
  if (output.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(output);
  if (!out) throw sparsekit::ConfigError("cannot write '" + output + "'");
  out << text;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"sparsekit: spectral sparsification, Kadison-Singer selection and "
               "experimental design rounding"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string format;
  std::string output;

  auto *sparsify = app.add_subcommand("sparsify", "two-barrier spectral sparsifier");
  add_input(sparsify, cfg);
  add_common(sparsify, cfg, format, output);
  sparsify->add_option("--epsilon", cfg.epsilon, "accuracy, 0 < eps < 1");
  sparsify->add_option("--omega", cfg.omega, "matrix multiplication exponent for the cost model");
  sparsify->add_option("--variant", cfg.variant, "reference (full scan) or fast (search trees)")
      ->check(CLI::IsMember({"reference", "fast"}));
  sparsify->add_flag("--whiten", cfg.whiten, "make the rows isotropic first");
  sparsify->add_flag("--strict", cfg.strict, "treat numerical warnings as errors");

  auto *ks = app.add_subcommand("ks", "barrier greedy for the Kadison-Singer selection");
  add_input(ks, cfg);
  add_common(ks, cfg, format, output);
  add_backend(ks, cfg);
  ks->add_option("--N", cfg.groups, "N, with |v_i| = 1/sqrt(N) and m = d N");
  ks->add_option("--n", cfg.n, "number of vectors to select");
  ks->add_option("--epsilon", cfg.epsilon, "Min-IP transform accuracy (afn backend)");

  auto *exp = app.add_subcommand("expdesign", "swap rounding for experimental design");
  add_input(exp, cfg);
  add_common(exp, cfg, format, output);
  add_backend(exp, cfg);
  exp->add_option("--n", cfg.n, "design size")->required();
  exp->add_option("--epsilon", cfg.epsilon, "accuracy, eps <= 1/gamma");
  exp->add_option("--gamma", cfg.gamma, "gamma >= 3");
  exp->add_option("--weights", cfg.weights, "fractional design pi (default n/m each)");
  exp->add_option("--max-iterations", cfg.max_iterations, "iteration cap replacing T");
  exp->add_flag("--whiten", cfg.whiten, "whiten by (X' diag(pi) X)^{-1/2} first");
  exp->add_flag("!--no-size-check", cfg.size_check, "skip the n >= 6d/eps^2/(gamma-1-1/c) check");

  auto *bench = app.add_subcommand("bench", "linear scan versus search trees (CSV)");
  add_common(bench, cfg, format, output);
  bench->add_option("--m", cfg.bench_m, "number of vectors");
  bench->add_option("--d", cfg.bench_d, "dimension");
  bench->add_option("--epsilon", cfg.epsilon, "accuracy");
  bench->add_option("--omega", cfg.omega, "matrix multiplication exponent");

  auto *oracle = app.add_subcommand("oracle", "check data structures against exact oracles");
  add_input(oracle, cfg);
  add_common(oracle, cfg, format, output);
  add_backend(oracle, cfg);
  oracle->add_option("--suite", cfg.suite, "minip, sketch, afn or all")
      ->check(CLI::IsMember({"minip", "sketch", "afn", "all"}));
  oracle->add_option("--epsilon", cfg.epsilon, "Min-IP transform accuracy");

  CLI11_PARSE(app, argc, argv);
  cfg.command = app.get_subcommands().front()->get_name();

  try {
    if (!format.empty()) cfg.format = sparsekit::parse_matrix_format(format);
    const sparsekit::RunReport report = sparsekit::run_command(cfg);
    if (cfg.command == "bench") {
      emit(report.csv, output);
      std::cerr << report_json(report).dump(2) << '\n';
    } else {
      emit(report_json(report).dump(2) + "\n", output);
    }
    return report.pass ? EXIT_SUCCESS : 1;
  } catch (const sparsekit::Error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return sparsekit::exit_code(e.code());
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
