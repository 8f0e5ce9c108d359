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

#include <cmath>
#include <string>

#include "sparsekit/errors.hpp"

namespace sparsekit {

/// Search structure behind the greedy selection loops.
enum class Backend { kExact, kAipe, kAfn };

inline std::string to_string(Backend b) {
  switch (b) {
    case Backend::kExact: return "exact";
    case Backend::kAipe: return "aipe";
    case Backend::kAfn: return "afn";
  }
  return "unknown";
}

inline Backend parse_backend(const std::string &s) {
  if (s == "exact") return Backend::kExact;
  if (s == "aipe") return Backend::kAipe;
  if (s == "afn") return Backend::kAfn;
  throw ConfigError("unknown backend '" + s + "' (expected exact, aipe or afn)");
}

/// Upper end of the admissible c window: 1.01 tau/(0.01 + tau) for aipe,
/// 400 tau/(399 + tau) for afn.
inline double backend_window_upper(Backend backend, double tau) {
  return backend == Backend::kAipe ? 1.01 * tau / (0.01 + tau) : 400.0 * tau / (399.0 + tau);
}

inline void check_backend_window(Backend backend, double c, double tau) {
  if (backend == Backend::kExact) return;
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("need 0 < tau < 1");
  const double hi = backend_window_upper(backend, tau);
  if (!(c > tau && c < hi)) {
    throw ConfigError("violated tau < c < " +
                      std::string(backend == Backend::kAipe ? "1.01 tau / (0.01 + tau)"
                                                            : "400 tau / (399 + tau)") +
                      " = " + std::to_string(hi) + " (c = " + std::to_string(c) + ")");
  }
}

/// eps with (1 + eps)^2 = c(1 - tau)/(c - tau): the estimation accuracy that
/// turns the aipe backend into a (c, tau) minimum inner product search.
inline double aipe_epsilon(double c, double tau) {
  return std::sqrt(c * (1.0 - tau) / (c - tau)) - 1.0;
}

}  // namespace sparsekit
