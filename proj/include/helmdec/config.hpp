// Copyright (c) 2026 helmdec contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "helmdec/common.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace helmdec::cli {

// INI text: [section] headers, key = value lines, whole-line '#' or ';' comments.
//
//   [run]       geometry, gamma, route, seed
//   [mesh]      level
//   [decompose] level, field (random|gradient|zero|incompatible), amplitude
//   [sweep]     levels, samples, ratio, trace_probe
//   [battery]   level, all_specs
//   [hx]        mode (levels|jump|solve), levels, level, jumps, alpha, beta, tol, maxit
struct ExperimentConfig {
  std::string geometry = "unit_cube";
  std::vector<std::string> gamma;
  std::string route = "auto";
  std::uint64_t seed = 1;

  int mesh_level = 2;

  int decompose_level = 2;
  std::string field = "random";
  double amplitude = 0.01;

  std::vector<int> sweep_levels = {1, 2, 3};
  int samples = 4;
  std::string ratio = "auto";
  bool trace_probe = false;

  int battery_level = 2;
  bool all_specs = false;

  std::string hx_mode = "levels";
  std::vector<int> hx_levels = {2, 3, 4};
  int hx_level = 3;
  std::vector<double> jumps = {1, 1e2, 1e4, 1e6};
  std::vector<double> alpha, beta;
  double tol = 1e-8;
  int maxit = 5000;

  // Canonical "section.key=value" lines of every resolved setting.
  std::string canonical() const;
  std::uint64_t hash() const {
    auto s = canonical();
    return fnv1a(s.data(), s.size());
  }
};

// Throws ConfigError on syntax errors, unknown sections or keys, duplicate
// keys and invalid values.
ExperimentConfig parse_config(std::istream& is, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

std::string hex16(std::uint64_t x);

// Entry point of the helmdec executable; returns the process exit code.
int run(int argc, char** argv);

}  // namespace helmdec::cli
