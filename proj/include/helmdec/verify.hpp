// Copyright (c) 2026 helmdec contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "helmdec/decompose.hpp"

#include <functional>
#include <iosfwd>

namespace helmdec::verify {

using mesh::TetMesh;

// ratio(h) ~ a + b log(1/h); residual = |r - fit|_2 / |r|_2.
struct Fit {
  double a = 0, b = 0, residual = 0;
};
Fit fit_log(const std::vector<double>& h, const std::vector<double>& ratio);
// PASS iff residual <= 0.2 and, without a log factor, |b| <= 0.1 a.
bool fit_passes(const Fit& f, bool log_claim);

// max over tets of |curl(r_h w) - curl w| and of |curl w|, w nodal vector.
std::pair<double, double> curl_commute_defect(const TetMesh& m, const Vec& w);

// Mesh of the decomposition domain at h = 2^-level (cube side units).
TetMesh domain_at(const std::string& geometry, int level);
std::uint64_t sample_seed(std::uint64_t seed, int level, int sample);

enum class Field { Random, Gradient, Zero };

struct LevelRecord {
  int level = 0;
  double h = 0;
  double ratio = 0;  // max over samples of the fitted quotient
  double w_semi = 0, w_full = 0, R_semi = 0, R_full = 0, p_L2 = 0, p_full = 0;
  double identity = 0;
  int samples = 0;
};

struct StabilityReport {
  std::string geometry;
  std::vector<std::string> spec;
  std::string route, claim, pclaim, ratio_name;
  std::uint64_t seed = 0;
  std::vector<LevelRecord> levels;
  Fit fit;
  bool pass = false;
  std::string verdict;
};

struct SweepOptions {
  std::string geometry;
  std::vector<std::string> spec;
  std::string route = "auto";  // or a required path prefix
  std::string ratio = "auto";  // auto: w against the claimed right-hand side
  std::vector<int> levels;
  int samples = 4;
  std::uint64_t seed = 1;
  int threads = 1;
};

StabilityReport sweep(const SweepOptions& o);

struct Check {
  std::string name;
  double measured = 0, tol = 0;
  bool pass = false;
  bool skipped = false;
};

struct Ledger {
  std::string geometry;
  std::vector<std::string> spec;
  std::string route;
  int level = 0;
  std::uint64_t seed = 0;
  std::vector<Check> checks;
  bool pass() const;
};

// Every assertable invariant of one (geometry, Gamma) combination.
Ledger invariant_battery(const std::string& geometry, const std::vector<std::string>& spec,
                         int level, std::uint64_t seed, const std::string& route = "auto");

// |E_h(v x n)|_curl / |v|_curl with E_h the curl-harmonic extension of the
// boundary moments.  curl part is |curl E_h v| / |v|_curl.
struct TraceProbe {
  std::string geometry;
  std::vector<int> level;
  std::vector<double> h, ratio, curl_part;
  int skipped = 0;
  Fit fit;
  bool pass = false;
};
TraceProbe trace_inequality_probe(const std::string& geometry, const std::vector<int>& levels,
                                  int samples, std::uint64_t seed, Field field = Field::Random);

// Gamma specs exercised for each catalog geometry.
std::vector<std::vector<std::string>> battery_specs(const std::string& geometry);

std::string spec_label(const std::vector<std::string>& spec);  // "G.z0+G.z1", "none"

void write_csv(std::ostream& os, const StabilityReport& r, std::uint64_t config_hash);
void write_json(std::ostream& os, const StabilityReport& r, std::uint64_t config_hash);
void write_csv(std::ostream& os, const std::vector<Ledger>& l, std::uint64_t config_hash);
void write_json(std::ostream& os, const std::vector<Ledger>& l, std::uint64_t config_hash);
void write_csv(std::ostream& os, const TraceProbe& p, std::uint64_t config_hash);

// Runs f(i) for i in [0, n) on up to `threads` workers.
void parallel_for(int n, int threads, const std::function<void(int)>& f);
// HELMDEC_THREADS or 1.
int thread_count();

}  // namespace helmdec::verify
