// Copyright (c) 2026 helmdec contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include "helmdec/verify.hpp"

#include <cmath>
#include <sstream>

using namespace helmdec;
using namespace helmdec::verify;

TEST_CASE("fit recovers constant and logarithmic data") {
  std::vector<double> h = {0.5, 0.25, 0.125, 0.0625};
  std::vector<double> c(4, 2.0), g;
  for (double x : h) g.push_back(1.0 + 3.0 * std::log(1.0 / x));
  auto fc = fit_log(h, c);
  CHECK(fc.a == Catch::Approx(2.0));
  CHECK(std::abs(fc.b) <= 1e-12);
  CHECK(fc.residual <= 1e-12);
  CHECK(fit_passes(fc, false));
  auto fg = fit_log(h, g);
  CHECK(fg.b == Catch::Approx(3.0));
  CHECK(fit_passes(fg, true));
  CHECK_FALSE(fit_passes(fg, false));
}

TEST_CASE("fewer than three levels is a configuration error") {
  CHECK_THROWS_AS(fit_log({0.5, 0.25}, {1.0, 1.0}), ConfigError);
  SweepOptions o;
  o.geometry = "unit_cube";
  o.spec = {"G.z0"};
  o.levels = {1, 2};
  CHECK_THROWS_AS(sweep(o), ConfigError);
}

TEST_CASE("sweep on one face keeps the ratio bounded") {
  SweepOptions o;
  o.geometry = "unit_cube";
  o.spec = {"G.z0"};
  o.levels = {1, 2, 3};
  o.samples = 2;
  auto r = sweep(o);
  REQUIRE(r.levels.size() == 3);
  CHECK(r.levels[0].h > r.levels[1].h);
  for (const auto& l : r.levels) {
    CHECK(l.identity <= 1e-10);
    // |w|_1 <= |curl v|_0 from the w solve, Poincare constant 2/pi for one clamped face
    CHECK(l.ratio <= std::sqrt(1.0 + 4.0 / (M_PI * M_PI)));
  }
  CHECK(r.fit.residual <= 0.2);
}

TEST_CASE("battery ledgers pass on representative geometries") {
  for (auto [g, spec] : std::vector<std::pair<std::string, std::vector<std::string>>>{
           {"three_cube_L", {"D1.z0"}},
           {"unit_cube", {"G.x0y0"}},
           {"vertex_junction_pair", {"G1.x0", "G2.x1"}}}) {
    DYNAMIC_SECTION(g << " " << spec_label(spec)) {
      auto l = invariant_battery(g, spec, 2, 3);
      for (const auto& c : l.checks) {
        INFO(c.name << " measured " << c.measured << " tol " << c.tol);
        CHECK((c.pass || c.skipped));
      }
      CHECK(l.pass());
    }
  }
}

TEST_CASE("battery outputs are reproducible") {
  std::vector<Ledger> a = {invariant_battery("unit_cube", {"G.z0"}, 2, 5)};
  std::vector<Ledger> b = {invariant_battery("unit_cube", {"G.z0"}, 2, 5)};
  std::ostringstream sa, sb;
  write_json(sa, a, 17);
  write_json(sb, b, 17);
  CHECK(sa.str() == sb.str());
  CHECK(sa.str().find("0000000000000011") != std::string::npos);
}

TEST_CASE("trace probe skips zero data and sees no curl for gradients") {
  auto z = trace_inequality_probe("unit_cube", {1, 2, 3}, 2, 1, Field::Zero);
  CHECK(z.skipped == 6);
  CHECK(z.h.empty());
  auto g = trace_inequality_probe("unit_cube", {1, 2, 3}, 1, 1, Field::Gradient);
  REQUIRE(g.curl_part.size() == 3);
  for (double c : g.curl_part) CHECK(c <= 1e-10);
}

int main(int argc, char* argv[]) { return Catch::Session().run(argc, argv); }
