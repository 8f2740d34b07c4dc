// Copyright (c) 2026 helmdec contributors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: one PASS/FAIL line per criterion, exit status 0 iff all pass.

#include "helmdec/hx.hpp"
#include "helmdec/verify.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <sys/wait.h>

using namespace helmdec;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

int failures = 0;

void report(int id, const std::string& what, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << what << " | " << detail
            << std::endl;
}

bool vertex_junction(const std::string& g) { return g.rfind("vertex_junction", 0) == 0; }

// Criteria 1, 2 and 4 share the decompositions; 4 is reported after 3.
std::function<void()> identity_trace_stokes() {
  const auto t0 = Clock::now();
  double worst_identity = 0, worst_stokes = 0;
  long splits = 0, loops = 0, trace_violations = 0, errors = 0;
  std::string first_error, worst_case;
  for (const auto& g : mesh::catalog_names()) {
    for (const auto& spec : verify::battery_specs(g)) {
      for (int level : {1, 2, 3}) {
        auto m = verify::domain_at(g, level);
        auto t = mesh::tag_trace(m, spec);
        for (int k = 0; k < 20; ++k) {
          Vec v = dec::random_field(m, t, verify::sample_seed(2026, level, k));
          dec::HelmholtzSplit s;
          try {
            s = dec::decompose(m, v, t);
          } catch (const std::exception& e) {
            if (errors++ == 0)
              first_error = g + " " + verify::spec_label(spec) + " h=" + num(m.nominal_h) + ": " + e.what();
            continue;
          }
          ++splits;
          double id = dec::identity_residual(m, v, s);
          if (id > worst_identity) {
            worst_identity = id;
            worst_case = g + " " + verify::spec_label(spec) + " h=" + num(m.nominal_h);
          }
          for (int i = 0; i < m.nv(); ++i)
            if (t.nodes[i] && (s.p[i] != 0.0 || !s.w.segment<3>(3 * i).isZero(0.0))) ++trace_violations;
          for (int e = 0; e < m.ne(); ++e)
            if (t.edges[e] && s.R[e] != 0.0) ++trace_violations;
          for (const auto& L : s.loops) {
            ++loops;
            worst_stokes = std::max(worst_stokes, L.stokes_defect() / (1 + std::abs(L.C)));
          }
        }
      }
    }
  }
  const double elapsed = seconds_since(t0);
  std::string err = errors ? " errors=" + std::to_string(errors) + " first: " + first_error : "";
  report(1, "identity <= 1e-10 on every geometry, Gamma spec, h in {1/2,1/4,1/8}, 20 samples, < 300 s",
         errors == 0 && worst_identity <= 1e-10 && elapsed < 300,
         "splits=" + std::to_string(splits) + " max=" + num(worst_identity) + " (" + worst_case +
             ") time=" + num(elapsed) + "s" + err);
  report(2, "p, w and R exactly zero on Gamma", errors == 0 && trace_violations == 0,
         "nonzero entries=" + std::to_string(trace_violations) + " over " + std::to_string(splits) +
             " splits");
  return [=] {
    report(4, "loop constants |C - flux/l| <= 1e-12 (1 + |C|)", loops > 0 && worst_stokes <= 1e-12,
           "loops=" + std::to_string(loops) + " max=" + num(worst_stokes));
  };
}

void curl_commutes() {
  double worst = 0;
  int fields = 0;
  for (const auto& g : mesh::catalog_names()) {
    auto m = verify::domain_at(g, 2);
    for (int k = 0; k < 100; ++k) {
      Vec w = dec::random_nodal(3 * m.nv(), verify::sample_seed(3, 2, k));
      auto [defect, scale] = verify::curl_commute_defect(m, w);
      worst = std::max(worst, defect / std::max(1.0, scale));
      ++fields;
    }
  }
  report(3, "curl(r_h w) = curl w elementwise, 100 fields per geometry", worst <= 1e-12,
         "fields=" + std::to_string(fields) + " max relative=" + num(worst));
}

void gradient_absorption() {
  double worst = 0;
  int cases = 0, errors = 0;
  std::string first_error;
  for (const auto& g : mesh::catalog_names()) {
    for (const auto& spec : verify::battery_specs(g)) {
      for (int level : {1, 2, 3}) {
        auto m = verify::domain_at(g, level);
        auto t = mesh::tag_trace(m, spec);
        Vec q = dec::random_nodal(m.nv(), verify::sample_seed(5, level, 0));
        for (int i = 0; i < m.nv(); ++i)
          if (t.nodes[i]) q[i] = 0.0;
        Vec v = fem::operators(m)->G * q;
        try {
          auto s = dec::decompose(m, v, t);
          double qn = fem::norm(m, q, fem::FieldKind::Nodal, fem::NormKind::H1);
          double wn = fem::norm(m, s.w, fem::FieldKind::NodalVector, fem::NormKind::H1);
          double rn = fem::norm(m, s.R, fem::FieldKind::Edge, fem::NormKind::L2) / m.nominal_h;
          worst = std::max(worst, (wn + rn) / qn);
          ++cases;
        } catch (const std::exception& e) {
          if (errors++ == 0) first_error = g + " " + verify::spec_label(spec) + ": " + e.what();
        }
      }
    }
  }
  report(5, "gradients: |w|_1 + |R|_0 / h <= 1e-9 |q|_1", errors == 0 && worst <= 1e-9,
         "cases=" + std::to_string(cases) + " max=" + num(worst) +
             (errors ? " errors=" + std::to_string(errors) + " first: " + first_error : ""));
}

void log_fits() {
  const auto t0 = Clock::now();
  verify::SweepOptions o;
  o.geometry = "unit_cube";
  o.levels = {1, 2, 3, 4};
  o.seed = 6;
  o.threads = verify::thread_count();
  o.spec = {"G.z0"};
  auto face = verify::sweep(o);
  o.spec = {"G.x0", "G.x1", "G.y0", "G.y1", "G.z0", "G.z1"};
  auto full = verify::sweep(o);
  const double elapsed = seconds_since(t0);
  bool face_ok = face.fit.residual <= 0.2;
  bool full_ok = full.fit.residual <= 0.2 && std::abs(full.fit.b) <= 0.1 * full.fit.a;
  auto ratios = [](const verify::StabilityReport& r) {
    std::string s;
    for (const auto& l : r.levels) s += (s.empty() ? "" : ",") + num(l.ratio);
    return s;
  };
  report(6, "w ratio log fit on the unit cube, one face and full boundary, < 600 s",
         face_ok && full_ok && elapsed < 600,
         "face: ratios=" + ratios(face) + " residual=" + num(face.fit.residual) +
             (face_ok ? " ok" : " fails") + "; boundary: ratios=" + ratios(full) +
             " a=" + num(full.fit.a) + " b=" + num(full.fit.b) + " residual=" +
             num(full.fit.residual) + (full_ok ? " ok" : " fails |b| <= 0.1 a") +
             "; time=" + num(elapsed) + "s");
}

void vertex_gate() {
  double worst_gradient = 0, weakest_violation = INFINITY;
  int gradients = 0, refusals = 0, perturbed = 0, errors = 0;
  std::string first_error;
  for (const auto& g : mesh::catalog_names()) {
    if (!vertex_junction(g)) continue;
    for (const auto& spec : verify::battery_specs(g)) {
      for (int level : {1, 2, 3}) {
        auto m = verify::domain_at(g, level);
        auto t = mesh::tag_trace(m, spec);
        auto ops = fem::operators(m);
        for (int k = 0; k < 3; ++k) {
          Vec q = dec::random_nodal(m.nv(), verify::sample_seed(7, level, k));
          for (int i = 0; i < m.nv(); ++i)
            if (t.nodes[i]) q[i] = 0.0;
          Vec v = ops->G * q;
          auto rep = dec::junction_functionals(m, v, t);
          worst_gradient = std::max(worst_gradient, rep.max_abs());
          try {
            dec::decompose(m, v, t);
            ++gradients;
          } catch (const std::exception& e) {
            if (errors++ == 0) first_error = g + " " + verify::spec_label(spec) + ": " + e.what();
          }
        }
        Vec pert;
        try {
          pert = dec::junction_perturbation(m, t, 0.01);
        } catch (const PreconditionError&) {
          continue;  // no gated block for this Gamma
        }
        ++perturbed;
        Vec u = dec::random_field(m, t, verify::sample_seed(7, level, 9)) + pert;
        auto rep = dec::junction_functionals(m, u, t);
        weakest_violation = std::min(weakest_violation, rep.max_abs());
        try {
          dec::decompose(m, u, t);
        } catch (const dec::CompatibilityError&) {
          ++refusals;
        }
      }
    }
  }
  report(7, "vertex gate: gradients pass with F <= 1e-10, perturbations refused with |F| > 1e-3",
         errors == 0 && worst_gradient <= 1e-10 && perturbed > 0 && refusals == perturbed &&
             weakest_violation > 1e-3,
         "gradients=" + std::to_string(gradients) + " max F=" + num(worst_gradient) +
             " perturbed=" + std::to_string(perturbed) + " refused=" + std::to_string(refusals) +
             " min |F|=" + num(weakest_violation) +
             (errors ? " errors=" + std::to_string(errors) + " first: " + first_error : ""));
}

void hx_sanity() {
  auto rows = hx::level_sweep("unit_cube", {2, 3, 4}, 8, 1e-8, 5000);
  std::vector<double> h, it;
  bool fewer = true, converged = true;
  std::string counts;
  for (const auto& r : rows) {
    h.push_back(r.h);
    it.push_back(r.iterations);
    fewer = fewer && r.iterations < r.cg_iterations;
    converged = converged && r.converged;
    counts += (counts.empty() ? "" : ",") + std::to_string(r.iterations) + "/" +
              std::to_string(r.cg_iterations);
  }
  auto fit = verify::fit_log(h, it);
  auto jumps = hx::jump_sweep("three_cube_L", 3, {1, 1e2, 1e4, 1e6}, 8, 1e-8, 5000);
  std::string jc;
  for (const auto& r : jumps) jc += (jc.empty() ? "" : ",") + std::to_string(r.iterations);
  report(8, "HX: log-growth iteration fit, fewer iterations than CG, jump sweep reported",
         converged && fewer && verify::fit_passes(fit, true) && jumps.size() == 4,
         "hx/cg at h=1/4,1/8,1/16: " + counts + " fit residual=" + num(fit.residual) +
             "; jump iterations " + jc);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int run_cli(const fs::path& cfg, const std::string& cmd, const fs::path& out) {
  std::string line = std::string(HELMDEC_CLI) + " " + cmd + " --config " + cfg.string() +
                     " --out " + out.string() + " > /dev/null 2>&1";
  int status = std::system(line.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void cli_determinism() {
  auto root = fs::temp_directory_path() / "helmdec_acceptance_cli";
  fs::remove_all(root);
  fs::create_directories(root);
  auto cfg = root / "run.ini";
  std::ofstream(cfg) << "[run]\ngeometry = three_cube_L\ngamma = D1.z0\nseed = 9\n"
                        "[sweep]\nlevels = 1 2 3\nsamples = 2\n"
                        "[hx]\nmode = jump\nlevel = 2\n";
  bool ok = true;
  for (const auto& dir : {"a", "b"})
    for (const auto& cmd : {"mesh", "decompose", "sweep", "battery", "hx"})
      ok = ok && run_cli(cfg, cmd, root / dir) == 0;
  int files = 0, differ = 0;
  if (ok) {
    for (const auto& e : fs::directory_iterator(root / "a")) {
      if (e.path().string().ends_with("_timing.csv")) continue;
      ++files;
      if (slurp(e.path()) != slurp(root / "b" / e.path().filename())) ++differ;
    }
  }
  report(9, "CLI outputs byte-identical for a fixed seed", ok && files > 0 && differ == 0,
         "commands ok=" + std::string(ok ? "yes" : "no") + " files=" + std::to_string(files) +
             " differing=" + std::to_string(differ));
}

}  // namespace

int main() {
  auto stokes = identity_trace_stokes();
  curl_commutes();
  stokes();
  gradient_absorption();
  log_fits();
  vertex_gate();
  hx_sanity();
  cli_determinism();
  std::cout << (failures ? std::to_string(failures) + " criterion line(s) failed" : "all criteria passed")
            << std::endl;
  return failures ? 1 : 0;
}
