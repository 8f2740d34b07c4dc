// Copyright (c) 2026 helmdec contributors
// SPDX-License-Identifier: Apache-2.0
#include "helmdec/config.hpp"
#include "helmdec/hx.hpp"
#include "helmdec/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

namespace helmdec::cli {

namespace fs = std::filesystem;

namespace {

struct Context {
  ExperimentConfig cfg;
  fs::path out;
  std::string hash;
};

std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == '/' || c == ' ') c = '-';
  return s;
}

std::string stem(const Context& c, const std::string& cmd) {
  return cmd + "_" + c.cfg.geometry + "_" + verify::spec_label(c.cfg.gamma) + "_" +
         sanitize(c.cfg.route) + "_s" + std::to_string(c.cfg.seed);
}

std::ofstream open_out(const Context& c, const std::string& name) {
  fs::create_directories(c.out);
  auto path = c.out / name;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  std::cout << "wrote " << path.string() << "\n";
  return f;
}

// Lvalue stream that lives until the end of the full expression.
std::unique_ptr<std::ofstream> out(const Context& c, const std::string& name) {
  return std::make_unique<std::ofstream>(open_out(c, name));
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

int cmd_mesh(const Context& c) {
  auto m = verify::domain_at(c.cfg.geometry, c.cfg.mesh_level);
  auto t = mesh::tag_trace(m, c.cfg.gamma);
  auto f = open_out(c, stem(c, "mesh") + "_L" + std::to_string(c.cfg.mesh_level) + ".mesh");
  mesh::write_mesh(f, m, &t);
  f << "# config_hash " << c.hash << "\n";
  std::cout << "mesh " << m.geometry << " h=" << m.nominal_h << " vertices=" << m.nv()
            << " edges=" << m.ne() << " tets=" << m.tets.size()
            << " gamma_edges=" << count(t.edges) << "\n";
  return 0;
}

Vec make_field(const ExperimentConfig& cfg, const mesh::TetMesh& m, const mesh::TraceSet& t) {
  if (cfg.field == "zero") return Vec::Zero(m.ne());
  if (cfg.field == "gradient") {
    Vec q = dec::random_nodal(m.nv(), cfg.seed);
    for (int i = 0; i < m.nv(); ++i)
      if (t.nodes[i]) q[i] = 0.0;
    return fem::operators(m)->G * q;
  }
  Vec v = dec::random_field(m, t, cfg.seed);
  if (cfg.field == "incompatible") v += dec::junction_perturbation(m, t, cfg.amplitude);
  return v;
}

void write_split_field(const Context& c, const std::string& name, const Vec& f) {
  auto os = open_out(c, name);
  os << "# config_hash " << c.hash << "\n";
  fem::write_field(os, f);
}

int cmd_decompose(const Context& c) {
  const auto& cfg = c.cfg;
  auto m = verify::domain_at(cfg.geometry, cfg.decompose_level);
  auto t = mesh::tag_trace(m, cfg.gamma);
  Vec v = make_field(cfg, m, t);
  auto s = dec::decompose(m, v, t);
  if (cfg.route != "auto" && s.path.rfind(cfg.route, 0) != 0)
    throw PreconditionError("route '" + cfg.route + "' does not apply: dispatcher chose " + s.path);
  const std::string base = stem(c, "decompose") + "_L" + std::to_string(cfg.decompose_level);
  write_split_field(c, base + ".p", s.p);
  write_split_field(c, base + ".w", s.w);
  write_split_field(c, base + ".R", s.R);

  const auto& r = s.ratios;
  nlohmann::ordered_json j;
  j["config_hash"] = c.hash;
  j["geometry"] = cfg.geometry;
  j["gamma"] = cfg.gamma;
  j["level"] = cfg.decompose_level;
  j["h"] = m.nominal_h;
  j["seed"] = cfg.seed;
  j["field"] = cfg.field;
  j["route"] = s.path;
  j["claim"] = dec::claim_name(s.claim);
  j["p_claim"] = dec::pclaim_name(s.pclaim);
  j["identity_residual"] = dec::identity_residual(m, v, s);
  j["norms"] = {{"v_L2", r.v_L2}, {"v_curl", r.v_curl}, {"curl_v", r.curl_v},
                {"p_H1", r.p_H1},  {"w_H1", r.w_H1},     {"w_L2", r.w_L2},
                {"R_L2", r.R_L2}};
  j["ratios"] = {{"w_semi", r.w_semi}, {"w_full", r.w_full}, {"R_semi", r.R_semi},
                 {"R_full", r.R_full}, {"p_L2", r.p_L2},     {"p_full", r.p_full}};
  auto loops = nlohmann::ordered_json::array();
  for (const auto& L : s.loops)
    loops.push_back({{"C", L.C}, {"flux", L.flux}, {"length", L.length}});
  j["loops"] = loops;
  open_out(c, base + "_summary.json") << j.dump(2) << "\n";

  std::cout << "route " << s.path << "\n"
            << "claim " << dec::claim_name(s.claim) << " p_claim " << dec::pclaim_name(s.pclaim)
            << "\n";
  if (!dec::claim_has_log(s.claim)) std::cout << "no-log claim: the log(1/h) factor is dropped\n";
  std::cout << "identity residual " << num(j["identity_residual"].get<double>()) << "\n"
            << "norm p_H1 " << num(r.p_H1) << "\n"
            << "norm w_H1 " << num(r.w_H1) << "\n"
            << "norm R_L2 " << num(r.R_L2) << "\n";
  return 0;
}

int cmd_sweep(const Context& c) {
  const auto& cfg = c.cfg;
  verify::SweepOptions o;
  o.geometry = cfg.geometry;
  o.spec = cfg.gamma;
  o.route = cfg.route;
  o.ratio = cfg.ratio;
  o.levels = cfg.sweep_levels;
  o.samples = cfg.samples;
  o.seed = cfg.seed;
  o.threads = verify::thread_count();
  if (cfg.trace_probe && o.levels.size() < 3) throw ConfigError("sweep needs at least 3 levels");
  auto rep = verify::sweep(o);
  const std::string base = stem(c, "sweep");
  verify::write_csv(*out(c, base + ".csv"), rep, cfg.hash());
  verify::write_json(*out(c, base + ".json"), rep, cfg.hash());
  std::cout << "route " << rep.route << " claim " << rep.claim << " ratio " << rep.ratio_name
            << "\n";
  for (const auto& l : rep.levels)
    std::cout << "h " << num(l.h) << " ratio " << num(l.ratio) << "\n";
  std::cout << "fit a " << num(rep.fit.a) << " b " << num(rep.fit.b) << " residual "
            << num(rep.fit.residual) << " verdict " << rep.verdict << "\n";
  if (cfg.trace_probe) {
    auto p = verify::trace_inequality_probe(cfg.geometry, cfg.sweep_levels, cfg.samples, cfg.seed);
    verify::write_csv(*out(c, base + "_trace_probe.csv"), p, cfg.hash());
    std::cout << "trace probe verdict " << (p.pass ? "PASS" : "FAIL") << " skipped " << p.skipped
              << "\n";
  }
  return 0;
}

int cmd_battery(const Context& c) {
  const auto& cfg = c.cfg;
  auto specs = cfg.all_specs ? verify::battery_specs(cfg.geometry)
                             : std::vector<std::vector<std::string>>{cfg.gamma};
  std::vector<verify::Ledger> ledgers(specs.size());
  verify::parallel_for(static_cast<int>(specs.size()), verify::thread_count(), [&](int i) {
    ledgers[i] = verify::invariant_battery(cfg.geometry, specs[i], cfg.battery_level, cfg.seed,
                                           cfg.route);
  });
  const std::string base = stem(c, "battery") + (cfg.all_specs ? "_all" : "");
  verify::write_csv(*out(c, base + ".csv"), ledgers, cfg.hash());
  verify::write_json(*out(c, base + ".json"), ledgers, cfg.hash());
  for (const auto& l : ledgers) {
    std::cout << (l.pass() ? "PASS " : "FAIL ") << l.geometry << " "
              << verify::spec_label(l.spec) << " " << l.route << "\n";
    for (const auto& ch : l.checks)
      if (!ch.pass && !ch.skipped)
        std::cout << "  failed " << ch.name << " measured " << num(ch.measured) << " tol "
                  << num(ch.tol) << "\n";
  }
  return 0;
}

int cmd_hx(const Context& c) {
  const auto& cfg = c.cfg;
  std::vector<hx::SolveRow> rows;
  if (cfg.hx_mode == "levels") {
    rows = hx::level_sweep(cfg.geometry, cfg.hx_levels, cfg.seed, cfg.tol, cfg.maxit);
  } else if (cfg.hx_mode == "jump") {
    rows = hx::jump_sweep(cfg.geometry, cfg.hx_level, cfg.jumps, cfg.seed, cfg.tol, cfg.maxit);
  } else {
    const std::size_t nb = mesh::catalog(cfg.geometry).blocks.size();
    auto alpha = cfg.alpha.empty() ? std::vector<double>(nb, 1.0) : cfg.alpha;
    auto beta = cfg.beta.empty() ? std::vector<double>(nb, 1.0) : cfg.beta;
    rows.push_back(
        hx::solve(cfg.geometry, cfg.hx_level, alpha, beta, cfg.gamma, cfg.seed, cfg.tol, cfg.maxit));
  }
  const std::string base = stem(c, "hx") + "_" + cfg.hx_mode;
  hx::write_csv(*out(c, base + ".csv"), rows, cfg.hash());
  hx::write_timing_csv(*out(c, base + "_timing.csv"), rows);
  for (const auto& r : rows)
    std::cout << "h " << num(r.h) << " alpha " << r.alpha_pattern << " iterations "
              << r.iterations << " cg " << r.cg_iterations << " residual " << num(r.residual)
              << (r.converged ? "" : " (not converged)") << "\n";
  return 0;
}

void print_report(const dec::JunctionReport& r) {
  std::cerr << "compatibility functionals (tol " << num(r.tol) << "):\n";
  for (std::size_t i = 0; i < r.F.size(); ++i) std::cerr << "  F_" << i + 1 << " = " << num(r.F[i]) << "\n";
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Discrete regular decompositions of edge element spaces"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  app.add_option("--config", config_path, "experiment configuration file");
  app.add_option("--seed", seed, "override run.seed");
  app.add_option("--out", out, "output directory");
  const std::vector<std::pair<std::string, std::string>> cmds = {
      {"mesh", "write the mesh with trace tags"},
      {"decompose", "split one field and write p, w, R and a summary"},
      {"sweep", "h-sweep of the stability ratios with a log fit"},
      {"battery", "invariant ledger for the configured Gamma or all catalog specs"},
      {"hx", "auxiliary space preconditioned solves"}};
  for (const auto& [name, help] : cmds) app.add_subcommand(name, help)->fallthrough();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    Context c;
    if (!config_path.empty()) c.cfg = load_config(config_path);
    if (seed) c.cfg.seed = *seed;
    c.out = out;
    c.hash = hex16(c.cfg.hash());
    std::cout << "config_hash " << c.hash << "\n";
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "mesh") return cmd_mesh(c);
    if (cmd == "decompose") return cmd_decompose(c);
    if (cmd == "sweep") return cmd_sweep(c);
    if (cmd == "battery") return cmd_battery(c);
    return cmd_hx(c);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const dec::CompatibilityError& e) {
    std::cerr << "compatibility violation: " << e.what() << "\n";
    print_report(e.report);
    return 4;
  } catch (const PreconditionError& e) {
    std::cerr << "precondition violated: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace helmdec::cli
