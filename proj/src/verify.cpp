// Copyright (c) 2026 helmdec contributors
// SPDX-License-Identifier: Apache-2.0
#include "helmdec/verify.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <ostream>
#include <thread>

namespace helmdec::verify {

namespace {

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::string hex(std::uint64_t x) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

double pick(const dec::Ratios& r, const std::string& name) {
  if (name == "w_semi") return r.w_semi;
  if (name == "w_full") return r.w_full;
  if (name == "R_semi") return r.R_semi;
  if (name == "R_full") return r.R_full;
  if (name == "p_L2") return r.p_L2;
  if (name == "p_full") return r.p_full;
  throw ConfigError("unknown ratio '" + name + "'");
}

}  // namespace

// max over tets of |curl(r_h w) - curl w|, and of |curl w|
std::pair<double, double> curl_commute_defect(const TetMesh& m, const Vec& w) {
  Vec rw = ops::edge_interpolate_rh(m, w);
  double worst = 0, scale = 0;
  for (int t = 0; t < m.nt(); ++t) {
    auto g = fem::tet_geometry(m, t);
    Vec3 cw = Vec3::Zero();
    for (int j = 0; j < 4; ++j) cw += g.grad[j].cross(Vec3(w.segment<3>(3 * m.tets[t][j])));
    Vec3 cr = fem::tet_curl(m, g, t, rw);
    worst = std::max(worst, (cr - cw).norm());
    scale = std::max(scale, cw.norm());
  }
  return {worst, scale};
}

Fit fit_log(const std::vector<double>& h, const std::vector<double>& r) {
  if (h.size() != r.size() || h.size() < 3) throw ConfigError("a growth fit needs at least 3 levels");
  const double n = static_cast<double>(h.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    double x = std::log(1.0 / h[i]);
    sx += x;
    sy += r[i];
    sxx += x * x;
    sxy += x * r[i];
  }
  Fit f;
  double den = n * sxx - sx * sx;
  f.b = den != 0 ? (n * sxy - sx * sy) / den : 0.0;
  f.a = (sy - f.b * sx) / n;
  double res = 0, nr = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    double d = r[i] - (f.a + f.b * std::log(1.0 / h[i]));
    res += d * d;
    nr += r[i] * r[i];
  }
  f.residual = nr > 0 ? std::sqrt(res / nr) : 0.0;
  return f;
}

bool fit_passes(const Fit& f, bool log_claim) {
  if (!(f.residual <= 0.2)) return false;
  return log_claim || std::abs(f.b) <= 0.1 * f.a;
}

TetMesh domain_at(const std::string& geometry, int level) {
  return mesh::domain_mesh(mesh::build_complex(geometry, std::ldexp(1.0, -level)));
}

std::uint64_t sample_seed(std::uint64_t seed, int level, int sample) {
  return splitmix64(splitmix64(seed ^ (0x51ull * static_cast<std::uint64_t>(level + 1))) +
                    static_cast<std::uint64_t>(sample));
}

int thread_count() {
  const char* s = std::getenv("HELMDEC_THREADS");
  if (!s || !*s) return 1;
  int n = std::atoi(s);
  return std::max(1, n);
}

void parallel_for(int n, int threads, const std::function<void(int)>& f) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int k = 0; k < threads; ++k)
    pool.emplace_back([&] {
      for (int i; (i = next++) < n;) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

StabilityReport sweep(const SweepOptions& o) {
  if (o.levels.size() < 3) throw ConfigError("sweep needs at least 3 levels");
  if (o.samples < 1) throw ConfigError("sweep needs at least one sample");
  StabilityReport rep;
  rep.geometry = o.geometry;
  rep.spec = o.spec;
  rep.seed = o.seed;
  auto levels = o.levels;
  std::sort(levels.begin(), levels.end());
  if (std::adjacent_find(levels.begin(), levels.end()) != levels.end())
    throw ConfigError("sweep levels must be distinct");
  for (int level : levels) {
    auto m = domain_at(o.geometry, level);
    auto t = mesh::tag_trace(m, o.spec);
    std::vector<dec::HelmholtzSplit> splits(o.samples);
    std::vector<Vec> fields(o.samples);
    parallel_for(o.samples, o.threads, [&](int s) {
      fields[s] = dec::random_field(m, t, sample_seed(o.seed, level, s));
      splits[s] = dec::decompose(m, fields[s], t);
    });
    LevelRecord L;
    L.level = level;
    L.h = m.nominal_h;
    L.samples = o.samples;
    for (int s = 0; s < o.samples; ++s) {
      const auto& sp = splits[s];
      if (o.route != "auto" && sp.path.rfind(o.route, 0) != 0)
        throw PreconditionError("route '" + o.route + "' does not apply: dispatcher chose " + sp.path);
      if (rep.route.empty()) {
        rep.route = sp.path;
        rep.claim = dec::claim_name(sp.claim);
        rep.pclaim = dec::pclaim_name(sp.pclaim);
        rep.ratio_name = o.ratio != "auto" ? o.ratio : dec::claim_is_semi(sp.claim) ? "w_semi" : "w_full";
      } else if (rep.claim != dec::claim_name(sp.claim)) {
        throw PreconditionError("claim changes across the sweep");
      }
      const auto& r = sp.ratios;
      L.ratio = std::max(L.ratio, pick(r, rep.ratio_name));
      L.w_semi = std::max(L.w_semi, r.w_semi);
      L.w_full = std::max(L.w_full, r.w_full);
      L.R_semi = std::max(L.R_semi, r.R_semi);
      L.R_full = std::max(L.R_full, r.R_full);
      L.p_L2 = std::max(L.p_L2, r.p_L2);
      L.p_full = std::max(L.p_full, r.p_full);
      L.identity = std::max(L.identity, dec::identity_residual(m, fields[s], sp));
    }
    rep.levels.push_back(L);
  }
  std::vector<double> hs, rs;
  for (const auto& L : rep.levels) {
    hs.push_back(L.h);
    rs.push_back(L.ratio);
  }
  rep.fit = fit_log(hs, rs);
  const bool has_log = rep.claim == "semi_log" || rep.claim == "full_log";
  rep.pass = fit_passes(rep.fit, has_log);
  rep.verdict = rep.pass ? "PASS" : "FAIL";
  return rep;
}

bool Ledger::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

Ledger invariant_battery(const std::string& geometry, const std::vector<std::string>& spec,
                         int level, std::uint64_t seed, const std::string& route) {
  Ledger L;
  L.geometry = geometry;
  L.spec = spec;
  L.level = level;
  L.seed = seed;
  auto m = domain_at(geometry, level);
  auto t = mesh::tag_trace(m, spec);
  auto ops = fem::operators(m);
  auto add = [&](std::string name, double measured, double tol) {
    L.checks.push_back({std::move(name), measured, tol, measured <= tol, false});
  };
  auto skip = [&](std::string name) { L.checks.push_back({std::move(name), 0, 0, true, true}); };
  auto trace_counts = [&](const dec::HelmholtzSplit& s) {
    double nodes = 0, edges = 0;
    for (int i = 0; i < m.nv(); ++i)
      if (t.nodes[i] && (s.p[i] != 0.0 || !s.w.segment<3>(3 * i).isZero(0.0))) ++nodes;
    for (int e = 0; e < m.ne(); ++e)
      if (t.edges[e] && s.R[e] != 0.0) ++edges;
    return std::make_pair(nodes, edges);
  };

  Vec v = dec::random_field(m, t, seed);
  auto s = dec::decompose(m, v, t);
  L.route = s.path;
  if (route != "auto" && s.path.rfind(route, 0) != 0)
    throw PreconditionError("route '" + route + "' does not apply: dispatcher chose " + s.path);
  add("identity_residual", dec::identity_residual(m, v, s), 1e-10);
  auto [tn, te] = trace_counts(s);
  add("trace_nodes_nonzero", tn, 0);
  add("trace_edges_nonzero", te, 0);
  auto [cd, cs] = curl_commute_defect(m, s.w);
  add("curl_rh_commutes", cd / std::max(1.0, cs), 1e-12);
  double stokes = 0;
  for (const auto& lr : s.loops) stokes = std::max(stokes, lr.stokes_defect() / (1 + std::abs(lr.C)));
  if (s.loops.empty())
    skip("stokes_loop_constant");
  else
    add("stokes_loop_constant", stokes, 1e-12);
  bool finite = std::isfinite(s.ratios.w_semi) && std::isfinite(s.ratios.w_full) &&
                std::isfinite(s.ratios.R_full) && std::isfinite(s.ratios.p_full);
  add("ratios_finite", finite ? 0.0 : 1.0, 0);
  auto again = dec::decompose(m, v, t);
  add("deterministic", (again.p == s.p && again.w == s.w && again.R == s.R) ? 0.0 : 1.0, 0);

  const auto& cat = mesh::catalog(geometry);
  bool vertex_junction = !cat.lipschitz && std::any_of(cat.junctions.begin(), cat.junctions.end(), [](const auto& j) {
    return j.kind == mesh::JunctionKind::Vertex;
  });
  if (vertex_junction) {
    auto rep = dec::junction_functionals(m, v, t);
    add("junction_functionals", rep.max_abs(), rep.tol);
  }

  // gradients of nodal functions vanishing on Gamma
  Vec q = dec::random_nodal(m.nv(), seed ^ 0x9e3779b97f4a7c15ull);
  for (int i = 0; i < m.nv(); ++i)
    if (t.nodes[i]) q[i] = 0.0;
  Vec gq = ops->G * q;
  if (vertex_junction && dec::junction_functionals(m, gq, t).violated) {
    skip("gradient_absorption");
  } else {
    auto sg = dec::decompose(m, gq, t);
    double qn = fem::norm(m, q, fem::FieldKind::Nodal, fem::NormKind::H1);
    double wn = fem::norm(m, sg.w, fem::FieldKind::NodalVector, fem::NormKind::H1);
    double rn = fem::norm(m, sg.R, fem::FieldKind::Edge, fem::NormKind::L2) / m.h;
    add("gradient_absorption", (wn + rn) / qn, 1e-9);
    add("gradient_identity", dec::identity_residual(m, gq, sg), 1e-10);
  }

  Vec z = Vec::Zero(m.ne());
  auto sz = dec::decompose(m, z, t);
  double zmax = std::max({sz.p.cwiseAbs().maxCoeff(), sz.w.cwiseAbs().maxCoeff(),
                          sz.R.cwiseAbs().maxCoeff()});
  add("zero_field", zmax, 0);
  return L;
}

TraceProbe trace_inequality_probe(const std::string& geometry, const std::vector<int>& levels,
                                  int samples, std::uint64_t seed, Field field) {
  if (levels.size() < 3) throw ConfigError("trace probe needs at least 3 levels");
  TraceProbe P;
  P.geometry = geometry;
  auto lv = levels;
  std::sort(lv.begin(), lv.end());
  for (int level : lv) {
    auto m = domain_at(geometry, level);
    auto ops = fem::operators(m);
    double worst = 0, curl = 0;
    int used = 0;
    for (int s = 0; s < samples; ++s) {
      auto sd = sample_seed(seed, level, s);
      Vec v;
      if (field == Field::Zero)
        v = Vec::Zero(m.ne());
      else if (field == Field::Gradient)
        v = ops->G * dec::random_nodal(m.nv(), sd);
      else
        v = dec::random_nodal(m.ne(), sd);
      double vn = fem::norm(m, v, fem::FieldKind::Edge, fem::NormKind::Curl);
      if (vn == 0) {
        ++P.skipped;
        continue;
      }
      Vec e = ops::curl_harmonic_extend(m, v);
      worst = std::max(worst, fem::norm(m, e, fem::FieldKind::Edge, fem::NormKind::Curl) / vn);
      curl = std::max(curl, fem::norm(m, e, fem::FieldKind::Edge, fem::NormKind::CurlSemi) / vn);
      ++used;
    }
    if (used == 0) continue;
    P.level.push_back(level);
    P.h.push_back(m.nominal_h);
    P.ratio.push_back(worst);
    P.curl_part.push_back(curl);
  }
  if (P.h.size() >= 3) {
    P.fit = fit_log(P.h, P.ratio);
    P.pass = fit_passes(P.fit, false);
  }
  return P;
}

std::vector<std::vector<std::string>> battery_specs(const std::string& g) {
  using S = std::vector<std::vector<std::string>>;
  if (g == "unit_cube")
    return S{{},
             {"G.z0"},
             {"G.x0", "G.x1", "G.y0", "G.y1", "G.z0", "G.z1"},
             {"G.z0", "G.z1"},
             {"G.x0y0"},
             {"G.z1", "G.x0y0"},
             {"G.z1", "G.x0z0"}};
  if (g == "pyramid") return S{{}, {"P.base"}, {"P.base_x0"}, {"P.lat_x0", "P.lat_x1"}};
  if (g == "three_cube_L")
    return S{{}, {"D1.z0"}, {"D2.y1", "D3.x1"}, {"D1.z0", "D2.z0", "D3.z0"}};
  if (g == "cube_in_box") return S{{}, {"G.y1", "G.z1"}, {"G.y1", "G.z1", "G.y0z0"}};
  if (g == "four_edge_cube")
    return S{{"G.x0y0", "G.x0y1", "G.x1y0", "G.x1y1"}, {"G.x0y0"}, {"G.x0y0", "G.x1y1"}};
  if (g == "edge_junction_pair") return S{{"G1.x1", "G2.x0"}, {"G1.x1"}, {"G1.x0"}, {}};
  if (g == "vertex_junction_pair")
    return S{{"G1.x1", "G2.x0"}, {"G1.x1"}, {"G1.x0", "G2.x1"}, {}};
  if (g == "vertex_junction_star")
    return S{{}, {"P1.base", "P2.base", "P3.base"}, {"P1.lat_y0", "P2.lat_x0", "P3.lat_x0"}};
  throw ConfigError("unknown geometry '" + g + "'");
}

std::string spec_label(const std::vector<std::string>& spec) {
  if (spec.empty()) return "none";
  std::string s;
  for (const auto& e : spec) s += (s.empty() ? "" : "+") + e;
  return s;
}

void write_csv(std::ostream& os, const StabilityReport& r, std::uint64_t hash) {
  os << "config_hash,geometry,gamma,route,claim,ratio_name,level,h,samples,ratio,w_semi,w_full,"
        "R_semi,R_full,p_L2,p_full,identity\n";
  for (const auto& L : r.levels)
    os << hex(hash) << ',' << r.geometry << ',' << spec_label(r.spec) << ',' << r.route << ','
       << r.claim << ',' << r.ratio_name << ',' << L.level << ',' << num(L.h) << ',' << L.samples
       << ',' << num(L.ratio) << ',' << num(L.w_semi) << ',' << num(L.w_full) << ','
       << num(L.R_semi) << ',' << num(L.R_full) << ',' << num(L.p_L2) << ',' << num(L.p_full)
       << ',' << num(L.identity) << '\n';
}

void write_json(std::ostream& os, const StabilityReport& r, std::uint64_t hash) {
  nlohmann::ordered_json j;
  j["config_hash"] = hex(hash);
  j["geometry"] = r.geometry;
  j["gamma"] = r.spec;
  j["route"] = r.route;
  j["claim"] = r.claim;
  j["p_claim"] = r.pclaim;
  j["ratio"] = r.ratio_name;
  j["seed"] = r.seed;
  j["fit"] = {{"a", r.fit.a}, {"b", r.fit.b}, {"residual", r.fit.residual}};
  j["verdict"] = r.verdict;
  auto& lv = j["levels"] = nlohmann::ordered_json::array();
  for (const auto& L : r.levels)
    lv.push_back({{"level", L.level}, {"h", L.h}, {"ratio", L.ratio}, {"samples", L.samples}});
  os << j.dump(2) << '\n';
}

void write_csv(std::ostream& os, const std::vector<Ledger>& ls, std::uint64_t hash) {
  os << "config_hash,geometry,gamma,route,level,seed,check,measured,tol,status\n";
  for (const auto& L : ls)
    for (const auto& c : L.checks)
      os << hex(hash) << ',' << L.geometry << ',' << spec_label(L.spec) << ',' << L.route << ','
         << L.level << ',' << L.seed << ',' << c.name << ',' << num(c.measured) << ','
         << num(c.tol) << ',' << (c.skipped ? "SKIP" : c.pass ? "PASS" : "FAIL") << '\n';
}

void write_json(std::ostream& os, const std::vector<Ledger>& ls, std::uint64_t hash) {
  nlohmann::ordered_json j;
  j["config_hash"] = hex(hash);
  auto& arr = j["ledgers"] = nlohmann::ordered_json::array();
  bool all = true;
  for (const auto& L : ls) {
    nlohmann::ordered_json e;
    e["geometry"] = L.geometry;
    e["gamma"] = L.spec;
    e["route"] = L.route;
    e["level"] = L.level;
    e["pass"] = L.pass();
    int failed = 0;
    for (const auto& c : L.checks) failed += !c.pass;
    e["failed_checks"] = failed;
    all = all && L.pass();
    arr.push_back(std::move(e));
  }
  j["pass"] = all;
  os << j.dump(2) << '\n';
}

void write_csv(std::ostream& os, const TraceProbe& p, std::uint64_t hash) {
  os << "config_hash,geometry,level,h,ratio,curl_part\n";
  for (std::size_t i = 0; i < p.h.size(); ++i)
    os << hex(hash) << ',' << p.geometry << ',' << p.level[i] << ',' << num(p.h[i]) << ','
       << num(p.ratio[i]) << ',' << num(p.curl_part[i]) << '\n';
}

}  // namespace helmdec::verify
