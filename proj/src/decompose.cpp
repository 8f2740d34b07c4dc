// Copyright (c) 2026 helmdec contributors
// SPDX-License-Identifier: Apache-2.0
#include "helmdec/decompose.hpp"

#include "decompose_internal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace helmdec::dec {

using ops::BoundaryLoop;

std::string claim_name(Claim c) {
  switch (c) {
    case Claim::SemiLog: return "semi_log";
    case Claim::SemiNolog: return "semi_nolog";
    case Claim::FullLog: return "full_log";
    case Claim::FullNolog: return "full_nolog";
  }
  return "?";
}

std::string pclaim_name(PClaim c) {
  switch (c) {
    case PClaim::L2: return "l2";
    case PClaim::Full: return "full";
    case PClaim::Seminorm: return "seminorm";
  }
  return "?";
}

bool claim_has_log(Claim c) { return c == Claim::SemiLog || c == Claim::FullLog; }
bool claim_is_semi(Claim c) { return c == Claim::SemiLog || c == Claim::SemiNolog; }

double JunctionReport::max_abs() const {
  double r = 0;
  for (double f : F) r = std::max(r, std::abs(f));
  return r;
}

Gamma Gamma::empty(const TetMesh& m) {
  return Gamma{Mask(m.nv(), 0), Mask(m.ne(), 0), Mask(m.nf(), 0)};
}

Gamma gamma_of_entities(const TetMesh& m, const std::vector<const CoarseEntity*>& ents) {
  Gamma g = Gamma::empty(m);
  for (const auto* e : ents) {
    Mask n = mesh::entity_nodes(m, *e);
    Mask ed = mesh::edges_in(m, n);
    Mask f = e->dim == 2 ? mesh::faces_in(m, n) : Mask(m.nf(), 0);
    g = g | Gamma{n, ed, f};
  }
  return g;
}

Gamma gamma_of_faces(const TetMesh& m, const Mask& faces) {
  Gamma g = Gamma::empty(m);
  g.faces = faces;
  for (int f = 0; f < m.nf(); ++f) {
    if (!faces[f]) continue;
    const auto& fv = m.faces[f];
    for (int i = 0; i < 3; ++i) {
      g.nodes[fv[i]] = 1;
      g.edges[m.find_edge(fv[i], fv[(i + 1) % 3])] = 1;
    }
  }
  return g;
}

Gamma gamma_of_edges(const TetMesh& m, const Mask& edges) {
  Gamma g = Gamma::empty(m);
  g.edges = edges;
  g.nodes = mesh::nodes_of_edges(m, edges);
  return g;
}

Gamma gamma_of_trace(const TraceSet& t) { return Gamma{t.nodes, t.edges, t.faces}; }

Gamma operator|(const Gamma& a, const Gamma& b) {
  return Gamma{mask_or(a.nodes, b.nodes), mask_or(a.edges, b.edges), mask_or(a.faces, b.faces)};
}

Ratios measure(const TetMesh& m, const Vec& v, const HelmholtzSplit& s) {
  using fem::FieldKind;
  using fem::NormKind;
  Ratios r;
  r.v_L2 = fem::norm(m, v, FieldKind::Edge, NormKind::L2);
  r.v_curl = fem::norm(m, v, FieldKind::Edge, NormKind::Curl);
  r.curl_v = fem::norm(m, v, FieldKind::Edge, NormKind::CurlSemi);
  r.w_H1 = fem::norm(m, s.w, FieldKind::NodalVector, NormKind::H1);
  r.w_L2 = fem::norm(m, s.w, FieldKind::NodalVector, NormKind::L2);
  r.p_H1 = fem::norm(m, s.p, FieldKind::Nodal, NormKind::H1);
  r.R_L2 = fem::norm(m, s.R, FieldKind::Edge, NormKind::L2);
  auto ratio = [](double a, double b) {
    if (b > 0) return a / b;
    return a > 0 ? std::numeric_limits<double>::infinity() : 0.0;
  };
  r.w_semi = ratio(r.w_H1, r.curl_v);
  r.w_full = ratio(r.w_H1, r.v_curl);
  r.R_semi = ratio(r.R_L2 / m.h, r.curl_v);
  r.R_full = ratio(r.R_L2 / m.h, r.v_curl);
  r.p_L2 = ratio(r.w_L2 + r.p_H1, r.v_L2);
  r.p_full = ratio(r.w_L2 + r.p_H1, r.v_curl);
  return r;
}

double identity_residual(const TetMesh& m, const Vec& v, const HelmholtzSplit& s) {
  auto ops = fem::operators(m);
  Vec d = v - ops->G * s.p - ops->Rh * s.w - s.R;
  double scale = v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
  return d.size() ? d.cwiseAbs().maxCoeff() / std::max(scale, 1e-300) : 0.0;
}

namespace detail {

Mask faces_of(const TetMesh& m, const CoarseEntity& e) {
  return mesh::faces_in(m, mesh::entity_nodes(m, e));
}

Mask edges_of(const TetMesh& m, const CoarseEntity& e) {
  return mesh::edges_in(m, mesh::entity_nodes(m, e));
}

Mask boundary_of_faces(const TetMesh& m, const Mask& faces) {
  std::vector<int> use(m.ne(), 0);
  for (int f = 0; f < m.nf(); ++f) {
    if (!faces[f]) continue;
    const auto& fv = m.faces[f];
    for (int i = 0; i < 3; ++i) ++use[m.find_edge(fv[i], fv[(i + 1) % 3])];
  }
  Mask r(m.ne(), 0);
  for (int e = 0; e < m.ne(); ++e) r[e] = use[e] == 1;
  return r;
}

std::vector<const CoarseEntity*> candidate_faces(const TetMesh& m) {
  const auto& cat = mesh::catalog(m.geometry);
  std::vector<char> present(cat.blocks.size(), 0);
  for (int b : m.block_of_tet) present[b] = 1;
  std::vector<const CoarseEntity*> out;
  for (const auto& e : cat.entities) {
    if (e.dim != 2 || !present[e.block]) continue;
    Mask f = faces_of(m, e);
    if (count(f) == 0) continue;
    bool ok = true;
    for (int i = 0; i < m.nf() && ok; ++i)
      if (f[i] && !m.boundary_face[i]) ok = false;
    if (ok) out.push_back(&e);
  }
  return out;
}

bool contains_nodes(const Mask& outer, const Mask& inner) {
  for (std::size_t i = 0; i < inner.size(); ++i)
    if (inner[i] && !outer[i]) return false;
  return true;
}

std::vector<int> parent_faces(const TetMesh& parent, const TetMesh& sub) {
  std::map<std::array<int, 3>, int> index;
  for (int f = 0; f < parent.nf(); ++f) index.emplace(parent.faces[f], f);
  std::vector<int> out(sub.nf(), -1);
  for (int f = 0; f < sub.nf(); ++f) {
    std::array<int, 3> k;
    for (int i = 0; i < 3; ++i) k[i] = sub.parent_vert[sub.faces[f][i]];
    std::sort(k.begin(), k.end());
    auto it = index.find(k);
    if (it == index.end()) throw std::logic_error("submesh face missing from parent");
    out[f] = it->second;
  }
  return out;
}

Gamma restrict_gamma(const TetMesh& parent, const TetMesh& sub, const Gamma& g) {
  Gamma r = Gamma::empty(sub);
  for (int i = 0; i < sub.nv(); ++i) r.nodes[i] = g.nodes[sub.parent_vert[i]];
  for (int e = 0; e < sub.ne(); ++e) r.edges[e] = g.edges[sub.parent_edge[e]];
  auto pf = parent_faces(parent, sub);
  for (int f = 0; f < sub.nf(); ++f) r.faces[f] = g.faces[pf[f]];
  return r;
}

Vec restrict_edges(const TetMesh& sub, const Vec& v) {
  Vec r(sub.ne());
  for (int e = 0; e < sub.ne(); ++e) r[e] = v[sub.parent_edge[e]];
  return r;
}

void add_nodal(const TetMesh& sub, const Vec& p, Vec& out) {
  for (int i = 0; i < sub.nv(); ++i) out[sub.parent_vert[i]] += p[i];
}

void add_nodal3(const TetMesh& sub, const Vec& w, Vec& out) {
  for (int i = 0; i < sub.nv(); ++i) out.segment<3>(3 * sub.parent_vert[i]) += w.segment<3>(3 * i);
}

void add_edges(const TetMesh& sub, const Vec& R, Vec& out) {
  for (int e = 0; e < sub.ne(); ++e) out[sub.parent_edge[e]] += R[e];
}

std::vector<std::vector<int>> loop_segments(const TetMesh& m, const BoundaryLoop& L) {
  std::vector<std::vector<int>> segs;
  const int n = L.size();
  Vec3 prev = Vec3::Zero();
  for (int k = 0; k < n; ++k) {
    Vec3 d = (m.verts[L.nodes[(k + 1) % n]] - m.verts[L.nodes[k]]).normalized();
    if (segs.empty() || (d - prev).norm() > 1e-9) segs.emplace_back();
    segs.back().push_back(k);
    prev = d;
  }
  return segs;
}

double roundoff_tol(const Vec& a) {
  double s = a.size() ? a.cwiseAbs().maxCoeff() : 0.0;
  return 1e-9 * std::max(1.0, s);
}

void clear_edges(Vec& v, const Mask& edges, double tol, Vec& spill, const char* what) {
  for (int e = 0; e < v.size(); ++e) {
    if (!edges[e] || v[e] == 0.0) continue;
    if (std::abs(v[e]) > tol) {
      std::ostringstream os;
      os << what << ": residual " << v[e] << " on edge " << e;
      throw std::logic_error(os.str());
    }
    spill[e] += v[e];
    v[e] = 0.0;
  }
}

}  // namespace detail
}  // namespace helmdec::dec

namespace helmdec::dec {
namespace detail {

namespace {

void require_zero(const TetMesh& m, const Vec& v, const Mask& edges, const char* where) {
  for (int e = 0; e < m.ne(); ++e)
    if (edges[e] && v[e] != 0.0) {
      std::ostringstream os;
      os << where << ": field has moment " << v[e] << " on constrained edge " << e << " ("
         << m.edges[e][0] << "-" << m.edges[e][1] << ")";
      throw PreconditionError(os.str());
    }
}

}  // namespace

HelmholtzSplit kernel_impl(const TetMesh& m, const Vec& v, const Gamma& g) {
  require_zero(m, v, g.edges, "kernel");
  auto ops = fem::operators(m);
  auto solver = fem::scalar_poisson(m, g.nodes);
  HelmholtzSplit s;
  s.p = solver->solve(ops->G.transpose() * (ops->Mv * v));
  Vec b = ops->Bc * v;
  Vec w(3 * m.nv());
  for (int c = 0; c < 3; ++c) fem::set_component(w, c, solver->solve(fem::component(b, c)));
  s.w = ops::scott_zhang(m, w, g.nodes, g.edges, g.faces);
  for (int i = 0; i < m.nv(); ++i)
    if (g.nodes[i]) s.p[i] = 0.0;
  s.R = v - ops->G * s.p - ops->Rh * s.w;
  for (int e = 0; e < m.ne(); ++e)
    if (g.edges[e]) s.R[e] = 0.0;
  s.path = "kernel";
  s.claim = Claim::SemiNolog;
  s.pclaim = PClaim::L2;
  s.zero_nodes = g.nodes;
  s.zero_edges = g.edges;
  return s;
}

HelmholtzSplit loop_impl(const TetMesh& m, const Vec& v, const Mask& F, const Gamma& extra) {
  Mask dF = boundary_of_faces(m, F);
  Gamma gF = gamma_of_faces(m, F);
  for (int e = 0; e < m.ne(); ++e)
    if (extra.edges[e] && gF.edges[e] && !dF[e])
      throw PreconditionError("constrained edges inside the loop face");
  require_zero(m, v, dF, "loop split");
  Vec data = Vec::Zero(m.ne());
  for (int e = 0; e < m.ne(); ++e)
    if (gF.edges[e] && !dF[e]) data[e] = v[e];
  Vec vF = ops::curl_harmonic_extend(m, data);
  Vec vFc = v - vF;
  for (int e = 0; e < m.ne(); ++e)
    if (gF.edges[e]) vFc[e] = 0.0;
  Mask Fc(m.nf(), 0);
  for (int f = 0; f < m.nf(); ++f) Fc[f] = m.boundary_face[f] && !F[f];
  Gamma gFc = gamma_of_faces(m, Fc);
  // vF carries the trace on F, so it must vanish on the complement
  auto s1 = kernel_impl(m, vF, gFc | extra);
  auto s2 = kernel_impl(m, vFc, gF | extra);
  HelmholtzSplit s;
  s.p = s1.p + s2.p;
  s.w = s1.w + s2.w;
  s.R = s1.R + s2.R;
  s.path = "loop";
  s.claim = Claim::SemiNolog;
  s.pclaim = PClaim::L2;
  s.zero_nodes = mask_or(extra.nodes, mesh::nodes_of_edges(m, dF));
  s.zero_edges = mask_or(extra.edges, dF);
  return s;
}

namespace {

// Loop of F started so that the edges of E form a suffix; returns the
// positions of E.
std::pair<BoundaryLoop, std::vector<char>> loop_with_suffix(const TetMesh& m, const Mask& F,
                                                           const Mask& E) {
  BoundaryLoop L = ops::make_loop(m, F);
  const int n = L.size();
  std::vector<char> in(n, 0);
  int ne = 0;
  for (int k = 0; k < n; ++k) ne += in[k] = E[L.edges[k]] ? 1 : 0;
  if (ne != static_cast<int>(count(E)))
    throw PreconditionError("edge set is not on the loop of the chosen face");
  if (ne == 0 || ne == n) throw PreconditionError("edge set must be a proper part of the loop");
  int last = -1, runs = 0;
  for (int k = 0; k < n; ++k)
    if (in[k] && !in[(k + 1) % n]) {
      last = k;
      ++runs;
    }
  if (runs != 1) throw PreconditionError("edge set is not a connected path on the loop");
  L = ops::make_loop(m, F, L.nodes[(last + 1) % n]);
  std::vector<char> ex(n, 0);
  for (int k = 0; k < n; ++k) ex[k] = E[L.edges[k]] ? 1 : 0;
  return {std::move(L), std::move(ex)};
}

}  // namespace

HelmholtzSplit machinery_impl(const TetMesh& m, const Vec& v, const std::vector<EdgeTask>& tasks,
                              const Gamma& extra) {
  auto ops = fem::operators(m);
  Mask Eall(m.ne(), 0), Funion(m.nf(), 0), loop_edges(m.ne(), 0);
  for (const auto& t : tasks) {
    Eall = mask_or(Eall, t.E_edges);
    for (int f = 0; f < m.nf(); ++f)
      if (t.F_faces[f]) {
        if (Funion[f]) throw PreconditionError("loop faces overlap");
        Funion[f] = 1;
      }
  }
  require_zero(m, v, Eall, "edge reduction");
  require_zero(m, v, extra.edges, "edge reduction");
  Mask Enodes = mesh::nodes_of_edges(m, Eall);
  Mask fixed = mask_or(Enodes, extra.nodes);
  Mask dir(m.nv(), 0);
  Vec data = Vec::Zero(m.nv());
  Vec Ct = Vec::Zero(3 * m.nv());
  HelmholtzSplit out;
  for (const auto& t : tasks) {
    auto [L, ex] = loop_with_suffix(m, t.F_faces, t.E_edges);
    const int n = L.size();
    for (int k = 0; k < n; ++k) {
      loop_edges[L.edges[k]] = 1;
      if (extra.nodes[L.nodes[k]] && !Enodes[L.nodes[k]])
        throw PreconditionError("loop meets the constrained set outside the edge path");
    }
    auto d = ops::loop_decompose(L, v, ex);
    out.loops.push_back({d.C, ops::loop_flux(m, L, v), d.constrained_length});
    for (int k = 0; k < n; ++k) {
      int node = L.nodes[k];
      if (dir[node] && std::abs(data[node] - d.phi[k]) > roundoff_tol(v))
        throw PreconditionError("loops disagree at a shared node");
      dir[node] = 1;
      data[node] = d.phi[k];
    }
    std::vector<char> cons(n, 0);
    std::vector<double> target(n, 0.0);
    for (int k = 0; k < n; ++k) {
      cons[k] = !ex[k] && !(fixed[L.nodes[k]] && fixed[L.nodes[(k + 1) % n]]);
      target[k] = d.C * L.len[k];
    }
    Ct += ops::loop_constant_extension(m, L, cons, target, fixed);
  }
  if (boundary_of_faces(m, Funion) != loop_edges)
    throw PreconditionError("loop faces are not simple: their union has a different boundary");
  for (int i = 0; i < m.nv(); ++i)
    if (fixed[i]) {
      dir[i] = 1;
      data[i] = 0.0;
    }
  Vec phi = ops::harmonic_extend(m, dir, data);
  for (int i = 0; i < m.nv(); ++i)
    if (fixed[i]) phi[i] = 0.0;
  Vec gphi = ops->G * phi, rc = ops->Rh * Ct;
  Vec vhat = v - gphi - rc;
  Vec spill = Vec::Zero(m.ne());
  double tol = roundoff_tol(v) + roundoff_tol(gphi) + roundoff_tol(rc);
  clear_edges(vhat, loop_edges, tol, spill, "loop reduction");
  auto inner = loop_impl(m, vhat, Funion, extra);
  out.p = phi + inner.p;
  out.w = Ct + inner.w;
  out.R = inner.R + spill;
  out.path = "edge_machinery";
  out.claim = Claim::SemiLog;
  out.pclaim = PClaim::Full;
  out.zero_nodes = fixed;
  out.zero_edges = mask_or(Eall, extra.edges);
  return out;
}

}  // namespace detail

namespace {

HelmholtzSplit finish(const TetMesh& m, const Vec& v, HelmholtzSplit s) {
  s.ratios = measure(m, v, s);
  return s;
}

}  // namespace

HelmholtzSplit kernel_convex(const TetMesh& m, const Vec& v, const Gamma& gamma) {
  return finish(m, v, detail::kernel_impl(m, v, gamma));
}

HelmholtzSplit decompose_loop(const TetMesh& m, const Vec& v, const Mask& F_faces,
                              const Gamma& extra) {
  return finish(m, v, detail::loop_impl(m, v, F_faces, extra));
}

HelmholtzSplit edge_machinery(const TetMesh& m, const Vec& v, const std::vector<EdgeTask>& tasks,
                              const Gamma& extra) {
  return finish(m, v, detail::machinery_impl(m, v, tasks, extra));
}

}  // namespace helmdec::dec
