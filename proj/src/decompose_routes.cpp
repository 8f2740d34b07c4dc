// Copyright (c) 2026 helmdec contributors
// SPDX-License-Identifier: Apache-2.0
#include "decompose_internal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace helmdec::dec {

using ops::BoundaryLoop;
using namespace detail;

namespace {

HelmholtzSplit finish(const TetMesh& m, const Vec& v, HelmholtzSplit s) {
  s.ratios = measure(m, v, s);
  return s;
}

int find_parent(std::vector<int>& par, int i) {
  while (par[i] != i) i = par[i] = par[par[i]];
  return i;
}

// Number of groups of node sets connected through shared nodes.
int node_components(const std::vector<Mask>& sets, std::vector<int>* label = nullptr) {
  const int n = static_cast<int>(sets.size());
  std::vector<int> par(n);
  std::iota(par.begin(), par.end(), 0);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      bool meet = false;
      for (std::size_t i = 0; i < sets[a].size() && !meet; ++i) meet = sets[a][i] && sets[b][i];
      if (meet) par[find_parent(par, a)] = find_parent(par, b);
    }
  int c = 0;
  std::vector<int> id(n, -1);
  if (label) label->assign(n, -1);
  for (int a = 0; a < n; ++a) {
    int r = find_parent(par, a);
    if (id[r] < 0) id[r] = c++;
    if (label) (*label)[a] = id[r];
  }
  return c;
}

// Node-connected fine faces.
bool faces_connected(const TetMesh& m, const Mask& faces) {
  std::vector<Mask> sets;
  for (int f = 0; f < m.nf(); ++f) {
    if (!faces[f]) continue;
    Mask s(m.nv(), 0);
    for (int i : m.faces[f]) s[i] = 1;
    sets.push_back(std::move(s));
  }
  return sets.empty() || node_components(sets) == 1;
}

Mask face_nodes(const TetMesh& m, const Mask& faces) { return gamma_of_faces(m, faces).nodes; }

bool is_path_on_loop(const BoundaryLoop& L, const Mask& E) {
  const int n = L.size();
  int in = 0, runs = 0;
  for (int k = 0; k < n; ++k) {
    bool a = E[L.edges[k]], b = E[L.edges[(k + 1) % n]];
    in += a;
    runs += a && !b;
  }
  return in > 0 && in < n && runs == 1;
}

Mask loop_node_mask(const TetMesh& m, const BoundaryLoop& L) {
  Mask r(m.nv(), 0);
  for (int i : L.nodes) r[i] = 1;
  return r;
}

Mask loop_edge_mask(const TetMesh& m, const BoundaryLoop& L) {
  Mask r(m.ne(), 0);
  for (int e : L.edges) r[e] = 1;
  return r;
}

Mask mask_and(const Mask& a, const Mask& b) {
  Mask r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] && b[i];
  return r;
}

bool any(const Mask& a) { return count(a) > 0; }

std::vector<const CoarseEntity*> faces_through(const TetMesh& m, const Mask& nodes) {
  std::vector<const CoarseEntity*> out;
  for (const auto* F : candidate_faces(m))
    if (contains_nodes(mesh::entity_nodes(m, *F), nodes)) out.push_back(F);
  return out;
}

HelmholtzSplit edge_path_impl(const TetMesh& m, const Vec& v, const Mask& E) {
  Mask En = mesh::nodes_of_edges(m, E);
  for (const auto* F : faces_through(m, En)) {
    BoundaryLoop L = ops::make_loop(m, *F);
    if (!is_path_on_loop(L, E)) continue;
    auto s = machinery_impl(m, v, {{faces_of(m, *F), E}}, Gamma::empty(m));
    s.path = "edge/" + F->name;
    s.claim = Claim::SemiLog;
    s.pclaim = PClaim::Full;
    return s;
  }
  throw PreconditionError("no boundary face carries the edge set as a path of its loop");
}

// Face through a Gamma-free edge E whose loop meets Gamma in a path that
// extends E; runs the loop reduction with Gamma as extra constraint.
std::optional<HelmholtzSplit> touching_face_route(const TetMesh& m, const Vec& v, const Gamma& g,
                                                  const Mask& E, bool require_touch) {
  Mask En = mesh::nodes_of_edges(m, E);
  for (const auto* F : faces_through(m, En)) {
    Mask Ff = faces_of(m, *F);
    if (any(mask_and(Ff, g.faces))) continue;
    BoundaryLoop L = ops::make_loop(m, Ff);
    Mask Eaug = mask_or(E, mask_and(loop_edge_mask(m, L), g.edges));
    Mask hit = mask_and(loop_node_mask(m, L), g.nodes);
    if (require_touch != any(hit)) continue;
    if (!contains_nodes(mesh::nodes_of_edges(m, Eaug), hit)) continue;
    if (!is_path_on_loop(L, Eaug)) continue;
    try {
      auto s = machinery_impl(m, v, {{Ff, Eaug}}, g);
      s.path = F->name;
      return s;
    } catch (const PreconditionError&) {
    }
  }
  return std::nullopt;
}

HelmholtzSplit extended_domain_route(const TetMesh& m, const Vec& v,
                                     const std::vector<const CoarseEntity*>& faces,
                                     const CoarseEntity& E) {
  const auto& cat = mesh::catalog(m.geometry);
  if (cat.domain_blocks.size() == cat.blocks.size())
    throw PreconditionError("edge is apart from the faces but no face avoids them and no " +
                            std::string("extension domain is available"));
  mesh::TetMesh B = mesh::build_complex(m.geometry, m.nominal_h);
  mesh::TetMesh G = mesh::domain_mesh(B);
  if (G.uid != m.uid) throw PreconditionError("mesh is not the catalog domain mesh");
  Vec vB = Vec::Zero(B.ne());
  for (int e = 0; e < m.ne(); ++e) vB[G.parent_edge[e]] = v[e];
  Mask EB = edges_of(B, E), EnB = mesh::entity_nodes(B, E);
  std::optional<HelmholtzSplit> sB;
  std::string plane_name;
  for (const auto* F : faces_through(B, EnB)) {
    const double d = F->normal.dot(F->pts[0]);
    Mask FB(B.nf(), 0);
    for (int f = 0; f < B.nf(); ++f) {
      if (!B.boundary_face[f]) continue;
      bool in = true;
      for (int i : B.faces[f]) in = in && std::abs(F->normal.dot(B.verts[i]) - d) < 1e-9;
      FB[f] = in;
    }
    try {
      sB = machinery_impl(B, vB, {{FB, EB}}, Gamma::empty(B));
      plane_name = F->name;
      break;
    } catch (const PreconditionError&) {
    }
  }
  if (!sB) throw PreconditionError("no boundary plane of the extension domain carries the edge");
  auto ops = fem::operators(m);
  Gamma g = gamma_of_entities(m, faces);
  Mask En = mesh::entity_nodes(m, E), Em = edges_of(m, E);
  const auto& pv = G.parent_vert;
  Vec data = Vec::Zero(m.nv());
  for (int i = 0; i < m.nv(); ++i)
    if (g.nodes[i]) data[i] = sB->p[pv[i]];
  Vec ext = ops::harmonic_extend(m, m.boundary_vert, data);
  HelmholtzSplit s;
  s.p = Vec(m.nv());
  for (int i = 0; i < m.nv(); ++i) s.p[i] = sB->p[pv[i]] - ext[i];
  s.zero_nodes = mask_or(g.nodes, En);
  s.zero_edges = mask_or(g.edges, Em);
  for (int i = 0; i < m.nv(); ++i)
    if (s.zero_nodes[i]) s.p[i] = 0.0;
  ops::TetSamples samples(m.nt());
  for (int t = 0; t < m.nt(); ++t) {
    auto geo = fem::tet_geometry(m, t);
    Vec3 grad = Vec3::Zero();
    for (int j = 0; j < 4; ++j) grad += ext[m.tets[t][j]] * geo.grad[j];
    for (int j = 0; j < 4; ++j) samples[t][j] = sB->w.segment<3>(3 * pv[m.tets[t][j]]) + grad;
  }
  s.w = ops::scott_zhang(m, samples, s.zero_nodes, s.zero_edges, g.faces);
  recompute_residual(m, v, s);
  s.loops = sB->loops;
  s.path = "face_plus_edge/extended_domain/" + plane_name;
  s.claim = Claim::FullLog;
  s.pclaim = PClaim::Full;
  return s;
}

HelmholtzSplit face_plus_edge_impl(const TetMesh& m, const Vec& v,
                                   const std::vector<const CoarseEntity*>& faces,
                                   const CoarseEntity& E) {
  if (E.dim != 1) throw PreconditionError(E.name + " is not an edge");
  Gamma g = gamma_of_entities(m, faces);
  Mask Em = edges_of(m, E), En = mesh::entity_nodes(m, E);
  if (!any(Em)) throw PreconditionError(E.name + " has no fine edges in this mesh");
  if (!any(mask_and(En, g.nodes))) {
    if (auto s = touching_face_route(m, v, g, Em, false)) {
      s->path = "face_plus_edge/apart/" + s->path;
      s->claim = Claim::FullLog;
      s->pclaim = PClaim::Full;
      return *s;
    }
    return extended_domain_route(m, v, faces, E);
  }
  auto s = touching_face_route(m, v, g, Em, true);
  if (!s) throw PreconditionError("no face through " + E.name + " meets Gamma in a path");
  std::vector<Mask> sets{En};
  for (const auto* f : faces) sets.push_back(mesh::entity_nodes(m, *f));
  s->path = "face_plus_edge/touching/" + s->path;
  s->claim = node_components(sets) == 1 ? Claim::SemiLog : Claim::FullLog;
  s->pclaim = PClaim::Full;
  return *s;
}

HelmholtzSplit isolated_vertex_impl(const TetMesh& m, const Vec& v, const TraceSet& t) {
  Gamma g = gamma_of_trace(t);
  for (const auto* F : candidate_faces(m)) {
    Mask Ff = faces_of(m, *F);
    if (any(mask_and(Ff, g.faces))) continue;
    BoundaryLoop L = ops::make_loop(m, Ff);
    Mask E = mask_and(loop_edge_mask(m, L), g.edges);
    if (!any(E)) continue;
    bool touches_all = true;
    for (int f : t.coarse_faces) touches_all = touches_all && any(mask_and(E, mesh::edges_in(m, t.ent_nodes[f])));
    if (!touches_all) continue;
    Mask hit = mask_and(loop_node_mask(m, L), g.nodes);
    if (!contains_nodes(mesh::nodes_of_edges(m, E), hit) || !is_path_on_loop(L, E)) continue;
    try {
      auto s = machinery_impl(m, v, {{Ff, E}}, g);
      s.path = "isolated_vertex/" + F->name;
      s.claim = Claim::SemiLog;
      s.pclaim = PClaim::L2;
      return s;
    } catch (const PreconditionError&) {
    }
  }
  throw PreconditionError("no face crosses the non-Lipschitz vertex of Gamma along a path");
}

// Axis-aligned box around a node set.
struct Box {
  Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
  void add(const Vec3& x) {
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  bool inside(const Vec3& x, double tol) const {
    return (x.array() > lo.array() + tol).all() && (x.array() < hi.array() - tol).all();
  }
  double dist_inf(const Vec3& x) const {
    Vec3 d = (lo - x).cwiseMax(x - hi).cwiseMax(Vec3::Zero());
    return d.maxCoeff();
  }
};

HelmholtzSplit subdomain_edges_route(const TetMesh& m, const Vec& v,
                                     const std::vector<const CoarseEntity*>& edges) {
  const int n = static_cast<int>(edges.size());
  auto ops = fem::operators(m);
  std::vector<Mask> En(n), Em(n);
  for (int l = 0; l < n; ++l) {
    En[l] = mesh::entity_nodes(m, *edges[l]);
    Em[l] = edges_of(m, *edges[l]);
  }
  double sep = 1e300;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      for (int i = 0; i < m.nv(); ++i)
        if (En[a][i])
          for (int j = 0; j < m.nv(); ++j)
            if (En[b][j]) sep = std::min(sep, (m.verts[i] - m.verts[j]).norm());
  const double rho = sep / 4;
  std::vector<int> owner(m.nt(), -1);
  std::vector<Box> box(n);
  for (int l = 0; l < n; ++l) {
    Box b;
    for (int i = 0; i < m.nv(); ++i)
      if (En[l][i]) b.add(m.verts[i]);
    b.lo.array() -= rho;
    b.hi.array() += rho;
    for (int t = 0; t < m.nt(); ++t) {
      Vec3 c = Vec3::Zero();
      for (int i : m.tets[t]) c += 0.25 * m.verts[i];
      if (b.inside(c, 1e-12)) owner[t] = l;
    }
  }
  std::vector<Mask> closure_nodes(n, Mask(m.nv(), 0)), closure_edges(n, Mask(m.ne(), 0));
  for (int t = 0; t < m.nt(); ++t) {
    if (owner[t] < 0) continue;
    for (int i : m.tets[t]) closure_nodes[owner[t]][i] = 1;
    for (int e : m.tet_edges[t]) closure_edges[owner[t]][e] = 1;
  }
  for (int l = 0; l < n; ++l) {
    if (!contains_nodes(closure_nodes[l], En[l]))
      throw PreconditionError("mesh too coarse to separate the edges into subdomains");
    box[l] = Box{};
    for (int i = 0; i < m.nv(); ++i)
      if (closure_nodes[l][i]) box[l].add(m.verts[i]);
  }
  // per-edge splits on the whole domain, cut off around each edge
  Mask keep0(m.nt(), 0);
  for (int t = 0; t < m.nt(); ++t) keep0[t] = owner[t] < 0;
  std::vector<HelmholtzSplit> split(n);
  Vec p0 = Vec::Zero(m.nv()), w0 = Vec::Zero(3 * m.nv()), R0 = Vec::Zero(m.ne());
  for (int l = 0; l < n; ++l) {
    split[l] = edge_path_impl(m, v, Em[l]);
    for (int i = 0; i < m.nv(); ++i) {
      double th = closure_nodes[l][i] ? 1.0 : std::max(0.0, 1.0 - box[l].dist_inf(m.verts[i]) / rho);
      for (int j = 0; j < n; ++j)
        if (j != l && closure_nodes[j][i] && th != 0.0)
          throw PreconditionError("edge subdomains are too close for the cut-off");
      p0[i] += th * split[l].p[i];
      w0.segment<3>(3 * i) += th * split[l].w.segment<3>(3 * i);
    }
    for (int e = 0; e < m.ne(); ++e)
      if (closure_edges[l][e]) R0[e] += split[l].R[e];
  }
  Vec vt = v - ops->G * p0 - ops->Rh * w0 - R0;
  mesh::TetMesh m0 = mesh::submesh_tets(m, keep0);
  Mask iface(m.nf(), 0);
  for (int f = 0; f < m.nf(); ++f) {
    auto [a, b] = m.face_tets[f];
    if (b >= 0 && (owner[a] < 0) != (owner[b] < 0)) iface[f] = 1;
  }
  Gamma g0 = restrict_gamma(m, m0, gamma_of_faces(m, iface));
  Vec v0 = restrict_edges(m0, vt), spill = Vec::Zero(m0.ne());
  clear_edges(v0, g0.edges, roundoff_tol(v) + roundoff_tol(vt), spill, "subdomain interface");
  auto s0 = kernel_impl(m0, v0, g0);
  HelmholtzSplit s;
  s.p = Vec::Zero(m.nv());
  s.w = Vec::Zero(3 * m.nv());
  Mask done(m.nv(), 0);
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < m.nv(); ++i)
      if (closure_nodes[l][i]) {
        s.p[i] = split[l].p[i];
        s.w.segment<3>(3 * i) = split[l].w.segment<3>(3 * i);
        done[i] = 1;
      }
  Vec ps = Vec::Zero(m.nv()), ws = Vec::Zero(3 * m.nv());
  add_nodal(m0, s0.p, ps);
  add_nodal3(m0, s0.w, ws);
  for (int i = 0; i < m.nv(); ++i)
    if (!done[i]) {
      s.p[i] = ps[i] + p0[i];
      s.w.segment<3>(3 * i) = ws.segment<3>(3 * i) + w0.segment<3>(3 * i);
    }
  s.zero_nodes = Mask(m.nv(), 0);
  s.zero_edges = Mask(m.ne(), 0);
  for (int l = 0; l < n; ++l) {
    s.zero_nodes = mask_or(s.zero_nodes, En[l]);
    s.zero_edges = mask_or(s.zero_edges, Em[l]);
    s.loops.insert(s.loops.end(), split[l].loops.begin(), split[l].loops.end());
  }
  recompute_residual(m, v, s);
  s.path = "disjoint_edges/subdomains";
  s.claim = Claim::FullLog;
  s.pclaim = PClaim::Full;
  return s;
}

HelmholtzSplit disjoint_edges_impl(const TetMesh& m, const Vec& v,
                                   const std::vector<const CoarseEntity*>& edges) {
  const int n = static_cast<int>(edges.size());
  if (n == 0) throw PreconditionError("no edges given");
  std::vector<Mask> En(n), Em(n);
  for (int l = 0; l < n; ++l) {
    if (edges[l]->dim != 1) throw PreconditionError(edges[l]->name + " is not an edge");
    En[l] = mesh::entity_nodes(m, *edges[l]);
    Em[l] = edges_of(m, *edges[l]);
  }
  if (n == 1) {
    auto s = edge_path_impl(m, v, Em[0]);
    s.path = "edge/" + edges[0]->name;
    return s;
  }
  if (node_components(En) != n) throw PreconditionError("edges are not pairwise disjoint");
  // one face per edge whose loop meets the other edges only in a path extending it
  std::vector<EdgeTask> tasks;
  Mask used(m.nf(), 0);
  for (int l = 0; l < n; ++l) {
    Mask others_n(m.nv(), 0), others_e(m.ne(), 0);
    for (int r = 0; r < n; ++r)
      if (r != l) {
        others_n = mask_or(others_n, En[r]);
        others_e = mask_or(others_e, Em[r]);
      }
    bool found = false;
    for (const auto* F : faces_through(m, En[l])) {
      Mask Ff = faces_of(m, *F);
      if (any(mask_and(Ff, used))) continue;
      BoundaryLoop L = ops::make_loop(m, Ff);
      Mask Eaug = mask_or(Em[l], mask_and(loop_edge_mask(m, L), others_e));
      Mask hit = mask_and(loop_node_mask(m, L), others_n);
      if (!contains_nodes(mesh::nodes_of_edges(m, Eaug), hit) || !is_path_on_loop(L, Eaug)) continue;
      tasks.push_back({Ff, Eaug});
      used = mask_or(used, Ff);
      found = true;
      break;
    }
    if (!found) break;
  }
  if (static_cast<int>(tasks.size()) == n) {
    try {
      auto s = machinery_impl(m, v, tasks, Gamma::empty(m));
      s.path = "disjoint_edges/faces";
      s.claim = Claim::FullLog;
      s.pclaim = PClaim::Full;
      return s;
    } catch (const PreconditionError&) {
    }
  }
  return subdomain_edges_route(m, v, edges);
}

// Block-wise face route for non-convex multi-block domains: kernel on the
// first group of blocks, extension of that split across the interfaces, then
// the kernel on each remaining block with the interface as Dirichlet set.
HelmholtzSplit face_trace_impl(const TetMesh& m, const Vec& v, const TraceSet& t) {
  const auto& cat = mesh::catalog(m.geometry);
  Gamma g = gamma_of_trace(t);
  if (t.covers_concave || cat.sigma1.empty()) {
    auto s = kernel_impl(m, v, g);
    s.path = "kernel";
    return s;
  }
  std::vector<int> s1 = cat.sigma1, s2;
  for (int b : cat.domain_blocks)
    if (std::find(s1.begin(), s1.end(), b) == s1.end()) s2.push_back(b);
  auto block_faces = [&](int b) {
    Mask r(m.nf(), 0);
    for (int f = 0; f < m.nf(); ++f) {
      auto [a, c] = m.face_tets[f];
      r[f] = m.block_of_tet[a] == b || (c >= 0 && m.block_of_tet[c] == b);
    }
    return r;
  };
  auto iface = [&](int b, int k) {
    Mask r(m.nf(), 0);
    for (int f = 0; f < m.nf(); ++f) {
      auto [a, c] = m.face_tets[f];
      if (c < 0) continue;
      int ba = m.block_of_tet[a], bc = m.block_of_tet[c];
      r[f] = (ba == b && bc == k) || (ba == k && bc == b);
    }
    return r;
  };
  // structural conditions on Gamma and the block groups
  for (int b : s1) {
    Mask Dn = mesh::nodes_of_tets(m, {b});
    Mask gf = mask_and(g.faces, block_faces(b));
    if (!contains_nodes(face_nodes(m, gf), mask_and(g.nodes, Dn)) || !faces_connected(m, gf))
      throw PreconditionError("Gamma on block " + cat.blocks[b].name +
                              " is not a connected union of its faces");
  }
  std::vector<Mask> S(s2.size());
  for (std::size_t k = 0; k < s2.size(); ++k) {
    Mask sk = mask_and(g.faces, block_faces(s2[k]));
    for (int b : s1) sk = mask_or(sk, iface(b, s2[k]));
    Mask Dn = mesh::nodes_of_tets(m, {s2[k]});
    if (!contains_nodes(face_nodes(m, sk), mask_and(g.nodes, Dn)) || !faces_connected(m, sk))
      throw PreconditionError("Gamma on block " + cat.blocks[s2[k]].name +
                              " together with the interface is not connected");
    S[k] = sk;
  }
  for (std::size_t k = 0; k < s2.size(); ++k)
    for (std::size_t j = 0; j < s2.size(); ++j) {
      if (j == k) continue;
      if (any(iface(s2[k], s2[j])))
        throw PreconditionError("blocks of the second group share a face");
      Mask meet = mask_and(mesh::nodes_of_tets(m, {s2[k]}), mesh::nodes_of_tets(m, {s2[j]}));
      if (!contains_nodes(face_nodes(m, S[k]), meet))
        throw PreconditionError("blocks of the second group meet away from the interface");
    }
  auto ops = fem::operators(m);
  Vec pt = Vec::Zero(m.nv()), wt = Vec::Zero(3 * m.nv()), Rt = Vec::Zero(m.ne());
  std::vector<mesh::TetMesh> sub1;
  std::vector<HelmholtzSplit> split1;
  for (int b : s1) {
    sub1.push_back(mesh::submesh(m, {b}));
    const auto& mb = sub1.back();
    split1.push_back(kernel_impl(mb, restrict_edges(mb, v), restrict_gamma(m, mb, g)));
    add_nodal(mb, split1.back().p, pt);
    add_nodal3(mb, split1.back().w, wt);
    add_edges(mb, split1.back().R, Rt);
  }
  Vec p = pt, w = wt;
  std::vector<mesh::TetMesh> sub2;
  std::vector<Gamma> g2;
  for (std::size_t k = 0; k < s2.size(); ++k) {
    sub2.push_back(mesh::submesh(m, {s2[k]}));
    const auto& mk = sub2.back();
    Gamma Fk = gamma_of_faces(m, Mask(m.nf(), 0));
    Vec wdata = Vec::Zero(3 * m.nv()), pdata = Vec::Zero(m.nv()), wedge = Vec::Zero(3 * m.nv());
    for (std::size_t bi = 0; bi < s1.size(); ++bi) {
      int b = s1[bi];
      Mask fm = iface(b, s2[k]);
      if (!any(fm)) continue;
      Gamma gf = gamma_of_faces(m, fm);
      Fk = Fk | gf;
      const CoarseEntity* Fent = nullptr;
      for (const auto& e : cat.entities)
        if (e.dim == 2 && e.block == b && contains_nodes(mesh::entity_nodes(m, e), gf.nodes)) {
          Fent = &e;
          break;
        }
      if (!Fent) throw std::logic_error("interface face missing from the catalog");
      Vec theta = ops::face_cutoff(m, *Fent, b);
      Mask rim = mesh::nodes_of_edges(m, boundary_of_faces(m, fm));
      for (int i = 0; i < m.nv(); ++i) {
        if (!gf.nodes[i]) continue;
        pdata[i] = pt[i];
        if (rim[i])
          wedge.segment<3>(3 * i) = wt.segment<3>(3 * i);
        else
          wdata.segment<3>(3 * i) = theta[i] * wt.segment<3>(3 * i);
      }
    }
    // harmonic extensions into block k (boundary nodes of the block are Dirichlet)
    Vec pk_data(mk.nv()), pk;
    Vec wk = Vec::Zero(3 * mk.nv());
    for (int i = 0; i < mk.nv(); ++i) pk_data[i] = pdata[mk.parent_vert[i]];
    pk = ops::harmonic_extend(mk, mk.boundary_vert, pk_data);
    for (int c = 0; c < 3; ++c) {
      Vec d(mk.nv());
      for (int i = 0; i < mk.nv(); ++i) d[i] = wdata[3 * mk.parent_vert[i] + c];
      Vec hc = ops::harmonic_extend(mk, mk.boundary_vert, d);
      for (int i = 0; i < mk.nv(); ++i) wk[3 * i + c] = hc[i] + wedge[3 * mk.parent_vert[i] + c];
    }
    for (int i = 0; i < mk.nv(); ++i) {
      int gi = mk.parent_vert[i];
      if (Fk.nodes[gi]) continue;  // interface values already come from the first group
      p[gi] += pk[i];
      w.segment<3>(3 * gi) += wk.segment<3>(3 * i);
    }
    g2.push_back(restrict_gamma(m, mk, Fk | g));
  }
  Vec vs = v - ops->G * p - ops->Rh * w - Rt;
  for (std::size_t k = 0; k < s2.size(); ++k) {
    const auto& mk = sub2[k];
    Vec vk = restrict_edges(mk, vs), spill = Vec::Zero(mk.ne());
    clear_edges(vk, g2[k].edges, roundoff_tol(v) + roundoff_tol(vs), spill, "interface");
    auto sk = kernel_impl(mk, vk, g2[k]);
    add_nodal(mk, sk.p, p);
    add_nodal3(mk, sk.w, w);
  }
  HelmholtzSplit s;
  s.p = p;
  s.w = w;
  s.zero_nodes = g.nodes;
  s.zero_edges = g.edges;
  for (int i = 0; i < m.nv(); ++i)
    if (g.nodes[i]) {
      s.p[i] = 0.0;
      s.w.segment<3>(3 * i).setZero();
    }
  recompute_residual(m, v, s);
  s.path = "face_trace/blocks";
  s.claim = Claim::SemiLog;
  s.pclaim = PClaim::L2;
  return s;
}

}  // namespace
}  // namespace helmdec::dec

namespace helmdec::dec {

namespace detail {

void recompute_residual(const TetMesh& m, const Vec& v, HelmholtzSplit& s) {
  auto ops = fem::operators(m);
  Vec gp = ops->G * s.p, rw = ops->Rh * s.w;
  s.R = v - gp - rw;
  Vec spill = Vec::Zero(m.ne());
  clear_edges(s.R, s.zero_edges, roundoff_tol(v) + roundoff_tol(gp) + roundoff_tol(rw), spill,
              "assembled split");
}

HelmholtzSplit dispatch_single(const TetMesh& m, const Vec& v, const TraceSet& t, bool convex) {
  Gamma g = gamma_of_trace(t);
  if (t.empty()) {
    auto s = kernel_impl(m, v, g);
    s.path = "kernel/free_boundary";
    return s;
  }
  auto fe = t.free_edges();
  if (!t.free_vertices().empty())
    throw PreconditionError("Gamma has an isolated vertex away from a junction");
  if (fe.empty()) {
    if (t.isolated_vertex_union) return isolated_vertex_impl(m, v, t);
    if (t.J() >= 2) {
      auto s = kernel_impl(m, v, g);
      bool lip = std::all_of(t.components.begin(), t.components.end(),
                             [](const auto& c) { return c.lipschitz; });
      s.path = "kernel/components";
      s.claim = lip ? Claim::FullNolog : Claim::FullLog;
      return s;
    }
    if (!convex && !t.covers_concave) return face_trace_impl(m, v, t);
    auto s = kernel_impl(m, v, g);
    s.path = "kernel/faces";
    return s;
  }
  std::vector<Mask> en;
  for (int e : fe) en.push_back(t.ent_nodes[e]);
  std::vector<int> label;
  int ncomp = node_components(en, &label);
  if (t.coarse_faces.empty()) {
    if (ncomp == 1) {
      Mask E(m.ne(), 0);
      for (int e : fe) E = mask_or(E, edges_of(m, *t.entities[e]));
      auto s = edge_path_impl(m, v, E);
      return s;
    }
    if (ncomp != static_cast<int>(fe.size()))
      throw PreconditionError("edge components of Gamma must be single coarse edges");
    std::vector<const CoarseEntity*> edges;
    for (int e : fe) edges.push_back(t.entities[e]);
    return disjoint_edges_impl(m, v, edges);
  }
  if (fe.size() != 1)
    throw PreconditionError("faces together with more than one free edge are not supported");
  std::vector<const CoarseEntity*> faces;
  for (int f : t.coarse_faces) faces.push_back(t.entities[f]);
  for (int e : t.coarse_edges)
    if (std::find(fe.begin(), fe.end(), e) == fe.end()) faces.push_back(t.entities[e]);
  return face_plus_edge_impl(m, v, faces, *t.entities[fe[0]]);
}

}  // namespace detail

HelmholtzSplit decompose_face_trace(const TetMesh& m, const Vec& v, const TraceSet& trace) {
  return finish(m, v, face_trace_impl(m, v, trace));
}

HelmholtzSplit decompose_edge(const TetMesh& m, const Vec& v, const CoarseEntity& E) {
  if (E.dim != 1) throw PreconditionError(E.name + " is not an edge");
  Mask Em = edges_of(m, E);
  if (!any(Em)) throw PreconditionError(E.name + " has no fine edges in this mesh");
  auto s = edge_path_impl(m, v, Em);
  s.path = "edge/" + E.name;
  return finish(m, v, std::move(s));
}

HelmholtzSplit decompose_isolated_vertex_union(const TetMesh& m, const Vec& v,
                                               const TraceSet& trace) {
  return finish(m, v, isolated_vertex_impl(m, v, trace));
}

HelmholtzSplit decompose_face_plus_edge(const TetMesh& m, const Vec& v,
                                        const std::vector<const CoarseEntity*>& faces,
                                        const CoarseEntity& E) {
  return finish(m, v, face_plus_edge_impl(m, v, faces, E));
}

HelmholtzSplit decompose_disjoint_edges(const TetMesh& m, const Vec& v,
                                        const std::vector<const CoarseEntity*>& edges) {
  return finish(m, v, disjoint_edges_impl(m, v, edges));
}

std::string gamma_violation(const TetMesh& m, const Vec& v, const TraceSet& trace) {
  for (int e = 0; e < m.ne(); ++e) {
    if (!trace.edges[e] || v[e] == 0.0) continue;
    std::string ent;
    const auto& a = m.edges[e];
    for (std::size_t k = 0; k < trace.entities.size(); ++k)
      if (trace.ent_nodes[k][a[0]] && trace.ent_nodes[k][a[1]]) {
        ent = trace.entities[k]->name;
        break;
      }
    std::ostringstream os;
    os << "field has nonzero moment " << v[e] << " on Gamma: fine edge " << e << " (nodes " << a[0]
       << "-" << a[1] << ") on " << ent;
    return os.str();
  }
  return {};
}

HelmholtzSplit decompose(const TetMesh& m, const Vec& v, const TraceSet& trace) {
  if (v.size() != m.ne()) throw PreconditionError("field length does not match the mesh edges");
  if (trace.geometry != m.geometry) throw PreconditionError("trace belongs to another geometry");
  if (auto msg = gamma_violation(m, v, trace); !msg.empty()) throw PreconditionError(msg);
  const auto& cat = mesh::catalog(m.geometry);
  auto in_domain = [&](int b) {
    return std::find(cat.domain_blocks.begin(), cat.domain_blocks.end(), b) != cat.domain_blocks.end();
  };
  for (const auto& j : cat.junctions) {
    if (cat.lipschitz || !in_domain(j.a) || !in_domain(j.b)) continue;
    if (j.kind == mesh::JunctionKind::Edge) return decompose_edge_junction(m, v, trace);
    if (j.kind == mesh::JunctionKind::Vertex) {
      auto out = decompose_vertex_junction(m, v, trace);
      if (!out.split) {
        std::ostringstream os;
        os << "vertex junction functionals do not vanish: max |F| = " << out.report.max_abs()
           << " > " << out.report.tol;
        throw CompatibilityError(os.str(), out.report);
      }
      return *out.split;
    }
  }
  return finish(m, v, dispatch_single(m, v, trace, cat.convex));
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Uniform in [-1, 1) from the top 53 bits.
double unit(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53 * 2.0 - 1.0; }

}  // namespace

Vec random_nodal(int n, std::uint64_t seed) {
  std::mt19937_64 gen(splitmix64(seed));
  Vec r(n);
  for (int i = 0; i < n; ++i) r[i] = unit(gen);
  return r;
}

Vec random_field(const TetMesh& m, const TraceSet& trace, std::uint64_t seed) {
  std::mt19937_64 gen(splitmix64(seed));
  Vec v(m.ne());
  for (int e = 0; e < m.ne(); ++e) v[e] = unit(gen);
  for (int e = 0; e < m.ne(); ++e)
    if (trace.edges[e]) v[e] = 0.0;
  return detail::make_junction_compatible(m, v, trace);
}

}  // namespace helmdec::dec
