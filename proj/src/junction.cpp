// Copyright (c) 2026 helmdec contributors
// SPDX-License-Identifier: Apache-2.0
#include "decompose_internal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace helmdec::dec {

using ops::BoundaryLoop;
using namespace detail;

namespace {

Mask mask_and(const Mask& a, const Mask& b) {
  Mask r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] && b[i];
  return r;
}

bool any(const Mask& a) { return count(a) > 0; }

std::vector<std::string> block_spec(const TraceSet& t, int block) {
  std::vector<std::string> out;
  for (const auto* e : t.entities)
    if (e->block == block) out.push_back(e->name);
  return out;
}

int local_node(const TetMesh& sub, int global) {
  for (int i = 0; i < sub.nv(); ++i)
    if (sub.parent_vert[i] == global) return i;
  return -1;
}

HelmholtzSplit assemble_blocks(const TetMesh& m, const Vec& v, const TraceSet& trace,
                               const std::vector<const TetMesh*>& subs,
                               const std::vector<HelmholtzSplit>& parts, const Mask& shared) {
  HelmholtzSplit s;
  s.p = Vec::Zero(m.nv());
  s.w = Vec::Zero(3 * m.nv());
  std::vector<int> hits(m.nv(), 0);
  for (std::size_t i = 0; i < subs.size(); ++i) {
    add_nodal(*subs[i], parts[i].p, s.p);
    add_nodal3(*subs[i], parts[i].w, s.w);
    for (int k = 0; k < subs[i]->nv(); ++k) ++hits[subs[i]->parent_vert[k]];
    s.loops.insert(s.loops.end(), parts[i].loops.begin(), parts[i].loops.end());
  }
  // shared nodes carry the same value from every block
  for (int k = 0; k < m.nv(); ++k)
    if (shared[k] && hits[k] > 1) {
      s.p[k] /= hits[k];
      s.w.segment<3>(3 * k) /= hits[k];
    }
  s.zero_nodes = trace.nodes;
  s.zero_edges = trace.edges;
  for (int k = 0; k < m.nv(); ++k)
    if (trace.nodes[k]) {
      s.p[k] = 0.0;
      s.w.segment<3>(3 * k).setZero();
    }
  recompute_residual(m, v, s);
  return s;
}

}  // namespace

HelmholtzSplit decompose_edge_junction(const TetMesh& m, const Vec& v, const TraceSet& trace) {
  const auto& cat = mesh::catalog(m.geometry);
  auto jt = std::find_if(cat.junctions.begin(), cat.junctions.end(),
                         [](const auto& j) { return j.kind == mesh::JunctionKind::Edge; });
  if (jt == cat.junctions.end()) throw PreconditionError("geometry has no edge junction");
  if (auto msg = gamma_violation(m, v, trace); !msg.empty()) throw PreconditionError(msg);
  const int blk[2] = {jt->a, jt->b};
  Mask En = mask_and(mesh::nodes_of_tets(m, {blk[0]}), mesh::nodes_of_tets(m, {blk[1]}));
  Mask Em = mesh::edges_in(m, En);
  TetMesh sub[2] = {mesh::submesh(m, {blk[0]}), mesh::submesh(m, {blk[1]})};
  std::vector<std::string> spec[2];
  bool inG[2];
  std::string Ename[2];
  for (int i = 0; i < 2; ++i) {
    spec[i] = block_spec(trace, blk[i]);
    Mask gn(m.nv(), 0);
    for (std::size_t k = 0; k < trace.entities.size(); ++k)
      if (trace.entities[k]->block == blk[i]) gn = mask_or(gn, trace.ent_nodes[k]);
    inG[i] = contains_nodes(gn, En);
    for (const auto& e : cat.entities)
      if (e.dim == 1 && e.block == blk[i] && mesh::entity_nodes(m, e) == En) Ename[i] = e.name;
    if (Ename[i].empty()) throw std::logic_error("junction edge missing from the catalog");
  }
  auto run = [&](int i, const Vec& vi, bool addE) {
    auto sp = spec[i];
    if (addE) sp.push_back(Ename[i]);
    auto ti = mesh::tag_trace(sub[i], sp);
    return dispatch_single(sub[i], vi, ti, true);
  };
  std::vector<HelmholtzSplit> parts(2);
  std::string path;
  if (inG[0] || inG[1]) {
    for (int i = 0; i < 2; ++i) parts[i] = run(i, restrict_edges(sub[i], v), !inG[i]);
    path = inG[0] && inG[1] ? "edge_junction/edge_in_both" : "edge_junction/edge_in_one";
  } else {
    int first = (!spec[0].empty() || spec[1].empty()) ? 0 : 1, second = 1 - first;
    auto s1 = run(first, restrict_edges(sub[first], v), false);
    auto ops = fem::operators(m);
    Vec p1 = Vec::Zero(m.nv()), w1 = Vec::Zero(3 * m.nv()), R1 = Vec::Zero(m.ne());
    add_nodal(sub[first], s1.p, p1);
    add_nodal3(sub[first], s1.w, w1);
    add_edges(sub[first], s1.R, R1);
    Vec vs = v - ops->G * p1 - ops->Rh * w1 - R1;
    Vec v2 = restrict_edges(sub[second], vs), spill = Vec::Zero(sub[second].ne());
    Mask E2(sub[second].ne(), 0);
    for (int e = 0; e < sub[second].ne(); ++e) E2[e] = Em[sub[second].parent_edge[e]];
    clear_edges(v2, E2, roundoff_tol(v) + roundoff_tol(vs), spill, "junction edge");
    auto s2 = run(second, v2, true);
    // the second block vanishes on the junction edge, so plain sums glue
    HelmholtzSplit s;
    s.p = p1;
    s.w = w1;
    add_nodal(sub[second], s2.p, s.p);
    add_nodal3(sub[second], s2.w, s.w);
    s.loops = s1.loops;
    s.loops.insert(s.loops.end(), s2.loops.begin(), s2.loops.end());
    s.zero_nodes = trace.nodes;
    s.zero_edges = trace.edges;
    recompute_residual(m, v, s);
    s.path = "edge_junction/edge_free";
    s.claim = trace.J() <= 1 ? Claim::SemiLog : Claim::FullLog;
    s.pclaim = PClaim::Full;
    s.ratios = measure(m, v, s);
    return s;
  }
  auto s = assemble_blocks(m, v, trace, {&sub[0], &sub[1]}, parts, En);
  s.path = path;
  bool faces_only = trace.coarse_edges.empty() && trace.coarse_vertices.empty();
  if (inG[0] && inG[1]) {
    s.claim = faces_only ? (trace.J() <= 1 ? Claim::SemiNolog : Claim::FullNolog)
                         : (trace.J() <= 1 ? Claim::SemiLog : Claim::FullLog);
    s.pclaim = faces_only ? PClaim::L2 : PClaim::Full;
  } else {
    s.claim = trace.J() <= 1 ? Claim::SemiLog : Claim::FullLog;
    s.pclaim = PClaim::Full;
  }
  s.ratios = measure(m, v, s);
  return s;
}

namespace {

enum class BlockKind { Contains, Free, Gated };

struct BlockPlan {
  int block = 0;
  BlockKind kind = BlockKind::Free;
  TetMesh sub;
  TraceSet trace;
  int v0 = -1;  // local index of the junction vertex
  const CoarseEntity* face = nullptr;
  BoundaryLoop loop;
  std::vector<char> E;  // loop positions of the reference edge set
  bool eps = false;     // E lies on Gamma: correct the loop constant
  double value = std::numeric_limits<double>::quiet_NaN();
};

struct JunctionPlan {
  int v0 = -1;
  std::vector<BlockPlan> blocks;
  JunctionReport report;
};

std::vector<char> positions(const BoundaryLoop& L, const Mask& edges) {
  std::vector<char> r(L.size(), 0);
  for (int k = 0; k < L.size(); ++k) r[k] = edges[L.edges[k]];
  return r;
}

bool is_path(const std::vector<char>& pos) {
  const int n = static_cast<int>(pos.size());
  int in = 0, runs = 0;
  for (int k = 0; k < n; ++k) {
    in += pos[k];
    runs += pos[k] && !pos[(k + 1) % n];
  }
  return in > 0 && in < n && runs == 1;
}

void choose_face(BlockPlan& b) {
  const TetMesh& s = b.sub;
  Gamma g = gamma_of_trace(b.trace);
  std::vector<const CoarseEntity*> through;
  for (const auto* F : candidate_faces(s))
    if (mesh::entity_nodes(s, *F)[b.v0] && !any(mask_and(faces_of(s, *F), g.faces)))
      through.push_back(F);
  if (through.empty()) throw PreconditionError("no boundary face through the junction vertex");
  auto set_ref = [&](const CoarseEntity* F, BoundaryLoop L) {
    b.face = F;
    b.loop = std::move(L);
    if (b.E.empty()) {
      auto seg = loop_segments(s, b.loop);
      if (seg.size() < 3) throw PreconditionError("face loop has too few corners");
      b.E.assign(b.loop.size(), 0);
      for (int k : seg[1]) b.E[k] = 1;
    }
  };
  if (b.kind == BlockKind::Free) {
    set_ref(through.front(), ops::make_loop(s, faces_of(s, *through.front()), b.v0));
    return;
  }
  for (const auto* F : through) {
    BoundaryLoop L = ops::make_loop(s, faces_of(s, *F), b.v0);
    auto pos = positions(L, g.edges);
    if (!is_path(pos)) continue;
    Mask epos_nodes(s.nv(), 0);
    for (int k = 0; k < L.size(); ++k)
      if (pos[k]) epos_nodes[L.nodes[k]] = epos_nodes[L.nodes[(k + 1) % L.size()]] = 1;
    bool stray = false;
    for (int i : L.nodes) stray = stray || (g.nodes[i] && !epos_nodes[i]);
    if (stray) continue;
    b.E = pos;
    b.eps = true;
    set_ref(F, std::move(L));
    return;
  }
  for (const auto* F : through) {
    BoundaryLoop L = ops::make_loop(s, faces_of(s, *F), b.v0);
    bool hit = false;
    for (int i : L.nodes) hit = hit || g.nodes[i];
    if (hit) continue;
    b.E.clear();
    b.eps = false;
    set_ref(F, std::move(L));
    return;
  }
  throw PreconditionError("block " + b.sub.geometry +
                          ": no face through the junction vertex meets Gamma in a path or avoids it");
}

JunctionPlan plan_junction(const TetMesh& m, const Vec& v, const TraceSet& trace) {
  const auto& cat = mesh::catalog(m.geometry);
  JunctionPlan P;
  std::vector<int> blocks;
  for (const auto& j : cat.junctions) {
    if (j.kind != mesh::JunctionKind::Vertex) continue;
    for (int b : {j.a, j.b})
      if (std::find(blocks.begin(), blocks.end(), b) == blocks.end()) blocks.push_back(b);
  }
  if (blocks.empty()) throw PreconditionError("geometry has no vertex junction");
  std::sort(blocks.begin(), blocks.end());
  Mask common = mesh::nodes_of_tets(m, {blocks[0]});
  for (int b : blocks) common = mask_and(common, mesh::nodes_of_tets(m, {b}));
  if (count(common) != 1) throw PreconditionError("blocks do not meet in a single vertex");
  P.v0 = static_cast<int>(std::find(common.begin(), common.end(), 1) - common.begin());
  for (int b : blocks) {
    BlockPlan bp;
    bp.block = b;
    bp.sub = mesh::submesh(m, {b});
    bp.trace = mesh::tag_trace(bp.sub, block_spec(trace, b));
    bp.v0 = local_node(bp.sub, P.v0);
    Vec vi = restrict_edges(bp.sub, v);
    if (bp.trace.nodes[bp.v0]) {
      bp.kind = BlockKind::Contains;
      bp.value = 0.0;
    } else {
      bp.kind = bp.trace.empty() ? BlockKind::Free : BlockKind::Gated;
      choose_face(bp);
      if (bp.kind == BlockKind::Gated)
        bp.value = ops::loop_decompose(bp.loop, vi, {}, bp.E).c_shift;
    }
    P.report.values.push_back(bp.value);
    P.report.faces.push_back(bp.face ? bp.face->name : "");
    std::string en;
    if (bp.face) {
      auto seg = loop_segments(bp.sub, bp.loop);
      std::ostringstream os;
      os << (bp.eps ? "gamma:" : "reference:");
      for (std::size_t si = 0; si < seg.size(); ++si)
        if (bp.E[seg[si][0]]) os << " segment" << si;
      en = os.str();
    }
    P.report.edges.push_back(en);
    P.blocks.push_back(std::move(bp));
  }
  std::vector<double> cons;
  for (const auto& b : P.blocks)
    if (!std::isnan(b.value)) cons.push_back(b.value);
  for (std::size_t k = 0; k + 1 < cons.size(); ++k) P.report.F.push_back(cons[k + 1] - cons[k]);
  P.report.tol = 1e-10 * fem::norm(m, v, fem::FieldKind::Edge, fem::NormKind::Curl);
  P.report.violated = P.report.max_abs() > P.report.tol;
  return P;
}

double target_value(const JunctionPlan& P) {
  for (const auto& b : P.blocks)
    if (b.kind == BlockKind::Contains) return 0.0;
  for (const auto& b : P.blocks)
    if (b.kind == BlockKind::Gated) return b.value;
  return 0.0;
}

// Loop reduction through the junction vertex, pinning p(v0) = a.
HelmholtzSplit loop_block(const BlockPlan& b, const Vec& vi, double a) {
  const TetMesh& s = b.sub;
  const BoundaryLoop& L = b.loop;
  const int n = L.size();
  auto ops = fem::operators(s);
  Gamma g = gamma_of_trace(b.trace);
  const bool gated = b.kind == BlockKind::Gated;
  auto d = gated ? ops::loop_decompose(L, vi, {}, b.E) : ops::loop_decompose(L, vi);
  std::vector<double> phi = d.phi, target(n);
  for (int k = 0; k < n; ++k) target[k] = d.C * L.len[k];
  if (b.eps) {
    auto seg = loop_segments(s, L);
    int first = -1, last = -1;
    for (std::size_t si = 0; si < seg.size(); ++si)
      if (b.E[seg[si][0]]) {
        if (first < 0) first = static_cast<int>(si);
        last = static_cast<int>(si);
      }
    if (first < 1 || last + 1 >= static_cast<int>(seg.size()))
      throw PreconditionError("Gamma path on the loop touches the junction vertex");
    std::vector<char> E1(n, 0), E2(n, 0);
    for (int k : seg[first - 1]) E1[k] = 1;
    for (int k : seg[last + 1]) E2[k] = 1;
    auto eps = ops::epsilon_correction(L, b.E, E1, E2, d.C);
    double cum = 0;
    for (int k = 0; k < n; ++k) {
      phi[k] -= cum;
      cum += eps[k] * L.len[k];
      target[k] = (d.C + eps[k]) * L.len[k];
    }
  }
  Vec phin = Vec::Zero(s.nv());
  if (!gated) {
    for (double& x : phi) x += a;
    double num = 0;
    for (int k = 0; k < n; ++k) num += L.len[k] * 0.5 * (phi[k] + phi[(k + 1) % n]);
    phin.setConstant(num / L.length);
  }
  for (int k = 0; k < n; ++k) phin[L.nodes[k]] = phi[k];
  double slack = std::abs(phin[b.v0] - a);
  phin[b.v0] = a;
  Mask fixed = g.nodes;
  fixed[b.v0] = 1;
  double tol = roundoff_tol(vi);
  for (int i = 0; i < s.nv(); ++i)
    if (g.nodes[i]) {
      if (std::abs(phin[i]) > tol) throw std::logic_error("loop potential does not vanish on Gamma");
      phin[i] = 0.0;
    }
  std::vector<char> cons(n, 0);
  for (int k = 0; k < n; ++k) cons[k] = !(fixed[L.nodes[k]] && fixed[L.nodes[(k + 1) % n]]);
  Vec Ct = ops::loop_constant_extension(s, L, cons, target, fixed);
  Vec gp = ops->G * phin, rc = ops->Rh * Ct;
  Vec vhat = vi - gp - rc, spill = Vec::Zero(s.ne());
  Mask le(s.ne(), 0);
  for (int e : L.edges) le[e] = 1;
  clear_edges(vhat, le, tol + roundoff_tol(gp) + roundoff_tol(rc) + 2 * slack, spill,
              "junction loop");
  auto inner = loop_impl(s, vhat, faces_of(s, *b.face), g);
  HelmholtzSplit out;
  out.p = phin + inner.p;
  out.w = Ct + inner.w;
  out.R = inner.R + spill;
  out.loops.push_back({d.C, ops::loop_flux(s, L, vi), L.length});
  return out;
}

}  // namespace

JunctionReport junction_functionals(const TetMesh& m, const Vec& v, const TraceSet& trace) {
  return plan_junction(m, v, trace).report;
}

JunctionOutcome decompose_vertex_junction(const TetMesh& m, const Vec& v, const TraceSet& trace) {
  if (auto msg = gamma_violation(m, v, trace); !msg.empty()) throw PreconditionError(msg);
  auto P = plan_junction(m, v, trace);
  JunctionOutcome out;
  out.report = P.report;
  if (P.report.violated) return out;
  const double a = target_value(P);
  std::vector<HelmholtzSplit> parts;
  std::vector<const TetMesh*> subs;
  int ncontains = 0, nfree = 0;
  bool connected = true;
  for (const auto& b : P.blocks) {
    Vec vi = restrict_edges(b.sub, v);
    if (b.kind == BlockKind::Contains) {
      parts.push_back(dispatch_single(b.sub, vi, b.trace, true));
      ++ncontains;
    } else {
      parts.push_back(loop_block(b, vi, a));
      nfree += b.kind == BlockKind::Free;
    }
    connected = connected && b.trace.J() <= 1;
    subs.push_back(&b.sub);
  }
  Mask shared(m.nv(), 0);
  shared[P.v0] = 1;
  auto s = assemble_blocks(m, v, trace, subs, parts, shared);
  const int nb = static_cast<int>(P.blocks.size());
  bool faces_only = trace.coarse_edges.empty() && trace.coarse_vertices.empty();
  if (ncontains == nb) {
    s.path = "vertex_junction/vertex_in_gamma";
    s.claim = faces_only ? Claim::SemiNolog : Claim::SemiLog;
    s.pclaim = faces_only ? PClaim::L2 : PClaim::Full;
  } else if (nfree == nb) {
    s.path = "vertex_junction/free";
    s.claim = Claim::SemiLog;
    s.pclaim = PClaim::Seminorm;
  } else {
    s.path = "vertex_junction/gated";
    s.claim = connected ? Claim::SemiLog : Claim::FullLog;
    s.pclaim = nfree > 0 ? PClaim::Seminorm : PClaim::Full;
  }
  s.ratios = measure(m, v, s);
  out.split = std::move(s);
  return out;
}

Vec junction_perturbation(const TetMesh& m, const TraceSet& t, double delta) {
  auto P = plan_junction(m, Vec::Zero(m.ne()), t);
  const BlockPlan* last = nullptr;
  for (const auto& b : P.blocks)
    if (b.kind == BlockKind::Gated) last = &b;
  if (!last) throw PreconditionError("no gated block at the junction vertex");
  Vec out = Vec::Zero(m.ne());
  for (int e = 0; e < last->sub.ne(); ++e) {
    const auto& ed = last->sub.edges[e];
    if (ed[0] != last->v0 && ed[1] != last->v0) continue;
    int ge = last->sub.parent_edge[e];
    out[ge] = m.edges[ge][1] == P.v0 ? delta : -delta;
  }
  return out;
}

namespace detail {

Vec make_junction_compatible(const TetMesh& m, const Vec& v, const TraceSet& t) {
  const auto& cat = mesh::catalog(m.geometry);
  bool vertex = !cat.lipschitz &&
                std::any_of(cat.junctions.begin(), cat.junctions.end(),
                            [](const auto& j) { return j.kind == mesh::JunctionKind::Vertex; });
  if (!vertex) return v;
  auto P = plan_junction(m, v, t);
  const double a = target_value(P);
  Vec out = v;
  for (const auto& b : P.blocks) {
    if (b.kind != BlockKind::Gated) continue;
    const double delta = a - b.value;
    // delta times the gradient of the hat function of v0, on this block only
    for (int e = 0; e < b.sub.ne(); ++e) {
      const auto& ed = b.sub.edges[e];
      if (ed[0] != b.v0 && ed[1] != b.v0) continue;
      int ge = b.sub.parent_edge[e];
      out[ge] += m.edges[ge][1] == P.v0 ? delta : -delta;
    }
  }
  return out;
}

}  // namespace detail
}  // namespace helmdec::dec
