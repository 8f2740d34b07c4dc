// Copyright (c) 2026 helmdec contributors
// SPDX-License-Identifier: Apache-2.0

#include "helmdec/operators.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <mutex>

namespace helmdec::ops {
namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

// Outward unit normal of a boundary face (away from its tet); the global
// normal for interior faces.
Vec3 face_normal_out(const TetMesh& m, int f) {
  const auto& fv = m.faces[f];
  Vec3 n = (m.verts[fv[1]] - m.verts[fv[0]]).cross(m.verts[fv[2]] - m.verts[fv[0]]);
  if (m.face_tets[f][1] < 0) {
    int t = m.face_tets[f][0];
    for (int i = 0; i < 4; ++i)
      if (m.tet_faces[t][i] == f && n.dot(m.verts[fv[0]] - m.verts[m.tets[t][i]]) < 0) n = -n;
  }
  return n.normalized();
}

struct CurlHarmonicSolver {
  std::vector<int> interior_edges, interior_nodes;
  std::vector<int> edge_index;  // interior-edge position or -1
  SpMat K_IB, M_IB, G_NIt;      // G_NIt = G_NI^T
  Eigen::SparseLU<SpMat> lu;
};

std::shared_ptr<const CurlHarmonicSolver> curl_harmonic_solver(const TetMesh& m) {
  static std::mutex mu;
  static std::map<std::uint64_t, std::shared_ptr<const CurlHarmonicSolver>> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(m.uid);
    if (it != cache.end()) return it->second;
  }
  auto ops = fem::operators(m);
  auto s = std::make_shared<CurlHarmonicSolver>();
  s->edge_index.assign(m.ne(), -1);
  std::vector<int> bidx(m.ne(), -1), nidx(m.nv(), -1);
  int nb = 0;
  for (int e = 0; e < m.ne(); ++e) {
    if (m.boundary_edge[e]) {
      bidx[e] = nb++;
    } else {
      s->edge_index[e] = static_cast<int>(s->interior_edges.size());
      s->interior_edges.push_back(e);
    }
  }
  for (int v = 0; v < m.nv(); ++v)
    if (!m.boundary_vert[v]) {
      nidx[v] = static_cast<int>(s->interior_nodes.size());
      s->interior_nodes.push_back(v);
    }
  const auto nI = static_cast<Eigen::Index>(s->interior_edges.size());
  const auto nN = static_cast<Eigen::Index>(s->interior_nodes.size());
  auto split = [&](const SpMat& A, SpMat& AII, SpMat& AIB) {
    Triplets tii, tib;
    for (int k = 0; k < A.outerSize(); ++k)
      for (SpMat::InnerIterator it(A, k); it; ++it) {
        int r = s->edge_index[it.row()];
        if (r < 0) continue;
        int c = s->edge_index[it.col()];
        if (c >= 0)
          tii.emplace_back(r, c, it.value());
        else
          tib.emplace_back(r, bidx[it.col()], it.value());
      }
    AII.resize(nI, nI);
    AII.setFromTriplets(tii.begin(), tii.end());
    AIB.resize(nI, nb);
    AIB.setFromTriplets(tib.begin(), tib.end());
  };
  SpMat K_II, M_II;
  split(ops->Kv, K_II, s->K_IB);
  split(ops->Mv, M_II, s->M_IB);
  Triplets tg;
  for (int k = 0; k < ops->G.outerSize(); ++k)
    for (SpMat::InnerIterator it(ops->G, k); it; ++it) {
      int r = s->edge_index[it.row()], c = nidx[it.col()];
      if (r >= 0 && c >= 0) tg.emplace_back(r, c, it.value());
    }
  SpMat G_NI(nI, nN);
  G_NI.setFromTriplets(tg.begin(), tg.end());
  SpMat MG = M_II * G_NI;
  s->G_NIt = SpMat(G_NI.transpose());
  Triplets ts;
  for (int k = 0; k < K_II.outerSize(); ++k)
    for (SpMat::InnerIterator it(K_II, k); it; ++it) ts.emplace_back(it.row(), it.col(), it.value());
  for (int k = 0; k < MG.outerSize(); ++k)
    for (SpMat::InnerIterator it(MG, k); it; ++it) {
      ts.emplace_back(it.row(), nI + it.col(), it.value());
      ts.emplace_back(nI + it.col(), it.row(), it.value());
    }
  SpMat S(nI + nN, nI + nN);
  S.setFromTriplets(ts.begin(), ts.end());
  S.makeCompressed();
  if (nI + nN > 0) {
    s->lu.analyzePattern(S);
    s->lu.factorize(S);
    if (s->lu.info() != Eigen::Success) throw std::runtime_error("curl-harmonic factorization failed");
  }
  std::lock_guard<std::mutex> lock(mu);
  if (cache.size() > 64) cache.clear();
  auto [it, inserted] = cache.emplace(m.uid, s);
  return it->second;
}

}  // namespace

Vec edge_interpolate_rh(const TetMesh& m, const Vec& w) { return fem::operators(m)->Rh * w; }

TetSamples samples_of_nodal(const TetMesh& m, const Vec& w) {
  TetSamples s(m.nt());
  for (int t = 0; t < m.nt(); ++t)
    for (int i = 0; i < 4; ++i) s[t][i] = w.segment<3>(3 * m.tets[t][i]);
  return s;
}

Vec scott_zhang(const TetMesh& m, const TetSamples& f, const Mask& gnodes, const Mask& gedges,
                const Mask& gfaces) {
  // On data that is linear on the selected simplex the L2 dual-basis average
  // equals the vertex value of that simplex's trace, so the selection rule is
  // all that has to be carried out.
  const int nv = m.nv();
  std::vector<int> tet_of(nv, -1), local_of(nv, -1);
  for (int t = 0; t < m.nt(); ++t)
    for (int i = 0; i < 4; ++i)
      if (tet_of[m.tets[t][i]] < 0) {
        tet_of[m.tets[t][i]] = t;
        local_of[m.tets[t][i]] = i;
      }
  auto value_from_tet = [&](int t, int v) -> Vec3 {
    for (int i = 0; i < 4; ++i)
      if (m.tets[t][i] == v) return f[t][i];
    throw std::logic_error("vertex not in tet");
  };
  std::vector<int> gface_of(nv, -1), gedge_of(nv, -1);
  if (!gfaces.empty())
    for (int k = 0; k < m.nf(); ++k)
      if (gfaces[k])
        for (int v : m.faces[k])
          if (gface_of[v] < 0) gface_of[v] = k;
  if (!gedges.empty())
    for (int e = 0; e < m.ne(); ++e)
      if (gedges[e])
        for (int v : m.edges[e])
          if (gedge_of[v] < 0) gedge_of[v] = e;
  Vec out = Vec::Zero(3 * nv);
  for (int v = 0; v < nv; ++v) {
    bool on_gamma = !gnodes.empty() && gnodes[v];
    Vec3 val;
    if (on_gamma) {
      if (gface_of[v] >= 0)
        val = value_from_tet(m.face_tets[gface_of[v]][0], v);
      else if (gedge_of[v] >= 0)
        val = value_from_tet(m.edge_tet_idx[m.edge_tet_ptr[gedge_of[v]]], v);
      else
        val = f[tet_of[v]][local_of[v]];
      val.setZero();  // zero trace preserved exactly
    } else {
      val = f[tet_of[v]][local_of[v]];
    }
    out.segment<3>(3 * v) = val;
  }
  return out;
}

Vec scott_zhang(const TetMesh& m, const Vec& w, const Mask& gnodes, const Mask& gedges,
                const Mask& gfaces) {
  return scott_zhang(m, samples_of_nodal(m, w), gnodes, gedges, gfaces);
}

Mask face_interior_nodes(const TetMesh& m, const CoarseEntity& F) {
  Mask in = mesh::entity_nodes(m, F);
  const std::size_t k = F.pts.size();
  for (int v = 0; v < m.nv(); ++v) {
    if (!in[v]) continue;
    for (std::size_t i = 0; i < k; ++i) {
      Vec3 a = F.pts[i], d = F.pts[(i + 1) % k] - a;
      double s = std::clamp((m.verts[v] - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
      if ((a + s * d - m.verts[v]).norm() <= 1e-12) in[v] = 0;
    }
  }
  return in;
}

Mask block_boundary_nodes(const TetMesh& m, int block) {
  const auto& c = mesh::catalog(m.geometry);
  Mask out(m.nv(), 0);
  for (const auto& e : c.entities)
    if (e.block == block && e.dim == 2) out = mask_or(out, mesh::entity_nodes(m, e));
  return out;
}

Vec face_cutoff(const TetMesh& m, const CoarseEntity& F, int block, int layers) {
  if (F.block != block) throw PreconditionError("face '" + F.name + "' does not belong to the block");
  Mask inside = mesh::nodes_of_tets(m, {block});
  Mask bnd = block_boundary_nodes(m, block);
  Mask fint = face_interior_nodes(m, F);
  std::vector<int> hop(m.nv(), -1);
  std::deque<int> q;
  for (int v = 0; v < m.nv(); ++v)
    if (fint[v]) {
      hop[v] = 0;
      q.push_back(v);
    }
  while (!q.empty()) {
    int v = q.front();
    q.pop_front();
    for (int k = m.vert_edge_ptr[v]; k < m.vert_edge_ptr[v + 1]; ++k) {
      int e = m.vert_edge_idx[k];
      int u = m.edges[e][0] == v ? m.edges[e][1] : m.edges[e][0];
      if (!inside[u] || hop[u] >= 0) continue;
      hop[u] = hop[v] + 1;
      q.push_back(u);
    }
  }
  Vec theta = Vec::Zero(m.nv());
  for (int v = 0; v < m.nv(); ++v) {
    if (fint[v])
      theta[v] = 1.0;
    else if (inside[v] && !bnd[v] && hop[v] > 0)
      theta[v] = std::max(0.0, 1.0 - static_cast<double>(hop[v]) / layers);
  }
  return theta;
}

Vec harmonic_extend(const TetMesh& m, const Mask& dirichlet, const Vec& data) {
  if (count(dirichlet) == 0) throw PreconditionError("harmonic extension needs Dirichlet nodes");
  return fem::scalar_poisson(m, dirichlet)->solve(Vec::Zero(m.nv()), &data);
}

Vec curl_harmonic_extend(const TetMesh& m, const Vec& data) {
  if (data.size() != m.ne()) throw PreconditionError("curl-harmonic data length mismatch");
  auto s = curl_harmonic_solver(m);
  const auto nI = static_cast<Eigen::Index>(s->interior_edges.size());
  const auto nN = static_cast<Eigen::Index>(s->interior_nodes.size());
  Vec gB(s->K_IB.cols());
  Vec out = Vec::Zero(m.ne());
  for (int e = 0, b = 0; e < m.ne(); ++e)
    if (m.boundary_edge[e]) {
      gB[b++] = data[e];
      out[e] = data[e];
    }
  if (nI + nN == 0 || gB.cwiseAbs().maxCoeff() == 0.0) return out;
  Vec rhs(nI + nN);
  rhs.head(nI) = -(s->K_IB * gB);
  rhs.tail(nN) = -(s->G_NIt * (s->M_IB * gB));
  Vec x = s->lu.solve(rhs);
  for (Eigen::Index i = 0; i < nI; ++i) out[s->interior_edges[i]] = x[i];
  return out;
}

int BoundaryLoop::position(int node) const {
  for (int k = 0; k < static_cast<int>(nodes.size()); ++k)
    if (nodes[k] == node) return k;
  return -1;
}

BoundaryLoop make_loop(const TetMesh& m, const Mask& face_mask, int start) {
  struct Half {
    int edge, other, third;
    Vec3 n;
  };
  std::map<int, int> edge_count;
  std::map<int, std::pair<int, int>> edge_face;  // edge -> (face, third vertex)
  for (int f = 0; f < m.nf(); ++f) {
    if (!face_mask[f]) continue;
    const auto& fv = m.faces[f];
    for (int i = 0; i < 3; ++i) {
      int a = fv[i], b = fv[(i + 1) % 3], c = fv[(i + 2) % 3];
      int e = m.find_edge(a, b);
      ++edge_count[e];
      edge_face[e] = {f, c};
    }
  }
  std::map<int, std::vector<Half>> at;
  for (auto& [e, cnt] : edge_count) {
    if (cnt != 1) continue;
    auto [f, c] = edge_face[e];
    Vec3 n = face_normal_out(m, f);
    int a = m.edges[e][0], b = m.edges[e][1];
    at[a].push_back({e, b, c, n});
    at[b].push_back({e, a, c, n});
  }
  if (at.empty()) throw PreconditionError("face union has no boundary loop");
  for (auto& [v, hs] : at)
    if (hs.size() != 2) throw PreconditionError("face union boundary is not a simple loop");
  if (start < 0) start = at.begin()->first;
  if (!at.count(start)) throw PreconditionError("loop start is not on the face boundary");
  BoundaryLoop L;
  L.face_mask = face_mask;
  Vec3 nsum = Vec3::Zero();
  for (int f = 0; f < m.nf(); ++f)
    if (face_mask[f]) nsum += face_normal_out(m, f);
  L.normal = nsum.normalized();
  // first step keeps the enclosed triangle on the left
  int cur = start, prev_edge = -1;
  {
    const auto& hs = at[start];
    const Half* pick = nullptr;
    for (const auto& h : hs) {
      Vec3 a = m.verts[start], b = m.verts[h.other], c = m.verts[h.third];
      if ((b - a).cross(c - a).dot(h.n) > 0) pick = &h;
    }
    if (!pick) throw PreconditionError("cannot orient face boundary loop");
    L.nodes.push_back(start);
    L.edges.push_back(pick->edge);
    prev_edge = pick->edge;
    cur = pick->other;
  }
  while (cur != start) {
    L.nodes.push_back(cur);
    const auto& hs = at[cur];
    const Half& nxt = hs[0].edge == prev_edge ? hs[1] : hs[0];
    L.edges.push_back(nxt.edge);
    prev_edge = nxt.edge;
    cur = nxt.other;
    if (L.nodes.size() > at.size()) throw PreconditionError("face boundary loop does not close");
  }
  if (L.nodes.size() != at.size()) throw PreconditionError("face union boundary has several loops");
  const int n = L.size();
  L.signs.resize(n);
  L.t.resize(n);
  L.len.resize(n);
  double s = 0;
  for (int k = 0; k < n; ++k) {
    L.signs[k] = m.edges[L.edges[k]][0] == L.nodes[k] ? 1 : -1;
    L.t[k] = s;
    L.len[k] = m.edge_length(L.edges[k]);
    s += L.len[k];
  }
  L.length = s;
  return L;
}

BoundaryLoop make_loop(const TetMesh& m, const CoarseEntity& F, int start) {
  if (F.dim != 2) throw PreconditionError("loop needs a face");
  return make_loop(m, mesh::faces_in(m, mesh::entity_nodes(m, F)), start);
}

LoopDecomposition loop_decompose(const BoundaryLoop& L, const Vec& v, const std::vector<char>& excl,
                                 const std::vector<char>& zmean) {
  const int n = L.size();
  if (n < 3 || L.nodes.size() != L.edges.size()) throw PreconditionError("loop not closed");
  auto is_ex = [&](int k) { return !excl.empty() && excl[k]; };
  int nex = 0;
  for (int k = 0; k < n; ++k) nex += is_ex(k);
  if (nex > 0)
    for (int k = 0; k < n; ++k)
      if (is_ex(k) != (k >= n - nex))
        throw PreconditionError("excluded loop edges must end at the loop start");
  LoopDecomposition d;
  double sum = 0, lc = 0;
  for (int k = 0; k < n; ++k) {
    if (is_ex(k)) continue;
    sum += L.signs[k] * v[L.edges[k]];
    lc += L.len[k];
  }
  d.C = sum / lc;
  d.constrained_length = lc;
  d.phi.assign(n, 0.0);
  for (int k = 0; k + 1 < n; ++k)
    d.phi[k + 1] = is_ex(k) ? 0.0 : d.phi[k] + L.signs[k] * v[L.edges[k]] - d.C * L.len[k];
  if (nex > 0)
    for (int k = n - nex; k < n; ++k) d.phi[k] = 0.0;
  if (!zmean.empty()) {
    double num = 0, den = 0;
    for (int k = 0; k < n; ++k)
      if (zmean[k]) {
        num += L.len[k] * 0.5 * (d.phi[k] + d.phi[(k + 1) % n]);
        den += L.len[k];
      }
    if (den > 0) {
      double mean = num / den;
      for (double& p : d.phi) p -= mean;
    }
  }
  d.c_shift = d.phi[0];
  return d;
}

double loop_flux(const TetMesh& m, const BoundaryLoop& L, const Vec& v) {
  auto ops = fem::operators(m);
  Vec cv = ops->C * v;
  double flux = 0;
  for (int f = 0; f < m.nf(); ++f) {
    if (!L.face_mask[f]) continue;
    const auto& fv = m.faces[f];
    Vec3 n = (m.verts[fv[1]] - m.verts[fv[0]]).cross(m.verts[fv[2]] - m.verts[fv[0]]);
    flux += (n.dot(face_normal_out(m, f)) > 0 ? 1.0 : -1.0) * cv[f];
  }
  return flux;
}

Vec loop_constant_extension(const TetMesh& m, const BoundaryLoop& L, const std::vector<char>& cons,
                            const std::vector<double>& target, const Mask& fixed) {
  const int n = L.size();
  Vec out = Vec::Zero(3 * m.nv());
  bool any = false;
  for (int k = 0; k < n; ++k) any = any || (cons[k] && target[k] != 0.0);
  if (!any) return out;
  std::vector<int> unk(n, -1);
  int nu = 0;
  for (int k = 0; k < n; ++k) {
    if (!cons[k]) continue;
    for (int p : {k, (k + 1) % n})
      if (unk[p] < 0 && !fixed[L.nodes[p]]) unk[p] = nu++;
  }
  int nc = 0;
  for (int k = 0; k < n; ++k) nc += cons[k] ? 1 : 0;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nc, 3 * nu), M = Eigen::MatrixXd::Zero(3 * nu, 3 * nu);
  Vec b(nc);
  int r = 0;
  for (int k = 0; k < n; ++k) {
    if (!cons[k]) continue;
    int pa = k, pb = (k + 1) % n;
    Vec3 d = m.verts[L.nodes[pb]] - m.verts[L.nodes[pa]];
    for (int p : {pa, pb})
      if (unk[p] >= 0) A.block(r, 3 * unk[p], 1, 3) += 0.5 * d.transpose();
    b[r++] = target[k];
    for (int p : {pa, pb})
      for (int q : {pa, pb})
        if (unk[p] >= 0 && unk[q] >= 0)
          M.block(3 * unk[p], 3 * unk[q], 3, 3) +=
              Eigen::Matrix3d::Identity() * L.len[k] * (p == q ? 2.0 : 1.0) / 6.0;
  }
  Vec c = Vec::Zero(3 * nu);
  if (nu > 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    Eigen::MatrixXd Lm = llt.matrixL();
    // minimize |L^T c| subject to A c = b, via y = L^T c
    Eigen::MatrixXd B = Lm.triangularView<Eigen::Lower>().solve(A.transpose()).transpose();
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
    cod.setThreshold(1e-12);
    cod.compute(B);
    Vec y = cod.solve(b);
    c = Lm.transpose().triangularView<Eigen::Upper>().solve(y);
  }
  double res = nc > 0 ? (A * c - b).cwiseAbs().maxCoeff() : 0.0;
  if (res > 1e-10 * std::max(1.0, b.cwiseAbs().maxCoeff()))
    throw PreconditionError("loop constant extension constraints are infeasible");
  for (int k = 0; k < n; ++k)
    if (unk[k] >= 0) out.segment<3>(3 * L.nodes[k]) = c.segment<3>(3 * unk[k]);
  return out;
}

std::vector<double> epsilon_correction(const BoundaryLoop& L, const std::vector<char>& E,
                                       const std::vector<char>& E1, const std::vector<char>& E2,
                                       double C) {
  const int n = L.size();
  double lE = 0, l1 = 0, l2 = 0;
  for (int k = 0; k < n; ++k) {
    if (E[k]) lE += L.len[k];
    if (E1[k]) l1 += L.len[k];
    if (E2[k]) l2 += L.len[k];
  }
  if (lE == 0 || l1 == 0 || l2 == 0) throw PreconditionError("epsilon correction needs E, E1, E2");
  auto touches = [&](const std::vector<char>& X) {
    for (int k = 0; k < n; ++k) {
      if (!X[k]) continue;
      int prev = (k + n - 1) % n, next = (k + 1) % n;
      if (E[prev] || E[next]) return true;
    }
    return false;
  };
  if (!touches(E1) || !touches(E2)) throw PreconditionError("E1 and E2 must be adjacent to E");
  std::vector<double> eps(n, 0.0);
  for (int k = 0; k < n; ++k) {
    if (E[k])
      eps[k] = -C;
    else if (E1[k])
      eps[k] = lE / (2 * l1) * C;
    else if (E2[k])
      eps[k] = lE / (2 * l2) * C;
  }
  return eps;
}

}  // namespace helmdec::ops
