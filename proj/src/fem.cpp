// Copyright (c) 2026 helmdec contributors
// SPDX-License-Identifier: Apache-2.0

#include "helmdec/fem.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <ostream>

namespace helmdec::fem {
namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

SpMat from_triplets(Eigen::Index r, Eigen::Index c, Triplets& t) {
  SpMat A(r, c);
  A.setFromTriplets(t.begin(), t.end());
  A.makeCompressed();
  return A;
}

inline double lam_mass(int a, int b, double vol) { return vol * (a == b ? 2.0 : 1.0) / 20.0; }

// Local Whitney mass between local edges k and l.
double whitney_mass(const TetGeometry& g, int k, int l) {
  const int i = mesh::kLocalEdges[k][0], j = mesh::kLocalEdges[k][1];
  const int m = mesh::kLocalEdges[l][0], n = mesh::kLocalEdges[l][1];
  const auto& d = g.grad;
  return lam_mass(i, m, g.vol) * d[j].dot(d[n]) - lam_mass(i, n, g.vol) * d[j].dot(d[m]) -
         lam_mass(j, m, g.vol) * d[i].dot(d[n]) + lam_mass(j, n, g.vol) * d[i].dot(d[m]);
}

Vec3 whitney_curl(const TetGeometry& g, int k) {
  return 2.0 * g.grad[mesh::kLocalEdges[k][0]].cross(g.grad[mesh::kLocalEdges[k][1]]);
}

SpMat kron3(const SpMat& A) {
  Triplets t;
  t.reserve(A.nonZeros() * 3);
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it)
      for (int c = 0; c < 3; ++c) t.emplace_back(3 * it.row() + c, 3 * it.col() + c, it.value());
  return from_triplets(3 * A.rows(), 3 * A.cols(), t);
}

double qform(const SpMat& A, const Vec& x) { return std::max(0.0, x.dot(A * x)); }

}  // namespace

TetGeometry tet_geometry(const TetMesh& m, int t) {
  const auto& q = m.tets[t];
  Eigen::Matrix3d J;
  for (int k = 0; k < 3; ++k) J.col(k) = m.verts[q[k + 1]] - m.verts[q[0]];
  TetGeometry g;
  g.vol = J.determinant() / 6.0;
  Eigen::Matrix3d Ji = J.inverse();
  for (int k = 0; k < 3; ++k) g.grad[k + 1] = Ji.row(k).transpose();
  g.grad[0] = -(g.grad[1] + g.grad[2] + g.grad[3]);
  return g;
}

Vec3 tet_curl(const TetMesh& m, const TetGeometry& g, int t, const Vec& v) {
  Vec3 c = Vec3::Zero();
  for (int k = 0; k < 6; ++k) c += edge_sign(m, t, k) * v[m.tet_edges[t][k]] * whitney_curl(g, k);
  return c;
}

Vec3 whitney_eval(const TetMesh& m, const TetGeometry& g, int t, const Vec& v,
                  const std::array<double, 4>& lam) {
  Vec3 out = Vec3::Zero();
  for (int k = 0; k < 6; ++k) {
    const int i = mesh::kLocalEdges[k][0], j = mesh::kLocalEdges[k][1];
    out += edge_sign(m, t, k) * v[m.tet_edges[t][k]] * (lam[i] * g.grad[j] - lam[j] * g.grad[i]);
  }
  return out;
}

SparseOperator gradient_map(const TetMesh& m) {
  Triplets t;
  t.reserve(2 * m.ne());
  for (int e = 0; e < m.ne(); ++e) {
    t.emplace_back(e, m.edges[e][0], -1.0);
    t.emplace_back(e, m.edges[e][1], 1.0);
  }
  return {from_triplets(m.ne(), m.nv(), t), false};
}

SparseOperator curl_map(const TetMesh& m) {
  Triplets t;
  t.reserve(3 * m.nf());
  for (int f = 0; f < m.nf(); ++f) {
    const auto& v = m.faces[f];
    t.emplace_back(f, m.find_edge(v[0], v[1]), 1.0);
    t.emplace_back(f, m.find_edge(v[1], v[2]), 1.0);
    t.emplace_back(f, m.find_edge(v[0], v[2]), -1.0);
  }
  return {from_triplets(m.nf(), m.ne(), t), false};
}

SparseOperator assemble(const TetMesh& m, Space space, Kind kind) {
  Triplets t;
  if (space == Space::Z || space == Space::Z3) {
    t.reserve(16 * m.nt());
    for (int e = 0; e < m.nt(); ++e) {
      TetGeometry g = tet_geometry(m, e);
      const auto& q = m.tets[e];
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
          double val = kind == Kind::Mass ? lam_mass(i, j, g.vol) : g.vol * g.grad[i].dot(g.grad[j]);
          t.emplace_back(q[i], q[j], val);
        }
    }
    SpMat A = from_triplets(m.nv(), m.nv(), t);
    return {space == Space::Z ? A : kron3(A), true};
  }
  if (space == Space::V) {
    t.reserve(36 * m.nt());
    for (int e = 0; e < m.nt(); ++e) {
      TetGeometry g = tet_geometry(m, e);
      Vec3 c[6];
      for (int k = 0; k < 6; ++k) c[k] = whitney_curl(g, k);
      for (int k = 0; k < 6; ++k)
        for (int l = 0; l < 6; ++l) {
          double s = edge_sign(m, e, k) * edge_sign(m, e, l);
          double val = kind == Kind::Mass ? whitney_mass(g, k, l) : g.vol * c[k].dot(c[l]);
          t.emplace_back(m.tet_edges[e][k], m.tet_edges[e][l], s * val);
        }
    }
    return {from_triplets(m.ne(), m.ne(), t), true};
  }
  // lowest-order Raviart-Thomas: phi_i = sigma_i (x - x_i) / (3 vol) on the face opposite i
  if (kind == Kind::Stiffness) {
    // div-div form: div phi_i = sigma_i / vol
    t.reserve(16 * m.nt());
    for (int e = 0; e < m.nt(); ++e) {
      TetGeometry g = tet_geometry(m, e);
      const auto& q = m.tets[e];
      double sig[4];
      for (int i = 0; i < 4; ++i) {
        const auto& fv = m.faces[m.tet_faces[e][i]];
        Vec3 n = (m.verts[fv[1]] - m.verts[fv[0]]).cross(m.verts[fv[2]] - m.verts[fv[0]]);
        sig[i] = n.dot(m.verts[fv[0]] - m.verts[q[i]]) > 0 ? 1.0 : -1.0;
      }
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
          t.emplace_back(m.tet_faces[e][i], m.tet_faces[e][j], sig[i] * sig[j] / g.vol);
    }
    return {from_triplets(m.nf(), m.nf(), t), true};
  }
  t.reserve(16 * m.nt());
  for (int e = 0; e < m.nt(); ++e) {
    TetGeometry g = tet_geometry(m, e);
    const auto& q = m.tets[e];
    double sig[4];
    for (int i = 0; i < 4; ++i) {
      const auto& fv = m.faces[m.tet_faces[e][i]];
      Vec3 n = (m.verts[fv[1]] - m.verts[fv[0]]).cross(m.verts[fv[2]] - m.verts[fv[0]]);
      sig[i] = n.dot(m.verts[fv[0]] - m.verts[q[i]]) > 0 ? 1.0 : -1.0;
    }
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        double s = 0;
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b)
            s += (m.verts[q[a]] - m.verts[q[i]]).dot(m.verts[q[b]] - m.verts[q[j]]) *
                 lam_mass(a, b, g.vol);
        t.emplace_back(m.tet_faces[e][i], m.tet_faces[e][j],
                       sig[i] * sig[j] * s / (9.0 * g.vol * g.vol));
      }
  }
  return {from_triplets(m.nf(), m.nf(), t), true};
}

SparseOperator rh_map(const TetMesh& m) {
  Triplets t;
  t.reserve(6 * m.ne());
  for (int e = 0; e < m.ne(); ++e) {
    int a = m.edges[e][0], b = m.edges[e][1];
    Vec3 d = m.verts[b] - m.verts[a];
    for (int c = 0; c < 3; ++c) {
      t.emplace_back(e, 3 * a + c, 0.5 * d[c]);
      t.emplace_back(e, 3 * b + c, 0.5 * d[c]);
    }
  }
  return {from_triplets(m.ne(), 3 * m.nv(), t), false};
}

SparseOperator curl_pairing(const TetMesh& m) {
  Triplets t;
  t.reserve(72 * m.nt());
  for (int e = 0; e < m.nt(); ++e) {
    TetGeometry g = tet_geometry(m, e);
    Vec3 c[6];
    for (int k = 0; k < 6; ++k) c[k] = edge_sign(m, e, k) * whitney_curl(g, k);
    for (int a = 0; a < 4; ++a)
      for (int comp = 0; comp < 3; ++comp) {
        Vec3 cb = g.grad[a].cross(Vec3::Unit(comp));
        for (int k = 0; k < 6; ++k)
          t.emplace_back(3 * m.tets[e][a] + comp, m.tet_edges[e][k], g.vol * cb.dot(c[k]));
      }
  }
  return {from_triplets(3 * m.nv(), m.ne(), t), false};
}

std::shared_ptr<const Operators> operators(const TetMesh& m) {
  static std::mutex mu;
  static std::map<std::uint64_t, std::shared_ptr<const Operators>> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(m.uid);
    if (it != cache.end()) return it->second;
  }
  auto ops = std::make_shared<Operators>();
  ops->G = gradient_map(m).A;
  ops->C = curl_map(m).A;
  ops->Mz = assemble(m, Space::Z, Kind::Mass).A;
  ops->Kz = assemble(m, Space::Z, Kind::Stiffness).A;
  ops->Mv = assemble(m, Space::V, Kind::Mass).A;
  ops->Kv = assemble(m, Space::V, Kind::Stiffness).A;
  ops->Mw = assemble(m, Space::W, Kind::Mass).A;
  ops->Rh = rh_map(m).A;
  ops->Bc = curl_pairing(m).A;
  for (int t = 0; t < m.nt(); ++t) ops->volume += tet_geometry(m, t).vol;
  std::lock_guard<std::mutex> lock(mu);
  if (cache.size() > 256) cache.clear();
  auto [it, inserted] = cache.emplace(m.uid, ops);
  return it->second;
}

double norm(const TetMesh& m, const Vec& f, FieldKind fk, NormKind nk) {
  auto ops = operators(m);
  auto need = [&](Eigen::Index n) {
    if (f.size() != n) throw PreconditionError("field length does not match the mesh");
  };
  switch (fk) {
    case FieldKind::Nodal:
      need(m.nv());
      if (nk == NormKind::L2) return std::sqrt(qform(ops->Mz, f));
      if (nk == NormKind::H1) return std::sqrt(qform(ops->Mz, f) + qform(ops->Kz, f));
      break;
    case FieldKind::NodalVector: {
      need(3 * m.nv());
      if (nk != NormKind::L2 && nk != NormKind::H1) break;
      double s = 0;
      for (int c = 0; c < 3; ++c) {
        Vec fc = component(f, c);
        s += qform(ops->Mz, fc) + (nk == NormKind::H1 ? qform(ops->Kz, fc) : 0.0);
      }
      return std::sqrt(s);
    }
    case FieldKind::Edge:
      need(m.ne());
      if (nk == NormKind::L2) return std::sqrt(qform(ops->Mv, f));
      if (nk == NormKind::CurlSemi) return std::sqrt(qform(ops->Kv, f));
      if (nk == NormKind::Curl) return std::sqrt(qform(ops->Kv, f) + qform(ops->Mv, f));
      break;
    case FieldKind::Face:
      need(m.nf());
      if (nk == NormKind::L2) return std::sqrt(qform(ops->Mw, f));
      break;
  }
  throw PreconditionError("norm kind not defined for this field kind");
}

Vec restrict_zero(const TetMesh& m, const Vec& f, FieldKind fk, const TraceSet& tr) {
  Vec out = f;
  if (tr.empty()) return out;
  switch (fk) {
    case FieldKind::Nodal:
      for (int v = 0; v < m.nv(); ++v)
        if (tr.nodes[v]) out[v] = 0.0;
      break;
    case FieldKind::NodalVector:
      for (int v = 0; v < m.nv(); ++v)
        if (tr.nodes[v]) out.segment<3>(3 * v).setZero();
      break;
    case FieldKind::Edge:
      for (int e = 0; e < m.ne(); ++e)
        if (tr.edges[e]) out[e] = 0.0;
      break;
    case FieldKind::Face:
      for (int k = 0; k < m.nf(); ++k)
        if (tr.faces[k]) out[k] = 0.0;
      break;
  }
  return out;
}

ScalarPoisson::ScalarPoisson(const TetMesh& m, const Mask& dirichlet) : ops_(operators(m)), dir_(dirichlet) {
  if (dir_.empty()) dir_.assign(m.nv(), 0);
  if (count(dir_) == 0) {
    dir_[0] = 1;
    gauged_ = true;
  }
  index_.assign(m.nv(), -1);
  for (int v = 0; v < m.nv(); ++v)
    if (!dir_[v]) {
      index_[v] = static_cast<int>(free_.size());
      free_.push_back(v);
    }
  Triplets tff, tfd;
  const SpMat& K = ops_->Kz;
  for (int k = 0; k < K.outerSize(); ++k)
    for (SpMat::InnerIterator it(K, k); it; ++it) {
      int r = static_cast<int>(it.row()), c = static_cast<int>(it.col());
      if (dir_[r]) continue;
      if (dir_[c])
        tfd.emplace_back(index_[r], c, it.value());
      else
        tff.emplace_back(index_[r], index_[c], it.value());
    }
  const auto nf = static_cast<Eigen::Index>(free_.size());
  SpMat Kff = from_triplets(nf, nf, tff);
  Kfd_ = from_triplets(nf, m.nv(), tfd);
  if (nf > 0) {
    ldlt_.compute(Kff);
    if (ldlt_.info() != Eigen::Success) throw std::runtime_error("Poisson factorization failed");
  }
}

Vec ScalarPoisson::solve(const Vec& rhs, const Vec* bc) const {
  const auto n = static_cast<Eigen::Index>(dir_.size());
  Vec u = Vec::Zero(n);
  if (bc && !gauged_)
    for (Eigen::Index v = 0; v < n; ++v)
      if (dir_[v]) u[v] = (*bc)[v];
  if (!free_.empty()) {
    Vec f(free_.size());
    for (std::size_t i = 0; i < free_.size(); ++i) f[i] = rhs[free_[i]];
    if (bc && !gauged_) f -= Kfd_ * u;
    Vec x = ldlt_.solve(f);
    for (std::size_t i = 0; i < free_.size(); ++i) u[free_[i]] = x[i];
  }
  if (gauged_) {
    double mean = (ops_->Mz * u).sum() / ops_->volume;
    u.array() -= mean;
  }
  return u;
}

std::shared_ptr<const ScalarPoisson> scalar_poisson(const TetMesh& m, const Mask& dirichlet) {
  static std::mutex mu;
  static std::map<std::pair<std::uint64_t, std::uint64_t>, std::shared_ptr<const ScalarPoisson>> cache;
  auto key = std::make_pair(m.uid, hash_mask(dirichlet) ^ (dirichlet.size() * 0x9e3779b97f4a7c15ull));
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto solver = std::make_shared<const ScalarPoisson>(m, dirichlet);
  std::lock_guard<std::mutex> lock(mu);
  if (cache.size() > 512) cache.clear();
  auto [it, inserted] = cache.emplace(key, solver);
  return it->second;
}

Vec component(const Vec& w, int c) {
  Vec s(w.size() / 3);
  for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = w[3 * i + c];
  return s;
}

void set_component(Vec& w, int c, const Vec& s) {
  for (Eigen::Index i = 0; i < s.size(); ++i) w[3 * i + c] = s[i];
}

void write_operator(std::ostream& os, const SpMat& A) {
  std::vector<std::tuple<Eigen::Index, Eigen::Index, double>> e;
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it) e.emplace_back(it.row(), it.col(), it.value());
  std::sort(e.begin(), e.end());
  os << A.rows() << " " << A.cols() << " " << e.size() << "\n";
  for (auto& [r, c, v] : e) os << r << " " << c << " " << mesh::format_exact(v) << "\n";
}

void write_field(std::ostream& os, const Vec& f) {
  for (Eigen::Index i = 0; i < f.size(); ++i) os << i << " " << mesh::format_exact(f[i]) << "\n";
}

}  // namespace helmdec::fem
