// Copyright (c) 2026 helmdec contributors
// SPDX-License-Identifier: Apache-2.0

#include "helmdec/mesh.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

namespace helmdec::mesh {
namespace {

constexpr double kLattice = 1048576.0;  // 2^20

struct Key {
  long long x, y, z;
  bool operator==(const Key& o) const { return x == o.x && y == o.y && z == o.z; }
};
struct KeyHash {
  std::size_t operator()(const Key& k) const {
    std::uint64_t h = 1469598103934665603ull;
    h = fnv1a(&k.x, sizeof(k.x), h);
    h = fnv1a(&k.y, sizeof(k.y), h);
    return fnv1a(&k.z, sizeof(k.z), h);
  }
};

Key lattice_key(const Vec3& p) {
  return {std::llround(p.x() * kLattice), std::llround(p.y() * kLattice),
          std::llround(p.z() * kLattice)};
}

class VertexPool {
 public:
  explicit VertexPool(std::vector<Vec3>& v) : verts_(v) {
    for (int i = 0; i < static_cast<int>(v.size()); ++i) map_[lattice_key(v[i])] = i;
  }
  int get(const Vec3& p) {
    Key k = lattice_key(p);
    auto it = map_.find(k);
    if (it != map_.end()) return it->second;
    int id = static_cast<int>(verts_.size());
    verts_.push_back(p);
    map_.emplace(k, id);
    return id;
  }

 private:
  std::vector<Vec3>& verts_;
  std::unordered_map<Key, int, KeyHash> map_;
};

double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

// Kuhn path tets of the cube [lo, lo + h]^3, permutations in lexicographic order.
void kuhn_cube(const Vec3& lo, double h, std::vector<std::array<Vec3, 4>>& out) {
  int perm[3] = {0, 1, 2};
  do {
    std::array<Vec3, 4> t;
    t[0] = lo;
    for (int k = 0; k < 3; ++k) {
      t[k + 1] = t[k];
      t[k + 1][perm[k]] += h;
    }
    out.push_back(t);
  } while (std::next_permutation(perm, perm + 3));
}

void finalize_impl(TetMesh& m) {
  const int nv = m.nv();
  m.tets.resize(m.tets_ordered.size());
  for (std::size_t t = 0; t < m.tets_ordered.size(); ++t) {
    auto q = m.tets_ordered[t];
    if (signed_volume(m.verts[q[0]], m.verts[q[1]], m.verts[q[2]], m.verts[q[3]]) < 0)
      std::swap(q[2], q[3]);
    m.tets[t] = q;
  }
  auto ekey = [nv](int a, int b) { return static_cast<std::uint64_t>(a) * nv + b; };

  std::vector<std::array<int, 2>> edges;
  std::vector<std::array<int, 3>> faces;
  edges.reserve(m.tets.size() * 6);
  faces.reserve(m.tets.size() * 4);
  for (const auto& q : m.tets) {
    for (auto& le : kLocalEdges) {
      int a = q[le[0]], b = q[le[1]];
      edges.push_back({std::min(a, b), std::max(a, b)});
    }
    for (int i = 0; i < 4; ++i) {
      std::array<int, 3> f;
      int k = 0;
      for (int j = 0; j < 4; ++j)
        if (j != i) f[k++] = q[j];
      std::sort(f.begin(), f.end());
      faces.push_back(f);
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  std::sort(faces.begin(), faces.end());
  faces.erase(std::unique(faces.begin(), faces.end()), faces.end());
  m.edges = std::move(edges);
  m.faces = std::move(faces);

  std::unordered_map<std::uint64_t, int> emap;
  emap.reserve(m.edges.size() * 2);
  for (int e = 0; e < m.ne(); ++e) emap[ekey(m.edges[e][0], m.edges[e][1])] = e;
  std::unordered_map<std::uint64_t, int> fmap;
  fmap.reserve(m.faces.size() * 2);
  auto fkey = [nv](const std::array<int, 3>& f) {
    return (static_cast<std::uint64_t>(f[0]) * nv + f[1]) * nv + f[2];
  };
  for (int f = 0; f < m.nf(); ++f) fmap[fkey(m.faces[f])] = f;

  m.tet_edges.assign(m.nt(), {});
  m.tet_faces.assign(m.nt(), {});
  m.face_tets.assign(m.nf(), {-1, -1});
  std::vector<int> edge_count(m.ne(), 0);
  for (int t = 0; t < m.nt(); ++t) {
    const auto& q = m.tets[t];
    for (int k = 0; k < 6; ++k) {
      int a = q[kLocalEdges[k][0]], b = q[kLocalEdges[k][1]];
      int e = emap.at(ekey(std::min(a, b), std::max(a, b)));
      m.tet_edges[t][k] = e;
      ++edge_count[e];
    }
    for (int i = 0; i < 4; ++i) {
      std::array<int, 3> f;
      int k = 0;
      for (int j = 0; j < 4; ++j)
        if (j != i) f[k++] = q[j];
      std::sort(f.begin(), f.end());
      int fi = fmap.at(fkey(f));
      m.tet_faces[t][i] = fi;
      auto& ft = m.face_tets[fi];
      if (ft[0] < 0)
        ft[0] = t;
      else if (ft[1] < 0)
        ft[1] = t;
      else
        throw std::logic_error("face shared by more than two tets");
    }
  }
  m.edge_tet_ptr.assign(m.ne() + 1, 0);
  for (int e = 0; e < m.ne(); ++e) m.edge_tet_ptr[e + 1] = m.edge_tet_ptr[e] + edge_count[e];
  m.edge_tet_idx.assign(m.edge_tet_ptr.back(), 0);
  {
    std::vector<int> pos(m.edge_tet_ptr.begin(), m.edge_tet_ptr.end() - 1);
    for (int t = 0; t < m.nt(); ++t)
      for (int k = 0; k < 6; ++k) m.edge_tet_idx[pos[m.tet_edges[t][k]]++] = t;
  }
  m.vert_edge_ptr.assign(nv + 1, 0);
  for (const auto& e : m.edges) {
    ++m.vert_edge_ptr[e[0] + 1];
    ++m.vert_edge_ptr[e[1] + 1];
  }
  for (int v = 0; v < nv; ++v) m.vert_edge_ptr[v + 1] += m.vert_edge_ptr[v];
  m.vert_edge_idx.assign(m.vert_edge_ptr.back(), 0);
  {
    std::vector<int> pos(m.vert_edge_ptr.begin(), m.vert_edge_ptr.end() - 1);
    for (int e = 0; e < m.ne(); ++e) {
      m.vert_edge_idx[pos[m.edges[e][0]]++] = e;
      m.vert_edge_idx[pos[m.edges[e][1]]++] = e;
    }
  }
  m.boundary_face.assign(m.nf(), 0);
  m.boundary_edge.assign(m.ne(), 0);
  m.boundary_vert.assign(nv, 0);
  for (int f = 0; f < m.nf(); ++f) {
    if (m.face_tets[f][1] >= 0) continue;
    m.boundary_face[f] = 1;
    const auto& fv = m.faces[f];
    for (int i = 0; i < 3; ++i) m.boundary_vert[fv[i]] = 1;
    m.boundary_edge[emap.at(ekey(fv[0], fv[1]))] = 1;
    m.boundary_edge[emap.at(ekey(fv[1], fv[2]))] = 1;
    m.boundary_edge[emap.at(ekey(fv[0], fv[2]))] = 1;
  }
  m.h = 0.0;
  m.hmin = 1e300;
  for (int e = 0; e < m.ne(); ++e) {
    double l = m.edge_length(e);
    m.h = std::max(m.h, l);
    m.hmin = std::min(m.hmin, l);
  }
  std::uint64_t h = fnv1a(m.geometry.data(), m.geometry.size());
  h = fnv1a(m.verts.data(), m.verts.size() * sizeof(Vec3), h);
  h = fnv1a(m.tets.data(), m.tets.size() * sizeof(m.tets[0]), h);
  h = fnv1a(m.block_of_tet.data(), m.block_of_tet.size() * sizeof(int), h);
  m.uid = h;
}

TetMesh coarse_mesh(const BlockComplex& c) {
  TetMesh m;
  m.geometry = c.name;
  VertexPool pool(m.verts);
  for (int bi = 0; bi < static_cast<int>(c.blocks.size()); ++bi) {
    const Block& b = c.blocks[bi];
    if (b.shape == BlockShape::Brick) {
      for (const auto& t : kuhn_tets(b.lo, b.hi, 1.0)) {
        m.tets_ordered.push_back({pool.get(t[0]), pool.get(t[1]), pool.get(t[2]), pool.get(t[3])});
        m.block_of_tet.push_back(bi);
      }
    } else {
      int c00 = pool.get(pyramid_base_corner(b, 0, 0));
      int c10 = pool.get(pyramid_base_corner(b, 1, 0));
      int c11 = pool.get(pyramid_base_corner(b, 1, 1));
      int c01 = pool.get(pyramid_base_corner(b, 0, 1));
      int a = pool.get(b.apex);
      m.tets_ordered.push_back({c00, c10, c11, a});
      m.tets_ordered.push_back({c00, c11, c01, a});
      m.block_of_tet.push_back(bi);
      m.block_of_tet.push_back(bi);
    }
  }
  m.level = 0;
  m.nominal_h = 1.0;
  return m;
}

}  // namespace

void finalize_mesh(TetMesh& m) { finalize_impl(m); }

bool inside_block(const Block& b, const Vec3& x, double tol) {
  if (b.shape == BlockShape::Brick) {
    for (int a = 0; a < 3; ++a)
      if (x[a] < b.lo[a] - tol || x[a] > b.hi[a] + tol) return false;
    return true;
  }
  double t = b.dir * (x[b.axis] - b.apex[b.axis]) / b.height;
  if (t < -tol || t > 1 + tol) return false;
  for (int a = 0; a < 3; ++a) {
    if (a == b.axis) continue;
    if (std::abs(x[a] - b.apex[a]) > b.half_width * t + tol) return false;
  }
  return true;
}

int TetMesh::find_edge(int a, int b) const {
  if (a > b) std::swap(a, b);
  for (int k = vert_edge_ptr[a]; k < vert_edge_ptr[a + 1]; ++k) {
    int e = vert_edge_idx[k];
    if (edges[e][0] == a && edges[e][1] == b) return e;
  }
  return -1;
}

std::vector<std::array<Vec3, 4>> kuhn_tets(const Vec3& lo, const Vec3& hi, double h) {
  std::vector<std::array<Vec3, 4>> out;
  int n[3];
  for (int a = 0; a < 3; ++a) n[a] = static_cast<int>(std::lround((hi[a] - lo[a]) / h));
  for (int i = 0; i < n[0]; ++i)
    for (int j = 0; j < n[1]; ++j)
      for (int k = 0; k < n[2]; ++k) kuhn_cube(lo + h * Vec3(i, j, k), h, out);
  return out;
}

TetMesh refine(const TetMesh& src) {
  TetMesh m;
  m.geometry = src.geometry;
  m.level = src.level + 1;
  m.nominal_h = src.nominal_h / 2;
  m.verts = src.verts;
  const int nv = src.nv();
  std::unordered_map<std::uint64_t, int> mid;
  mid.reserve(src.edges.size() * 2);
  auto midpoint = [&](int a, int b) {
    if (a > b) std::swap(a, b);
    std::uint64_t k = static_cast<std::uint64_t>(a) * nv + b;
    auto it = mid.find(k);
    if (it != mid.end()) return it->second;
    int id = static_cast<int>(m.verts.size());
    m.verts.push_back(0.5 * (src.verts[a] + src.verts[b]));
    mid.emplace(k, id);
    return id;
  };
  m.tets_ordered.reserve(src.tets_ordered.size() * 8);
  m.block_of_tet.reserve(src.tets_ordered.size() * 8);
  for (std::size_t t = 0; t < src.tets_ordered.size(); ++t) {
    const auto& q = src.tets_ordered[t];
    int x0 = q[0], x1 = q[1], x2 = q[2], x3 = q[3];
    int x01 = midpoint(x0, x1), x02 = midpoint(x0, x2), x03 = midpoint(x0, x3);
    int x12 = midpoint(x1, x2), x13 = midpoint(x1, x3), x23 = midpoint(x2, x3);
    const std::array<int, 4> kids[8] = {{x0, x01, x02, x03},   {x01, x1, x12, x13},
                                        {x02, x12, x2, x23},   {x03, x13, x23, x3},
                                        {x01, x02, x03, x13},  {x01, x02, x12, x13},
                                        {x02, x03, x13, x23},  {x02, x12, x13, x23}};
    for (const auto& k : kids) {
      m.tets_ordered.push_back(k);
      m.block_of_tet.push_back(src.block_of_tet[t]);
    }
  }
  finalize_impl(m);
  return m;
}

TetMesh build_complex(const std::string& name, double h) {
  const BlockComplex& c = catalog(name);
  if (!(h > 0)) throw PreconditionError("mesh size must be positive");
  double k = std::log2(1.0 / h);
  int level = static_cast<int>(std::lround(k));
  if (std::abs(k - level) > 1e-12 || level < 0 || level > 8)
    throw PreconditionError("mesh size must be 1/2^k with 0 <= k <= 8");
  TetMesh m = coarse_mesh(c);
  finalize_impl(m);
  for (int i = 0; i < level; ++i) m = refine(m);
  return m;
}

TetMesh submesh(const TetMesh& src, const std::vector<int>& blocks) {
  Mask keep_block(*std::max_element(src.block_of_tet.begin(), src.block_of_tet.end()) + 1, 0);
  for (int b : blocks)
    if (b >= 0 && b < static_cast<int>(keep_block.size())) keep_block[b] = 1;
  Mask keep(src.nt(), 0);
  for (int t = 0; t < src.nt(); ++t) keep[t] = keep_block[src.block_of_tet[t]];
  return submesh_tets(src, keep);
}

TetMesh submesh_tets(const TetMesh& src, const Mask& keep) {
  std::vector<int> used(src.nv(), 0);
  for (int t = 0; t < src.nt(); ++t)
    if (keep[t])
      for (int v : src.tets_ordered[t]) used[v] = 1;
  std::vector<int> newid(src.nv(), -1);
  TetMesh m;
  m.geometry = src.geometry;
  m.level = src.level;
  m.nominal_h = src.nominal_h;
  for (int v = 0; v < src.nv(); ++v)
    if (used[v]) {
      newid[v] = static_cast<int>(m.verts.size());
      m.verts.push_back(src.verts[v]);
      m.parent_vert.push_back(v);
    }
  for (int t = 0; t < src.nt(); ++t) {
    if (!keep[t]) continue;
    auto q = src.tets_ordered[t];
    for (int& v : q) v = newid[v];
    m.tets_ordered.push_back(q);
    m.block_of_tet.push_back(src.block_of_tet[t]);
  }
  finalize_impl(m);
  m.parent_edge.resize(m.ne());
  for (int e = 0; e < m.ne(); ++e)
    m.parent_edge[e] = src.find_edge(m.parent_vert[m.edges[e][0]], m.parent_vert[m.edges[e][1]]);
  return m;
}

TetMesh domain_mesh(const TetMesh& full) {
  const BlockComplex& c = catalog(full.geometry);
  if (c.domain_blocks.size() == c.blocks.size()) return full;
  return submesh(full, c.domain_blocks);
}

double quasi_uniformity(const TetMesh& m) { return m.h / m.hmin; }

std::string check_conformity(const TetMesh& m) {
  const BlockComplex& c = catalog(m.geometry);
  for (int t = 0; t < m.nt(); ++t) {
    const auto& q = m.tets[t];
    if (signed_volume(m.verts[q[0]], m.verts[q[1]], m.verts[q[2]], m.verts[q[3]]) <= 0)
      return "tet " + std::to_string(t) + " has nonpositive volume";
  }
  // every boundary face must lie on a face of its own block with nothing outside
  for (int f = 0; f < m.nf(); ++f) {
    if (!m.boundary_face[f]) continue;
    const auto& fv = m.faces[f];
    Vec3 ctr = (m.verts[fv[0]] + m.verts[fv[1]] + m.verts[fv[2]]) / 3.0;
    Vec3 n = (m.verts[fv[1]] - m.verts[fv[0]]).cross(m.verts[fv[2]] - m.verts[fv[0]]).normalized();
    int t = m.face_tets[f][0];
    Vec3 tc = Vec3::Zero();
    for (int v : m.tets[t]) tc += m.verts[v] / 4.0;
    if (n.dot(ctr - tc) < 0) n = -n;
    Vec3 probe = ctr + 1e-6 * m.nominal_h * n;
    bool in_domain_block = false;
    for (int b : std::set<int>(m.block_of_tet.begin(), m.block_of_tet.end()))
      if (inside_block(c.blocks[b], probe, 0.0)) in_domain_block = true;
    if (in_domain_block) return "boundary face " + std::to_string(f) + " lies inside the domain";
  }
  // boundary edges close up
  std::vector<int> bcount(m.ne(), 0);
  for (int f = 0; f < m.nf(); ++f) {
    if (!m.boundary_face[f]) continue;
    const auto& fv = m.faces[f];
    ++bcount[m.find_edge(fv[0], fv[1])];
    ++bcount[m.find_edge(fv[1], fv[2])];
    ++bcount[m.find_edge(fv[0], fv[2])];
  }
  for (int e = 0; e < m.ne(); ++e)
    if (bcount[e] % 2) return "boundary surface open at edge " + std::to_string(e);
  return {};
}

Mask entity_nodes(const TetMesh& m, const CoarseEntity& ent) {
  const double tol = 1e-12;
  Mask out(m.nv(), 0);
  for (int v = 0; v < m.nv(); ++v) {
    const Vec3& x = m.verts[v];
    bool in = false;
    if (ent.dim == 0) {
      in = (x - ent.pts[0]).norm() <= tol;
    } else if (ent.dim == 1) {
      Vec3 d = ent.pts[1] - ent.pts[0];
      double s = (x - ent.pts[0]).dot(d) / d.squaredNorm();
      if (s >= -tol && s <= 1 + tol) in = (ent.pts[0] + s * d - x).norm() <= tol;
    } else {
      Vec3 n = (ent.pts[1] - ent.pts[0]).cross(ent.pts[2] - ent.pts[0]).normalized();
      if (std::abs(n.dot(x - ent.pts[0])) <= tol) {
        in = true;
        const std::size_t k = ent.pts.size();
        for (std::size_t i = 0; i < k && in; ++i) {
          const Vec3& a = ent.pts[i];
          const Vec3& b = ent.pts[(i + 1) % k];
          if ((b - a).cross(x - a).dot(n) < -tol) in = false;
        }
      }
    }
    out[v] = in;
  }
  return out;
}

Mask edges_in(const TetMesh& m, const Mask& nodes) {
  Mask out(m.ne(), 0);
  for (int e = 0; e < m.ne(); ++e) out[e] = nodes[m.edges[e][0]] && nodes[m.edges[e][1]];
  return out;
}

Mask faces_in(const TetMesh& m, const Mask& nodes) {
  Mask out(m.nf(), 0);
  for (int f = 0; f < m.nf(); ++f)
    out[f] = nodes[m.faces[f][0]] && nodes[m.faces[f][1]] && nodes[m.faces[f][2]];
  return out;
}

Mask nodes_of_edges(const TetMesh& m, const Mask& edges) {
  Mask out(m.nv(), 0);
  for (int e = 0; e < m.ne(); ++e)
    if (edges[e]) out[m.edges[e][0]] = out[m.edges[e][1]] = 1;
  return out;
}

Mask nodes_of_tets(const TetMesh& m, const std::vector<int>& blocks) {
  Mask out(m.nv(), 0);
  for (int t = 0; t < m.nt(); ++t)
    if (std::find(blocks.begin(), blocks.end(), m.block_of_tet[t]) != blocks.end())
      for (int v : m.tets[t]) out[v] = 1;
  return out;
}

}  // namespace helmdec::mesh
