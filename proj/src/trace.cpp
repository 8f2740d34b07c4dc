// Copyright (c) 2026 helmdec contributors
// SPDX-License-Identifier: Apache-2.0

#include "helmdec/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace helmdec::mesh {
namespace {

bool subset(const Mask& a, const Mask& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && !b[i]) return false;
  return true;
}

bool intersects(const Mask& a, const Mask& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && b[i]) return true;
  return false;
}

int find_root(std::vector<int>& p, int i) {
  while (p[i] != i) i = p[i] = p[p[i]];
  return i;
}

}  // namespace

std::vector<int> TraceSet::free_edges() const {
  std::vector<int> out;
  for (int e : coarse_edges) {
    bool inside = false;
    for (int f : coarse_faces) inside = inside || subset(ent_nodes[e], ent_nodes[f]);
    if (!inside) out.push_back(e);
  }
  return out;
}

std::vector<int> TraceSet::free_vertices() const {
  std::vector<int> out;
  for (int v : coarse_vertices) {
    bool inside = false;
    for (int f : coarse_faces) inside = inside || subset(ent_nodes[v], ent_nodes[f]);
    for (int e : coarse_edges) inside = inside || subset(ent_nodes[v], ent_nodes[e]);
    if (!inside) out.push_back(v);
  }
  return out;
}

TraceSet tag_trace(const TetMesh& m, const std::vector<std::string>& spec) {
  const BlockComplex& c = catalog(m.geometry);
  TraceSet ts;
  ts.geometry = m.geometry;
  ts.spec = spec;
  ts.nodes.assign(m.nv(), 0);
  for (const auto& name : spec) {
    const CoarseEntity* ent = c.find(name);
    if (!ent) throw PreconditionError("unknown coarse entity '" + name + "'");
    if (std::find(ts.entities.begin(), ts.entities.end(), ent) != ts.entities.end()) continue;
    Mask nodes = entity_nodes(m, *ent);
    if (count(nodes) == 0) throw PreconditionError("entity '" + name + "' is not part of the mesh");
    bool on_boundary = true;
    if (ent->dim == 2) {
      Mask f = faces_in(m, nodes);
      for (int i = 0; i < m.nf(); ++i)
        if (f[i] && !m.boundary_face[i]) on_boundary = false;
    } else if (ent->dim == 1) {
      Mask e = edges_in(m, nodes);
      for (int i = 0; i < m.ne(); ++i)
        if (e[i] && !m.boundary_edge[i]) on_boundary = false;
    } else {
      for (int i = 0; i < m.nv(); ++i)
        if (nodes[i] && !m.boundary_vert[i]) on_boundary = false;
    }
    if (!on_boundary) throw PreconditionError("entity '" + name + "' is not on the boundary");
    int idx = static_cast<int>(ts.entities.size());
    ts.entities.push_back(ent);
    ts.ent_nodes.push_back(nodes);
    (ent->dim == 2 ? ts.coarse_faces : ent->dim == 1 ? ts.coarse_edges : ts.coarse_vertices)
        .push_back(idx);
    for (int v = 0; v < m.nv(); ++v) ts.nodes[v] = ts.nodes[v] || nodes[v];
  }
  // fine edges and faces: those inside a single tagged entity
  ts.edges.assign(m.ne(), 0);
  ts.faces.assign(m.nf(), 0);
  for (std::size_t i = 0; i < ts.entities.size(); ++i) {
    if (ts.entities[i]->dim >= 1) {
      Mask e = edges_in(m, ts.ent_nodes[i]);
      for (int k = 0; k < m.ne(); ++k) ts.edges[k] = ts.edges[k] || e[k];
    }
    if (ts.entities[i]->dim == 2) {
      Mask f = faces_in(m, ts.ent_nodes[i]);
      for (int k = 0; k < m.nf(); ++k) ts.faces[k] = ts.faces[k] || f[k];
    }
  }
  const int n = static_cast<int>(ts.entities.size());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (intersects(ts.ent_nodes[i], ts.ent_nodes[j])) parent[find_root(parent, i)] = find_root(parent, j);
  std::vector<int> comp_of(n, -1);
  for (int i = 0; i < n; ++i) {
    int r = find_root(parent, i);
    if (comp_of[r] < 0) {
      comp_of[r] = static_cast<int>(ts.components.size());
      ts.components.push_back({});
    }
    ts.components[comp_of[r]].entities.push_back(i);
  }
  // a component is non-Lipschitz when, at some node, its faces through that
  // node split into clusters that share no fine edge at the node
  for (auto& comp : ts.components) {
    std::vector<int> faces;
    for (int i : comp.entities)
      if (ts.entities[i]->dim == 2) faces.push_back(i);
    if (faces.size() < 2) continue;
    std::vector<Mask> fedges;
    for (int f : faces) fedges.push_back(edges_in(m, ts.ent_nodes[f]));
    for (int v = 0; v < m.nv() && comp.lipschitz; ++v) {
      std::vector<int> here;
      for (std::size_t k = 0; k < faces.size(); ++k)
        if (ts.ent_nodes[faces[k]][v]) here.push_back(static_cast<int>(k));
      if (here.size() < 2) continue;
      std::vector<int> p(here.size());
      std::iota(p.begin(), p.end(), 0);
      for (std::size_t a = 0; a < here.size(); ++a)
        for (std::size_t b = a + 1; b < here.size(); ++b)
          for (int k = m.vert_edge_ptr[v]; k < m.vert_edge_ptr[v + 1]; ++k) {
            int e = m.vert_edge_idx[k];
            if (fedges[here[a]][e] && fedges[here[b]][e]) {
              p[find_root(p, static_cast<int>(a))] = find_root(p, static_cast<int>(b));
              break;
            }
          }
      int clusters = 0;
      for (std::size_t a = 0; a < here.size(); ++a) clusters += find_root(p, static_cast<int>(a)) == static_cast<int>(a);
      if (clusters > 1) comp.lipschitz = false;
    }
    if (!comp.lipschitz) ts.isolated_vertex_union = true;
  }
  if (!c.concave_faces.empty()) {
    Mask face_nodes(m.nv(), 0);
    for (int f : ts.coarse_faces)
      for (int v = 0; v < m.nv(); ++v) face_nodes[v] = face_nodes[v] || ts.ent_nodes[f][v];
    bool all = true;
    for (const auto& cf : c.concave_faces) {
      Mask cn = entity_nodes(m, *c.find(cf));
      if (count(cn) == 0 || !subset(cn, face_nodes)) all = false;
    }
    ts.covers_concave = all;
  }
  return ts;
}

ExtensionReport check_extension_condition(const TetMesh& m, const TraceSet& tr) {
  const BlockComplex& c = catalog(m.geometry);
  ExtensionReport r;
  if (!c.lipschitz) return r;
  if (tr.empty()) {
    r.satisfiable = true;
    r.extended_domain_convex = c.convex;
    return r;
  }
  if (!tr.free_edges().empty() || !tr.free_vertices().empty()) return r;
  for (const auto& comp : tr.components)
    if (!comp.lipschitz) return r;
  r.satisfiable = true;
  r.extended_domain_convex = c.convex || tr.covers_concave;
  return r;
}

std::string format_exact(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

void write_mesh(std::ostream& os, const TetMesh& m, const TraceSet* trace) {
  os << "helmdec-mesh 1\n";
  os << "geometry " << m.geometry << "\n";
  os << "level " << m.level << "\n";
  os << "h " << format_exact(m.h) << "\n";
  os << "counts " << m.nv() << " " << m.nt() << "\n";
  for (int v = 0; v < m.nv(); ++v)
    os << "v " << v << " " << format_exact(m.verts[v].x()) << " " << format_exact(m.verts[v].y())
       << " " << format_exact(m.verts[v].z()) << "\n";
  for (int t = 0; t < m.nt(); ++t) {
    const auto& q = m.tets_ordered[t];
    os << "t " << t << " " << q[0] << " " << q[1] << " " << q[2] << " " << q[3] << " "
       << m.block_of_tet[t] << "\n";
  }
  if (trace)
    for (const auto& s : trace->spec) os << "g " << s << "\n";
}

MeshFile read_mesh(std::istream& is) {
  MeshFile out;
  TetMesh& m = out.mesh;
  std::string line, tag;
  int nv = -1, nt = -1;
  auto fail = [](const std::string& why) { throw PreconditionError("mesh file: " + why); };
  if (!std::getline(is, line) || line != "helmdec-mesh 1") fail("bad header");
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    ls >> tag;
    if (tag == "geometry") {
      ls >> m.geometry;
    } else if (tag == "level") {
      ls >> m.level;
    } else if (tag == "h") {
      double h;
      ls >> h;
    } else if (tag == "counts") {
      ls >> nv >> nt;
    } else if (tag == "v") {
      int id;
      double x, y, z;
      if (!(ls >> id >> x >> y >> z) || id != m.nv()) fail("bad vertex line");
      m.verts.emplace_back(x, y, z);
    } else if (tag == "t") {
      int id;
      std::array<int, 4> q;
      int b;
      if (!(ls >> id >> q[0] >> q[1] >> q[2] >> q[3] >> b) ||
          id != static_cast<int>(m.tets_ordered.size()))
        fail("bad tet line");
      m.tets_ordered.push_back(q);
      m.block_of_tet.push_back(b);
    } else if (tag == "g") {
      std::string s;
      ls >> s;
      out.trace_spec.push_back(s);
    } else {
      fail("unknown record '" + tag + "'");
    }
  }
  if (nv != m.nv() || nt != static_cast<int>(m.tets_ordered.size())) fail("count mismatch");
  catalog(m.geometry);
  m.nominal_h = std::ldexp(1.0, -m.level);
  finalize_mesh(m);
  return out;
}

}  // namespace helmdec::mesh
