// Copyright (c) 2026 helmdec contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include "helmdec/mesh.hpp"

#include <algorithm>
#include <set>
#include <sstream>

using namespace helmdec;
using namespace helmdec::mesh;

namespace {

using TetKey = std::array<std::array<long long, 3>, 4>;

TetKey tet_key(std::array<Vec3, 4> t) {
  TetKey k;
  for (int i = 0; i < 4; ++i)
    for (int a = 0; a < 3; ++a) k[i][a] = std::llround(t[i][a] * 1024.0);
  std::sort(k.begin(), k.end());
  return k;
}

int euler(const TetMesh& m) { return m.nv() - m.ne() + m.nf() - m.nt(); }

}  // namespace

TEST_CASE("unit cube entity counts") {
  TetMesh m1 = build_complex("unit_cube", 1.0);
  CHECK(m1.nv() == 8);
  CHECK(m1.nt() == 6);
  CHECK(m1.ne() == 19);
  TetMesh m2 = build_complex("unit_cube", 0.5);
  CHECK(m2.nv() == 27);
  CHECK(m2.nt() == 48);
  CHECK(m2.nominal_h == 0.5);
  CHECK(m2.h == Catch::Approx(std::sqrt(3.0) / 2));
}

TEST_CASE("refinement halves h and multiplies tets by eight") {
  TetMesh m = build_complex("unit_cube", 1.0);
  TetMesh r = refine(m);
  CHECK(r.nt() == 8 * m.nt());
  CHECK(r.h == Catch::Approx(m.h / 2));
  CHECK(refine(r).h == Catch::Approx(m.h / 4));
  CHECK(check_conformity(r).empty());
}

TEST_CASE("red refinement of the Kuhn cube is the Kuhn mesh at half size") {
  for (double h : {1.0, 0.5}) {
    TetMesh m = build_complex("four_edge_cube", h);
    TetMesh r = refine(m);
    std::set<TetKey> a, b;
    for (const auto& q : r.tets)
      a.insert(tet_key({r.verts[q[0]], r.verts[q[1]], r.verts[q[2]], r.verts[q[3]]}));
    for (const auto& t : kuhn_tets(Vec3(0, 0, 0), Vec3(2, 2, 2), h / 2)) b.insert(tet_key(t));
    CHECK(a == b);
  }
}

TEST_CASE("catalog meshes are conforming, quasi-uniform and satisfy Euler") {
  for (const auto& name : catalog_names()) {
    CAPTURE(name);
    const BlockComplex& c = catalog(name);
    double q0 = 0;
    for (double h : {1.0, 0.5, 0.25}) {
      TetMesh m = build_complex(name, h);
      CHECK(check_conformity(m).empty());
      double q = quasi_uniformity(m);
      CHECK(q <= 4.0);
      // the coarse pyramid split is not similar to its red children; the
      // ratio is fixed from the first refinement on
      if (q0 > 0) CHECK(q == Catch::Approx(q0));
      if (h < 1.0) q0 = q;
      std::set<int> labels(m.block_of_tet.begin(), m.block_of_tet.end());
      CHECK(labels.size() == c.blocks.size());
      if (c.lipschitz) CHECK(euler(m) == 1);
    }
  }
}

TEST_CASE("declared junction kinds match geometry") {
  for (const auto& name : catalog_names()) {
    const BlockComplex& c = catalog(name);
    TetMesh m = build_complex(name, 0.5);
    for (const auto& j : c.junctions) {
      CAPTURE(name, j.a, j.b);
      Mask na = nodes_of_tets(m, {j.a}), nb = nodes_of_tets(m, {j.b});
      Mask shared(m.nv());
      for (int v = 0; v < m.nv(); ++v) shared[v] = na[v] && nb[v];
      std::size_t nfaces = count(faces_in(m, shared)), nedges = count(edges_in(m, shared));
      JunctionKind kind = nfaces > 0 ? JunctionKind::Face
                          : nedges > 0 ? JunctionKind::Edge
                                       : JunctionKind::Vertex;
      CHECK(count(shared) > 0);
      CHECK(kind == j.kind);
    }
  }
}

TEST_CASE("three_cube_L has three block labels") {
  TetMesh m = build_complex("three_cube_L", 0.5);
  std::set<int> labels(m.block_of_tet.begin(), m.block_of_tet.end());
  CHECK(labels.size() == 3);
}

TEST_CASE("build_complex rejects bad input") {
  CHECK_THROWS_AS(build_complex("dodecahedron", 0.5), PreconditionError);
  CHECK_THROWS_AS(build_complex("unit_cube", 0.3), PreconditionError);
}

TEST_CASE("trace tagging and component metadata") {
  TetMesh cube = build_complex("unit_cube", 0.25);
  TraceSet t1 = tag_trace(cube, {"G.z0"});
  CHECK(t1.J() == 1);
  CHECK(t1.components[0].lipschitz);
  CHECK(count(t1.nodes) == 25);
  CHECK(count(t1.faces) == 32);
  TraceSet t2 = tag_trace(cube, {"G.z0", "G.z1"});
  CHECK(t2.J() == 2);
  TetMesh pyr = build_complex("pyramid", 0.25);
  TraceSet tp = tag_trace(pyr, {"P.lat_x0", "P.lat_x1"});
  CHECK(tp.J() == 1);
  CHECK_FALSE(tp.components[0].lipschitz);
  CHECK(tp.isolated_vertex_union);
  CHECK_THROWS_AS(tag_trace(cube, {"G.q9"}), PreconditionError);
  TetMesh L = build_complex("three_cube_L", 0.5);
  CHECK_THROWS_AS(tag_trace(L, {"D1.x1"}), PreconditionError);
}

TEST_CASE("derived trace sets are closed and idempotent") {
  TetMesh m = build_complex("three_cube_L", 0.25);
  TraceSet t = tag_trace(m, {"D1.z0", "D2.z0"});
  Mask closure = edges_in(m, nodes_of_edges(m, t.edges));
  for (int f = 0; f < m.nf(); ++f) {
    if (!t.faces[f]) continue;
    const auto& fv = m.faces[f];
    CHECK(t.edges[m.find_edge(fv[0], fv[1])]);
    CHECK(t.edges[m.find_edge(fv[1], fv[2])]);
    CHECK(t.edges[m.find_edge(fv[0], fv[2])]);
  }
  TraceSet again = tag_trace(m, t.spec);
  CHECK(again.nodes == t.nodes);
  CHECK(again.edges == t.edges);
  CHECK(again.faces == t.faces);
}

TEST_CASE("extension condition lookup") {
  TetMesh cube = build_complex("unit_cube", 0.5);
  auto r1 = check_extension_condition(cube, tag_trace(cube, {"G.z0"}));
  CHECK(r1.satisfiable);
  CHECK(r1.extended_domain_convex);
  TetMesh pyr = build_complex("pyramid", 0.5);
  CHECK_FALSE(check_extension_condition(pyr, tag_trace(pyr, {"P.lat_x0", "P.lat_x1"})).satisfiable);
  TetMesh L = build_complex("three_cube_L", 0.5);
  auto r3 = check_extension_condition(L, tag_trace(L, {"D2.y1", "D3.x1"}));
  CHECK(r3.satisfiable);
  CHECK(r3.extended_domain_convex);
  auto r4 = check_extension_condition(L, tag_trace(L, {"D1.z0"}));
  CHECK(r4.satisfiable);
  CHECK_FALSE(r4.extended_domain_convex);
}

TEST_CASE("mesh text format round-trips") {
  for (const char* name : {"unit_cube", "three_cube_L", "vertex_junction_star"}) {
    TetMesh m = build_complex(name, 0.25);
    TraceSet t = tag_trace(m, {});
    std::stringstream ss;
    write_mesh(ss, m, &t);
    MeshFile back = read_mesh(ss);
    CHECK(back.mesh.nv() == m.nv());
    CHECK(back.mesh.ne() == m.ne());
    CHECK(back.mesh.nf() == m.nf());
    CHECK(back.mesh.nt() == m.nt());
    CHECK(back.mesh.verts == m.verts);
    CHECK(back.mesh.uid == m.uid);
  }
  std::stringstream bad("helmdec-mesh 1\ngeometry unit_cube\ncounts 3 0\n");
  CHECK_THROWS_AS(read_mesh(bad), PreconditionError);
}

TEST_CASE("submesh preserves vertex order and parent maps") {
  TetMesh full = build_complex("cube_in_box", 0.25);
  TetMesh g = domain_mesh(full);
  CHECK(g.nt() == full.nt() / 4);
  CHECK(std::is_sorted(g.parent_vert.begin(), g.parent_vert.end()));
  for (int e = 0; e < g.ne(); ++e) {
    int pe = g.parent_edge[e];
    REQUIRE(pe >= 0);
    CHECK(full.edges[pe][0] == g.parent_vert[g.edges[e][0]]);
  }
}

int main(int argc, char** argv) { return Catch::Session().run(argc, argv); }
