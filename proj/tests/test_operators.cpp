// Copyright (c) 2026 helmdec contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include "helmdec/operators.hpp"

#include <functional>
#include <random>

using namespace helmdec;
using namespace helmdec::ops;
using mesh::build_complex;

namespace {

Vec random_vec(Eigen::Index n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

const mesh::CoarseEntity& entity(const TetMesh& m, const std::string& name) {
  return *mesh::catalog(m.geometry).find(name);
}

std::vector<char> positions_where(const BoundaryLoop& L, const TetMesh& m,
                                  const std::function<bool(Vec3)>& pred) {
  std::vector<char> out(L.size(), 0);
  for (int k = 0; k < L.size(); ++k) {
    Vec3 mid = 0.5 * (m.verts[L.nodes[k]] + m.verts[L.nodes[(k + 1) % L.size()]]);
    out[k] = pred(mid);
  }
  return out;
}

}  // namespace

TEST_CASE("edge interpolation of a rotation field") {
  TetMesh m = build_complex("unit_cube", 0.25);
  Vec w(3 * m.nv());
  for (int v = 0; v < m.nv(); ++v) w.segment<3>(3 * v) = Vec3(-m.verts[v].y(), m.verts[v].x(), 0);
  Vec r = edge_interpolate_rh(m, w);
  for (int e = 0; e < m.ne(); ++e) {
    Vec3 a = m.verts[m.edges[e][0]], b = m.verts[m.edges[e][1]];
    Vec3 mid = 0.5 * (a + b);
    CHECK(r[e] == Catch::Approx(Vec3(-mid.y(), mid.x(), 0).dot(b - a)).margin(1e-14));
  }
  // curl of the interpolant is the exact curl (0,0,2) on every face
  Vec flux = fem::operators(m)->C * r;
  for (int f = 0; f < m.nf(); ++f) {
    const auto& fv = m.faces[f];
    Vec3 N = 0.5 * (m.verts[fv[1]] - m.verts[fv[0]]).cross(m.verts[fv[2]] - m.verts[fv[0]]);
    CHECK(flux[f] == Catch::Approx(2 * N.z()).margin(1e-14));
  }
}

TEST_CASE("Scott-Zhang interpolation") {
  TetMesh m = build_complex("unit_cube", 0.25);
  auto tr = mesh::tag_trace(m, {"G.z0", "G.x1"});
  Vec w = random_vec(3 * m.nv(), 11);
  Mask none;
  SECTION("reproduces continuous P1 data without a trace") {
    CHECK((scott_zhang(m, w, none, none, none) - w).norm() == 0.0);
  }
  SECTION("zero on the trace, unchanged elsewhere, idempotent") {
    Vec s = scott_zhang(m, w, tr.nodes, tr.edges, tr.faces);
    for (int v = 0; v < m.nv(); ++v) {
      if (tr.nodes[v])
        CHECK(s.segment<3>(3 * v).norm() == 0.0);
      else
        CHECK((s - w).segment<3>(3 * v).norm() == 0.0);
    }
    CHECK(scott_zhang(m, s, tr.nodes, tr.edges, tr.faces) == s);
  }
  SECTION("discontinuous samples pick the lowest-index tet") {
    TetSamples smp(m.nt());
    for (int t = 0; t < m.nt(); ++t)
      for (int i = 0; i < 4; ++i) smp[t][i] = Vec3::Constant(t);
    Vec s = scott_zhang(m, smp, none, none, none);
    std::vector<int> first(m.nv(), -1);
    for (int t = 0; t < m.nt(); ++t)
      for (int v : m.tets[t])
        if (first[v] < 0) first[v] = t;
    for (int v = 0; v < m.nv(); ++v) CHECK(s[3 * v] == first[v]);
  }
}

TEST_CASE("face cut-off") {
  TetMesh m = build_complex("three_cube_L", 0.125);
  const auto& c = mesh::catalog(m.geometry);
  // an interface face of D1
  const mesh::CoarseEntity* F = nullptr;
  for (const auto& e : c.entities)
    if (e.dim == 2 && e.block == 0) {
      Mask n = mesh::entity_nodes(m, e);
      bool interior = false;
      for (int v = 0; v < m.nv(); ++v)
        if (n[v] && !m.boundary_vert[v]) interior = true;
      if (interior) F = &e;
    }
  REQUIRE(F != nullptr);
  Vec th = face_cutoff(m, *F, 0);
  Mask fint = face_interior_nodes(m, *F), bnd = block_boundary_nodes(m, 0);
  Mask inside = mesh::nodes_of_tets(m, {0});
  bool decays = false;
  for (int v = 0; v < m.nv(); ++v) {
    CHECK(th[v] >= 0.0);
    CHECK(th[v] <= 1.0);
    if (fint[v]) CHECK(th[v] == 1.0);
    if (!fint[v] && bnd[v]) CHECK(th[v] == 0.0);
    if (!inside[v]) CHECK(th[v] == 0.0);
    if (th[v] > 0 && th[v] < 1) decays = true;
  }
  CHECK(decays);
}

TEST_CASE("harmonic extension") {
  TetMesh m = build_complex("pyramid", 0.25);
  Vec lin(m.nv());
  for (int v = 0; v < m.nv(); ++v) lin[v] = 2 - m.verts[v].x() + 0.5 * m.verts[v].z();
  CHECK((harmonic_extend(m, m.boundary_vert, lin) - lin).cwiseAbs().maxCoeff() < 1e-12);
  Vec data = random_vec(m.nv(), 3);
  Vec u = harmonic_extend(m, m.boundary_vert, data);
  auto ops = fem::operators(m);
  double e0 = u.dot(ops->Kz * u);
  Vec bump = random_vec(m.nv(), 4);
  for (int v = 0; v < m.nv(); ++v)
    if (m.boundary_vert[v]) bump[v] = 0;
  Vec u2 = u + 1e-3 * bump;
  CHECK(u2.dot(ops->Kz * u2) > e0);
  CHECK_THROWS_AS(harmonic_extend(m, Mask(m.nv(), 0), data), PreconditionError);
}

TEST_CASE("curl-harmonic extension") {
  TetMesh m = build_complex("unit_cube", 0.25);
  auto ops = fem::operators(m);
  CHECK(curl_harmonic_extend(m, Vec::Zero(m.ne())).norm() == 0.0);
  Vec p = random_vec(m.nv(), 5);
  Vec gp = ops->G * p;
  Vec u = curl_harmonic_extend(m, gp);
  for (int e = 0; e < m.ne(); ++e)
    if (m.boundary_edge[e]) CHECK(u[e] == gp[e]);
  CHECK(fem::norm(m, u, fem::FieldKind::Edge, fem::NormKind::CurlSemi) < 1e-10);

  Vec g = random_vec(m.ne(), 6);
  Vec x = curl_harmonic_extend(m, g);
  double ex = x.dot(ops->Kv * x);
  // any other extension has no smaller curl energy
  Vec y = random_vec(m.ne(), 7);
  for (int e = 0; e < m.ne(); ++e)
    if (m.boundary_edge[e]) y[e] = 0;
  Vec x2 = x + 1e-2 * y;
  CHECK(x2.dot(ops->Kv * x2) >= ex - 1e-12);
  // L2-orthogonal to interior gradients
  Vec ortho = ops->G.transpose() * (ops->Mv * x);
  for (int v = 0; v < m.nv(); ++v)
    if (!m.boundary_vert[v]) CHECK(std::abs(ortho[v]) < 1e-10);
}

TEST_CASE("face boundary loops") {
  TetMesh m = build_complex("unit_cube", 0.25);
  const auto& F = entity(m, "G.z0");
  BoundaryLoop L = make_loop(m, F);
  REQUIRE(L.size() == 16);
  CHECK(L.length == Catch::Approx(4.0));
  CHECK(L.nodes[0] == *std::min_element(L.nodes.begin(), L.nodes.end()));
  // counterclockwise with respect to the outward normal (0,0,-1)
  double area = 0;
  for (int k = 0; k < L.size(); ++k)
    area += m.verts[L.nodes[k]].cross(m.verts[L.nodes[(k + 1) % L.size()]]).dot(Vec3(0, 0, -1));
  CHECK(area / 2 == Catch::Approx(1.0));
  CHECK((L.normal - Vec3(0, 0, -1)).norm() < 1e-14);
  for (int k = 0; k < L.size(); ++k) {
    const auto& e = m.edges[L.edges[k]];
    int a = L.nodes[k], b = L.nodes[(k + 1) % L.size()];
    CHECK(((e[0] == a && e[1] == b && L.signs[k] == 1) || (e[0] == b && e[1] == a && L.signs[k] == -1)));
  }
  int corner = m.nv();
  for (int k = 0; k < L.size(); ++k)
    if ((m.verts[L.nodes[k]] - Vec3(1, 1, 0)).norm() < 1e-14) corner = L.nodes[k];
  CHECK(make_loop(m, F, corner).nodes[0] == corner);
  CHECK_THROWS_AS(make_loop(m, F, 9999999), PreconditionError);
  // two opposite faces do not bound one loop
  auto two = mesh::tag_trace(m, {"G.z0", "G.z1"});
  CHECK_THROWS_AS(make_loop(m, two.faces), PreconditionError);
}

TEST_CASE("loop decomposition") {
  TetMesh m = build_complex("unit_cube", 0.25);
  BoundaryLoop L = make_loop(m, entity(m, "G.y1"));
  const int n = L.size();
  Vec v = random_vec(m.ne(), 12);
  SECTION("reconstruction and Stokes") {
    auto d = loop_decompose(L, v);
    double circ = 0;
    for (int k = 0; k < n; ++k) {
      double sv = L.signs[k] * v[L.edges[k]];
      circ += sv;
      CHECK(sv == Catch::Approx(d.phi[(k + 1) % n] - d.phi[k] + d.C * L.len[k]).margin(1e-13));
    }
    CHECK(d.C == Catch::Approx(circ / L.length));
    CHECK(loop_flux(m, L, v) == Catch::Approx(circ).margin(1e-13));
  }
  SECTION("gradients have C = 0 and phi = potential") {
    Vec p = random_vec(m.nv(), 13);
    auto d = loop_decompose(L, fem::operators(m)->G * p);
    CHECK(std::abs(d.C) < 1e-14);
    for (int k = 0; k < n; ++k) CHECK(d.phi[k] == Catch::Approx(p[L.nodes[k]] - p[L.nodes[0]]).margin(1e-13));
  }
  SECTION("zero mean shift") {
    std::vector<char> all(n, 1);
    auto d = loop_decompose(L, v, {}, all);
    double mean = 0;
    for (int k = 0; k < n; ++k) mean += L.len[k] * 0.5 * (d.phi[k] + d.phi[(k + 1) % n]);
    CHECK(std::abs(mean) < 1e-13);
    CHECK(d.c_shift == d.phi[0]);
  }
  SECTION("excluded edges at the end of the loop") {
    std::vector<char> ex(n, 0);
    for (int k = n - 4; k < n; ++k) {
      ex[k] = 1;
      v[L.edges[k]] = 0;
    }
    auto d = loop_decompose(L, v, ex);
    double s = 0, l = 0;
    for (int k = 0; k < n - 4; ++k) {
      s += L.signs[k] * v[L.edges[k]];
      l += L.len[k];
    }
    CHECK(d.C == Catch::Approx(s / l));
    CHECK(d.constrained_length == Catch::Approx(l));
    for (int k = n - 4; k < n; ++k) CHECK(d.phi[k] == 0.0);
    for (int k = 0; k < n - 4; ++k)
      CHECK(L.signs[k] * v[L.edges[k]] ==
            Catch::Approx(d.phi[k + 1] - d.phi[k] + d.C * L.len[k]).margin(1e-13));
    std::vector<char> bad(n, 0);
    bad[2] = 1;
    CHECK_THROWS_AS(loop_decompose(L, v, bad), PreconditionError);
  }
}

TEST_CASE("loop constant extension") {
  TetMesh m = build_complex("unit_cube", 0.25);
  BoundaryLoop L = make_loop(m, entity(m, "G.z0"));
  const int n = L.size();
  Mask fixed(m.nv(), 0);
  auto bottom = positions_where(L, m, [](Vec3 x) { return x.y() < 1e-12; });
  SECTION("zero target gives zero") {
    std::vector<double> tgt(n, 0.0);
    CHECK(loop_constant_extension(m, L, bottom, tgt, fixed).norm() == 0.0);
  }
  SECTION("straight segment with fixed ends: constraints hold") {
    const double C = 0.7;
    std::vector<double> tgt(n, 0.0);
    for (int k = 0; k < n; ++k)
      if (bottom[k]) tgt[k] = C * L.signs[k] * (m.verts[m.edges[L.edges[k]][1]] - m.verts[m.edges[L.edges[k]][0]]).x();
    // fix the two corner nodes of the segment
    for (int k = 0; k < n; ++k) {
      Vec3 x = m.verts[L.nodes[k]];
      if (x.y() < 1e-12 && (x.x() < 1e-12 || x.x() > 1 - 1e-12)) fixed[L.nodes[k]] = 1;
    }
    Vec c = loop_constant_extension(m, L, bottom, tgt, fixed);
    double norm_c = 0;
    for (int k = 0; k < n; ++k) {
      if (!bottom[k]) continue;
      int a = L.nodes[k], b = L.nodes[(k + 1) % n];
      Vec3 ca = c.segment<3>(3 * a), cb = c.segment<3>(3 * b);
      CHECK(0.5 * (ca + cb).dot(m.verts[b] - m.verts[a]) == Catch::Approx(tgt[k]).margin(1e-12));
      norm_c += L.len[k] / 3 * (ca.squaredNorm() + ca.dot(cb) + cb.squaredNorm());
      if (fixed[a]) CHECK(ca.norm() == 0.0);
    }
    CHECK(norm_c > 0);
    for (int v = 0; v < m.nv(); ++v)
      if (L.position(v) < 0) CHECK(c.segment<3>(3 * v).norm() == 0.0);
  }
  SECTION("free straight segment: minimizer is the constant tangent field") {
    std::vector<double> tgt(n, 0.0);
    for (int k = 0; k < n; ++k)
      if (bottom[k]) tgt[k] = -0.4 * L.signs[k] * (m.verts[m.edges[L.edges[k]][1]] - m.verts[m.edges[L.edges[k]][0]]).x();
    Vec c = loop_constant_extension(m, L, bottom, tgt, fixed);
    for (int k = 0; k < n; ++k)
      if (bottom[k]) CHECK((c.segment<3>(3 * L.nodes[k]) - Vec3(-0.4, 0, 0)).norm() < 1e-12);
  }
  SECTION("infeasible constraints throw") {
    std::vector<char> one(n, 0);
    one[0] = 1;
    std::vector<double> tgt(n, 0.0);
    tgt[0] = 1.0;
    fixed[L.nodes[0]] = fixed[L.nodes[1]] = 1;
    CHECK_THROWS_AS(loop_constant_extension(m, L, one, tgt, fixed), PreconditionError);
  }
}

TEST_CASE("epsilon correction has zero integral") {
  TetMesh m = build_complex("unit_cube", 0.25);
  BoundaryLoop L = make_loop(m, entity(m, "G.x0"));
  const int n = L.size();
  std::vector<char> E(n, 0), E1(n, 0), E2(n, 0);
  for (int k = 0; k < 4; ++k) E[k] = 1;
  for (int k = 4; k < 6; ++k) E1[k] = 1;
  for (int k = n - 3; k < n; ++k) E2[k] = 1;
  auto eps = epsilon_correction(L, E, E1, E2, 1.3);
  double integral = 0;
  for (int k = 0; k < n; ++k) integral += eps[k] * L.len[k];
  CHECK(std::abs(integral) < 1e-14);
  for (int k = 0; k < 4; ++k) CHECK(eps[k] == -1.3);
  std::vector<char> far(n, 0);
  far[8] = 1;
  CHECK_THROWS_AS(epsilon_correction(L, E, far, E2, 1.0), PreconditionError);
}

int main(int argc, char** argv) { return Catch::Session().run(argc, argv); }
