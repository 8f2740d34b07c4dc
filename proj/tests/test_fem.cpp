// Copyright (c) 2026 helmdec contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include "helmdec/fem.hpp"

#include <random>

using namespace helmdec;
using namespace helmdec::fem;
using mesh::build_complex;

namespace {

// Degree-2 exact rule on the reference tet, in barycentric coordinates.
std::vector<std::array<double, 4>> quad_points() {
  const double a = 0.5854101966249685, b = 0.1381966011250105;
  return {{a, b, b, b}, {b, a, b, b}, {b, b, a, b}, {b, b, b, a}};
}

Vec random_vec(Eigen::Index n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("gradient and curl incidence") {
  TetMesh m = build_complex("unit_cube", 0.25);
  auto G = gradient_map(m).A;
  auto C = curl_map(m).A;
  SpMat CG = C * G;
  CHECK(CG.norm() == 0.0);
  Vec one = Vec::Ones(m.nv());
  CHECK((G * one).norm() == 0.0);
  Vec x(m.nv());
  for (int v = 0; v < m.nv(); ++v) x[v] = m.verts[v].x();
  Vec gx = G * x;
  for (int e = 0; e < m.ne(); ++e) {
    Vec3 d = m.verts[m.edges[e][1]] - m.verts[m.edges[e][0]];
    CHECK(gx[e] == d.x());
  }
}

TEST_CASE("face fluxes match per-tet analytic curls") {
  for (const char* g : {"unit_cube", "pyramid"}) {
    TetMesh m = build_complex(g, 0.25);
    Vec v = random_vec(m.ne(), 7);
    Vec flux = curl_map(m).A * v;
    double err = 0;
    for (int t = 0; t < m.nt(); ++t) {
      TetGeometry geo = tet_geometry(m, t);
      Vec3 c = tet_curl(m, geo, t, v);
      for (int i = 0; i < 4; ++i) {
        const auto& fv = m.faces[m.tet_faces[t][i]];
        Vec3 N = 0.5 * (m.verts[fv[1]] - m.verts[fv[0]]).cross(m.verts[fv[2]] - m.verts[fv[0]]);
        err = std::max(err, std::abs(c.dot(N) - flux[m.tet_faces[t][i]]));
      }
    }
    CHECK(err < 1e-12);
  }
}

TEST_CASE("quadratic forms agree with quadrature") {
  for (const char* g : {"unit_cube", "pyramid", "vertex_junction_star"}) {
    CAPTURE(g);
    TetMesh m = build_complex(g, 0.5);
    auto ops = operators(m);
    Vec p = random_vec(m.nv(), 1), v = random_vec(m.ne(), 2), f = random_vec(m.nf(), 3);
    double mz = 0, kz = 0, mv = 0, kv = 0, mw = 0;
    for (int t = 0; t < m.nt(); ++t) {
      TetGeometry geo = tet_geometry(m, t);
      const auto& q = m.tets[t];
      Vec3 gp = Vec3::Zero();
      for (int i = 0; i < 4; ++i) gp += p[q[i]] * geo.grad[i];
      kz += geo.vol * gp.squaredNorm();
      Vec3 c = tet_curl(m, geo, t, v);
      kv += geo.vol * c.squaredNorm();
      for (const auto& lam : quad_points()) {
        double w = geo.vol / 4;
        double pv = 0;
        Vec3 x = Vec3::Zero();
        for (int i = 0; i < 4; ++i) {
          pv += lam[i] * p[q[i]];
          x += lam[i] * m.verts[q[i]];
        }
        mz += w * pv * pv;
        mv += w * whitney_eval(m, geo, t, v, lam).squaredNorm();
        Vec3 rt = Vec3::Zero();
        for (int i = 0; i < 4; ++i) {
          const auto& fv = m.faces[m.tet_faces[t][i]];
          Vec3 n = (m.verts[fv[1]] - m.verts[fv[0]]).cross(m.verts[fv[2]] - m.verts[fv[0]]);
          double sig = n.dot(m.verts[fv[0]] - m.verts[q[i]]) > 0 ? 1.0 : -1.0;
          rt += f[m.tet_faces[t][i]] * sig * (x - m.verts[q[i]]) / (3 * geo.vol);
        }
        mw += w * rt.squaredNorm();
      }
    }
    CHECK(rel(p.dot(ops->Mz * p), mz) < 1e-12);
    CHECK(rel(p.dot(ops->Kz * p), kz) < 1e-12);
    CHECK(rel(v.dot(ops->Mv * v), mv) < 1e-12);
    CHECK(rel(v.dot(ops->Kv * v), kv) < 1e-12);
    CHECK(rel(f.dot(ops->Mw * f), mw) < 1e-12);
    for (const SpMat* A : {&ops->Mz, &ops->Kz, &ops->Mv, &ops->Kv, &ops->Mw})
      CHECK(SpMat(*A - SpMat(A->transpose())).norm() <= 1e-13 * A->norm());
  }
}

TEST_CASE("constant fields") {
  TetMesh m = build_complex("unit_cube", 0.25);
  auto ops = operators(m);
  Vec one = Vec::Ones(m.nv());
  CHECK(one.dot(ops->Mz * one) == Catch::Approx(1.0).epsilon(1e-13));
  CHECK(std::abs(one.dot(ops->Kz * one)) < 1e-12);
  Vec ex(m.ne());
  for (int e = 0; e < m.ne(); ++e) ex[e] = m.verts[m.edges[e][1]].x() - m.verts[m.edges[e][0]].x();
  CHECK(norm(m, ex, FieldKind::Edge, NormKind::L2) == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(norm(m, ex, FieldKind::Edge, NormKind::CurlSemi) < 1e-12);
  // Whitney reproduces constants pointwise
  TetGeometry g0 = tet_geometry(m, 5);
  Vec3 val = whitney_eval(m, g0, 5, ex, {0.1, 0.2, 0.3, 0.4});
  CHECK((val - Vec3(1, 0, 0)).norm() < 1e-13);
}

TEST_CASE("norms") {
  TetMesh m = build_complex("unit_cube", 0.25);
  for (auto nk : {NormKind::L2, NormKind::Curl, NormKind::CurlSemi})
    CHECK(norm(m, Vec::Zero(m.ne()), FieldKind::Edge, nk) == 0.0);
  CHECK(norm(m, Vec::Zero(m.nv()), FieldKind::Nodal, NormKind::H1) == 0.0);
  Vec p = random_vec(m.nv(), 4);
  Vec gp = operators(m)->G * p;
  CHECK(norm(m, gp, FieldKind::Edge, NormKind::CurlSemi) < 1e-12);
  CHECK_THROWS_AS(norm(m, p, FieldKind::Nodal, NormKind::Curl), PreconditionError);
  CHECK_THROWS_AS(norm(m, gp, FieldKind::Edge, NormKind::H1), PreconditionError);
  CHECK_THROWS_AS(norm(m, p, FieldKind::Edge, NormKind::L2), PreconditionError);
}

TEST_CASE("restrict_zero") {
  TetMesh m = build_complex("unit_cube", 0.25);
  Vec v = Vec::Ones(m.ne());
  auto bdry = mesh::tag_trace(m, {"G.x0", "G.x1", "G.y0", "G.y1", "G.z0", "G.z1"});
  Vec r = restrict_zero(m, v, FieldKind::Edge, bdry);
  for (int e = 0; e < m.ne(); ++e) CHECK(r[e] == (m.boundary_edge[e] ? 0.0 : 1.0));
  CHECK(restrict_zero(m, r, FieldKind::Edge, bdry) == r);
  CHECK(restrict_zero(m, v, FieldKind::Edge, mesh::tag_trace(m, {})) == v);
}

TEST_CASE("r_h matrix and curl pairing") {
  TetMesh m = build_complex("unit_cube", 0.25);
  auto ops = operators(m);
  Vec p = random_vec(m.nv(), 5);
  Vec w(3 * m.nv());
  // w = grad of the quadratic-free linear field 2x - y + 3z is constant
  for (int v = 0; v < m.nv(); ++v) w.segment<3>(3 * v) = Vec3(2, -1, 3);
  Vec lin(m.nv());
  for (int v = 0; v < m.nv(); ++v) lin[v] = m.verts[v].dot(Vec3(2, -1, 3));
  CHECK((ops->Rh * w - ops->G * lin).norm() < 1e-13);
  // Bc^T phi = Kv-type pairing: for w nodal, (curl w, curl v) = w . Bc v
  Vec wr = random_vec(3 * m.nv(), 6), v = random_vec(m.ne(), 7);
  double lhs = wr.dot(ops->Bc * v);
  double rhs = 0;
  for (int t = 0; t < m.nt(); ++t) {
    TetGeometry g = tet_geometry(m, t);
    Vec3 cw = Vec3::Zero();
    for (int a = 0; a < 4; ++a) cw += g.grad[a].cross(Vec3(wr.segment<3>(3 * m.tets[t][a])));
    rhs += g.vol * cw.dot(tet_curl(m, g, t, v));
  }
  CHECK(rel(lhs, rhs) < 1e-12);
}

TEST_CASE("zero extension preserves nodal vector norms") {
  auto full = build_complex("cube_in_box", 0.25);
  auto g = mesh::domain_mesh(full);
  Vec w = random_vec(3 * g.nv(), 8);
  for (int v = 0; v < g.nv(); ++v)
    if (g.boundary_vert[v]) w.segment<3>(3 * v).setZero();
  Vec wf = Vec::Zero(3 * full.nv());
  for (int v = 0; v < g.nv(); ++v) wf.segment<3>(3 * g.parent_vert[v]) = w.segment<3>(3 * v);
  for (auto nk : {NormKind::L2, NormKind::H1})
    CHECK(norm(g, w, FieldKind::NodalVector, nk) ==
          Catch::Approx(norm(full, wf, FieldKind::NodalVector, nk)).epsilon(1e-13));
}

TEST_CASE("Dirichlet Poisson solves") {
  TetMesh m = build_complex("unit_cube", 0.25);
  auto solver = scalar_poisson(m, m.boundary_vert);
  Vec bc(m.nv());
  for (int v = 0; v < m.nv(); ++v) bc[v] = 1.0 + m.verts[v].x() - 2 * m.verts[v].z();
  Vec u = solver->solve(Vec::Zero(m.nv()), &bc);
  CHECK((u - bc).cwiseAbs().maxCoeff() < 1e-12);
  // pure Neumann: mean-zero gauge
  auto neu = scalar_poisson(m, Mask(m.nv(), 0));
  Vec p = random_vec(m.nv(), 9);
  auto ops = operators(m);
  Vec rhs = ops->G.transpose() * ops->Mv * (ops->G * p);
  Vec q = neu->solve(rhs);
  CHECK((ops->Mz * q).sum() == Catch::Approx(0.0).margin(1e-12));
  Vec d = q - p;
  d.array() -= d.mean();
  CHECK(d.cwiseAbs().maxCoeff() < 1e-10);
}

int main(int argc, char** argv) { return Catch::Session().run(argc, argv); }
