// Copyright (c) 2026 helmdec contributors
// SPDX-License-Identifier: Apache-2.0
#include "helmdec/hx.hpp"

#include "helmdec/decompose.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace helmdec::hx {

namespace {

SpMat select(const SpMat& A, const std::vector<int>& rows, const std::vector<int>& cols,
             Eigen::Index ncols_full) {
  std::vector<int> cidx(ncols_full, -1);
  for (std::size_t j = 0; j < cols.size(); ++j) cidx[cols[j]] = static_cast<int>(j);
  std::vector<Eigen::Triplet<double>> t;
  SpMat Ar = A;  // column major: iterate columns, filter rows
  std::vector<int> ridx(A.rows(), -1);
  for (std::size_t i = 0; i < rows.size(); ++i) ridx[rows[i]] = static_cast<int>(i);
  for (int k = 0; k < Ar.outerSize(); ++k)
    for (SpMat::InnerIterator it(Ar, k); it; ++it)
      if (ridx[it.row()] >= 0 && cidx[it.col()] >= 0)
        t.emplace_back(ridx[it.row()], cidx[it.col()], it.value());
  SpMat S(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  S.setFromTriplets(t.begin(), t.end());
  return S;
}

std::string pattern(const std::vector<double>& a) {
  std::ostringstream os;
  for (std::size_t i = 0; i < a.size(); ++i) os << (i ? ";" : "") << a[i];
  return os.str();
}

}  // namespace

System assemble_problem(const TetMesh& m, const std::vector<double>& alpha,
                        const std::vector<double>& beta, const Mask& gamma_edges, const Vec& rhs) {
  const auto& cat = mesh::catalog(m.geometry);
  if (alpha.size() != cat.blocks.size() || beta.size() != cat.blocks.size())
    throw PreconditionError("one alpha and one beta per block are required");
  for (std::size_t i = 0; i < alpha.size(); ++i)
    if (!(alpha[i] > 0) || !(beta[i] > 0)) throw PreconditionError("coefficients must be positive");
  if (rhs.size() != m.ne()) throw PreconditionError("right-hand side length mismatch");
  System s;
  s.alpha = alpha;
  s.beta = beta;
  SpMat Afull(m.ne(), m.ne());
  std::vector<char> present(cat.blocks.size(), 0);
  for (int b : m.block_of_tet) present[b] = 1;
  for (std::size_t b = 0; b < cat.blocks.size(); ++b) {
    if (!present[b]) continue;
    auto sub = mesh::submesh(m, {static_cast<int>(b)});
    SpMat K = fem::assemble(sub, fem::Space::V, fem::Kind::Stiffness).A;
    SpMat M = fem::assemble(sub, fem::Space::V, fem::Kind::Mass).A;
    SpMat Ab = alpha[b] * K + beta[b] * M;
    std::vector<Eigen::Triplet<double>> t;
    for (int k = 0; k < Ab.outerSize(); ++k)
      for (SpMat::InnerIterator it(Ab, k); it; ++it)
        t.emplace_back(sub.parent_edge[it.row()], sub.parent_edge[it.col()], it.value());
    SpMat P(m.ne(), m.ne());
    P.setFromTriplets(t.begin(), t.end());
    Afull += P;
  }
  s.index.assign(m.ne(), -1);
  for (int e = 0; e < m.ne(); ++e)
    if (!gamma_edges[e]) {
      s.index[e] = static_cast<int>(s.free.size());
      s.free.push_back(e);
    }
  s.A = select(Afull, s.free, s.free, m.ne());
  s.b.resize(static_cast<Eigen::Index>(s.free.size()));
  for (std::size_t i = 0; i < s.free.size(); ++i) s.b[i] = rhs[s.free[i]];
  s.dirichlet_nodes = mesh::nodes_of_edges(m, gamma_edges);
  return s;
}

Preconditioner::Preconditioner(const TetMesh& m, const System& s) {
  inv_diag_ = s.A.diagonal().cwiseInverse();
  auto ops = fem::operators(m);
  std::vector<int> nodes, comps;
  for (int i = 0; i < m.nv(); ++i)
    if (!s.dirichlet_nodes[i]) nodes.push_back(i);
  // without essential nodes the constants are in the kernel of G
  if (static_cast<int>(nodes.size()) == m.nv() && !nodes.empty()) nodes.erase(nodes.begin());
  for (int i : nodes)
    for (int c = 0; c < 3; ++c) comps.push_back(3 * i + c);
  Gf_ = select(ops->G, s.free, nodes, m.nv());
  Pf_ = select(ops->Rh, s.free, comps, 3 * m.nv());
  SpMat AG = Gf_.transpose() * s.A * Gf_;
  SpMat AP = Pf_.transpose() * s.A * Pf_;
  grad_solver_.compute(AG);
  vec_solver_.compute(AP);
  if (grad_solver_.info() != Eigen::Success || vec_solver_.info() != Eigen::Success)
    throw std::runtime_error("auxiliary factorization failed");
}

Vec Preconditioner::apply(const Vec& r) const {
  Vec z = inv_diag_.cwiseProduct(r);
  z += Gf_ * grad_solver_.solve(Gf_.transpose() * r);
  z += Pf_ * vec_solver_.solve(Pf_.transpose() * r);
  return z;
}

PcgResult pcg_solve(const SpMat& A, const Vec& b, const Preconditioner* P, double tol, int maxit) {
  PcgResult res;
  res.x = Vec::Zero(b.size());
  Vec r = b;
  Vec z = P ? P->apply(r) : r;
  double rz = r.dot(z);
  const double rz0 = rz;
  res.history.push_back(rz0 > 0 ? 1.0 : 0.0);
  if (rz0 <= 0) {
    res.converged = true;
    return res;
  }
  Vec d = z;
  for (int it = 1; it <= maxit; ++it) {
    Vec Ad = A * d;
    double alpha = rz / d.dot(Ad);
    res.x += alpha * d;
    r -= alpha * Ad;
    z = P ? P->apply(r) : r;
    double rz_new = r.dot(z);
    res.iterations = it;
    double rel = std::sqrt(std::max(rz_new, 0.0) / rz0);
    res.history.push_back(rel);
    if (rel <= tol) {
      res.converged = true;
      break;
    }
    d = z + (rz_new / rz) * d;
    rz = rz_new;
  }
  return res;
}

namespace {

SolveRow solve_row(const TetMesh& m, const std::vector<double>& alpha,
                   const std::vector<double>& beta, const Mask& gamma_edges, std::uint64_t seed,
                   double tol, int maxit) {
  auto start = std::chrono::steady_clock::now();
  Vec rhs = dec::random_nodal(m.ne(), seed);
  auto s = assemble_problem(m, alpha, beta, gamma_edges, rhs);
  Preconditioner P(m, s);
  auto pre = pcg_solve(s.A, s.b, &P, tol, maxit);
  auto plain = pcg_solve(s.A, s.b, nullptr, tol, maxit);
  SolveRow row;
  row.geometry = m.geometry;
  row.level = m.level;
  row.h = m.nominal_h;
  row.alpha_pattern = pattern(alpha);
  row.iterations = pre.iterations;
  row.cg_iterations = plain.iterations;
  row.residual = (s.b - s.A * pre.x).norm() / s.b.norm();
  row.converged = pre.converged;
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

SolveRow solve(const std::string& geometry, int level, const std::vector<double>& alpha,
               const std::vector<double>& beta, const std::vector<std::string>& gamma,
               std::uint64_t seed, double tol, int maxit) {
  auto m = mesh::build_complex(geometry, std::ldexp(1.0, -level));
  auto t = mesh::tag_trace(m, gamma);
  return solve_row(m, alpha, beta, t.edges, seed, tol, maxit);
}

std::vector<SolveRow> level_sweep(const std::string& geometry, const std::vector<int>& levels,
                                  std::uint64_t seed, double tol, int maxit) {
  const std::size_t nb = mesh::catalog(geometry).blocks.size();
  std::vector<SolveRow> rows;
  for (int l : levels) {
    auto m = mesh::build_complex(geometry, std::ldexp(1.0, -l));
    rows.push_back(solve_row(m, std::vector<double>(nb, 1.0), std::vector<double>(nb, 1.0),
                             m.boundary_edge, seed, tol, maxit));
  }
  return rows;
}

std::vector<SolveRow> jump_sweep(const std::string& geometry, int level,
                                 const std::vector<double>& jumps, std::uint64_t seed, double tol,
                                 int maxit) {
  auto m = mesh::build_complex(geometry, std::ldexp(1.0, -level));
  const std::size_t nb = mesh::catalog(geometry).blocks.size();
  std::vector<SolveRow> rows;
  for (double j : jumps) {
    std::vector<double> alpha(nb, 1.0);
    alpha[0] = j;
    rows.push_back(
        solve_row(m, alpha, std::vector<double>(nb, 1.0), m.boundary_edge, seed, tol, maxit));
  }
  return rows;
}

void write_csv(std::ostream& os, const std::vector<SolveRow>& rows, std::uint64_t hash) {
  char hx[17];
  std::snprintf(hx, sizeof hx, "%016llx", static_cast<unsigned long long>(hash));
  os << "config_hash,geometry,level,h,alpha,iterations,cg_iterations,final_residual,converged\n";
  for (const auto& r : rows)
    os << hx << "," << r.geometry << "," << r.level << "," << num(r.h) << "," << r.alpha_pattern
       << "," << r.iterations << "," << r.cg_iterations << "," << num(r.residual) << ","
       << (r.converged ? 1 : 0) << "\n";
}

void write_timing_csv(std::ostream& os, const std::vector<SolveRow>& rows) {
  os << "geometry,level,alpha,seconds\n";
  for (const auto& r : rows)
    os << r.geometry << "," << r.level << "," << r.alpha_pattern << "," << num(r.seconds) << "\n";
}

}  // namespace helmdec::hx
