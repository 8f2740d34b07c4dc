// Copyright (c) 2026 helmdec contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "helmdec/operators.hpp"

#include <Eigen/SparseCholesky>

namespace helmdec::hx {

using mesh::TetMesh;

// (alpha curl u, curl v) + (beta u, v) with per-block constants, essential
// zero moments on the Gamma edges.
struct System {
  SpMat A;                // free x free
  Vec b;                  // free
  std::vector<int> free;  // edge ids of the free DOFs
  std::vector<int> index; // edge id -> free position or -1
  Mask dirichlet_nodes;
  std::vector<double> alpha, beta;
};

System assemble_problem(const TetMesh& m, const std::vector<double>& alpha,
                        const std::vector<double>& beta, const Mask& gamma_edges, const Vec& rhs);

// Point Jacobi plus the gradient and nodal-vector auxiliary corrections, each
// with an exact sparse Cholesky solve of its Galerkin operator.
class Preconditioner {
 public:
  Preconditioner(const TetMesh& m, const System& s);
  Vec apply(const Vec& r) const;

 private:
  Vec inv_diag_;
  SpMat Gf_, Pf_;
  Eigen::SimplicialLDLT<SpMat> grad_solver_, vec_solver_;
};

struct PcgResult {
  Vec x;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;  // relative preconditioned residual per iteration
};

// Preconditioned CG on A x = b; `precond` null means plain CG.
PcgResult pcg_solve(const SpMat& A, const Vec& b, const Preconditioner* precond, double tol,
                    int maxit);

struct SolveRow {
  std::string geometry;
  int level = 0;
  double h = 0;
  std::string alpha_pattern;
  int iterations = 0, cg_iterations = 0;
  double residual = 0;
  bool converged = false;
  double seconds = 0;  // wall time, kept out of the deterministic report
};

// Full-complex mesh at h = 2^-level with a seeded random right-hand side;
// runs HX-preconditioned and plain CG.
SolveRow solve(const std::string& geometry, int level, const std::vector<double>& alpha,
               const std::vector<double>& beta, const std::vector<std::string>& gamma,
               std::uint64_t seed, double tol, int maxit);

// alpha = beta = 1 with Gamma = boundary, one row per level.
std::vector<SolveRow> level_sweep(const std::string& geometry, const std::vector<int>& levels,
                                  std::uint64_t seed, double tol, int maxit);
// alpha = jump on the first block, 1 elsewhere, Gamma = boundary.
std::vector<SolveRow> jump_sweep(const std::string& geometry, int level,
                                 const std::vector<double>& jumps, std::uint64_t seed, double tol,
                                 int maxit);

void write_csv(std::ostream& os, const std::vector<SolveRow>& rows, std::uint64_t config_hash);
void write_timing_csv(std::ostream& os, const std::vector<SolveRow>& rows);

}  // namespace helmdec::hx
