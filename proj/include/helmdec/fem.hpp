// Copyright (c) 2026 helmdec contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "helmdec/mesh.hpp"

#include <Eigen/SparseCholesky>

#include <iosfwd>
#include <memory>

namespace helmdec::fem {

using mesh::TetMesh;
using mesh::TraceSet;

enum class Space { Z, Z3, V, W };
enum class Kind { Mass, Stiffness };
enum class FieldKind { Nodal, NodalVector, Edge, Face };
enum class NormKind { L2, H1, Curl, CurlSemi };

struct SparseOperator {
  SpMat A;
  bool symmetric = false;
  Eigen::Index rows() const { return A.rows(); }
  Eigen::Index cols() const { return A.cols(); }
};

// Barycentric gradients and volume of one tet (vertex order of mesh.tets).
struct TetGeometry {
  double vol = 0;
  std::array<Vec3, 4> grad;
};
TetGeometry tet_geometry(const TetMesh& m, int t);

// +1 when local edge k of tet t runs along the global orientation.
inline int edge_sign(const TetMesh& m, int t, int k) {
  return m.tets[t][mesh::kLocalEdges[k][0]] < m.tets[t][mesh::kLocalEdges[k][1]] ? 1 : -1;
}

// Per-tet constant curl of an edge field (Whitney representation).
Vec3 tet_curl(const TetMesh& m, const TetGeometry& g, int t, const Vec& v);
// Value of an edge field at barycentric point lambda inside tet t.
Vec3 whitney_eval(const TetMesh& m, const TetGeometry& g, int t, const Vec& v,
                  const std::array<double, 4>& lambda);

SparseOperator gradient_map(const TetMesh& m);  // E x V
SparseOperator curl_map(const TetMesh& m);      // F x E
SparseOperator assemble(const TetMesh& m, Space space, Kind kind);
// r_h as a matrix: E x 3V, moments of nodal vector fields (interleaved 3*i+c).
SparseOperator rh_map(const TetMesh& m);
// (curl(phi_{a,c}), curl v) for nodal vector basis phi_{a,c} = lambda_a e_c: 3V x E.
SparseOperator curl_pairing(const TetMesh& m);

// Every operator of one mesh, assembled once and shared.
struct Operators {
  SpMat G, C, Mz, Kz, Mv, Kv, Mw, Rh, Bc;
  double volume = 0;
};
std::shared_ptr<const Operators> operators(const TetMesh& m);

double norm(const TetMesh& m, const Vec& field, FieldKind fk, NormKind nk);
Vec restrict_zero(const TetMesh& m, const Vec& field, FieldKind fk, const TraceSet& trace);

// Node-set Dirichlet Poisson problem K u = f on the free nodes.  With no
// Dirichlet nodes the first node is pinned and the mass-weighted mean removed.
class ScalarPoisson {
 public:
  ScalarPoisson(const TetMesh& m, const Mask& dirichlet);
  // rhs: full-length load vector (ignored at Dirichlet nodes); bc: full-length
  // values used at Dirichlet nodes (zero when null).
  Vec solve(const Vec& rhs, const Vec* bc = nullptr) const;
  bool gauged() const { return gauged_; }

 private:
  std::shared_ptr<const Operators> ops_;
  Mask dir_;
  std::vector<int> free_, index_;
  SpMat Kfd_;
  Eigen::SimplicialLDLT<SpMat> ldlt_;
  bool gauged_ = false;
};
std::shared_ptr<const ScalarPoisson> scalar_poisson(const TetMesh& m, const Mask& dirichlet);

// Nodal vector field helpers (interleaved layout).
Vec component(const Vec& w, int c);
void set_component(Vec& w, int c, const Vec& s);

// Coordinate text export, rows then columns ascending.
void write_operator(std::ostream& os, const SpMat& A);
void write_field(std::ostream& os, const Vec& f);

}  // namespace helmdec::fem
