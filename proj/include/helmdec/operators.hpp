// Copyright (c) 2026 helmdec contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "helmdec/fem.hpp"

#include <optional>

namespace helmdec::ops {

using mesh::CoarseEntity;
using mesh::TetMesh;

// Edge moments of a nodal vector field (exact: trapezoid of endpoint values).
Vec edge_interpolate_rh(const TetMesh& m, const Vec& w);

// Piecewise linear, possibly discontinuous data: four vertex values per tet,
// in the vertex order of mesh.tets.
using TetSamples = std::vector<std::array<Vec3, 4>>;
TetSamples samples_of_nodal(const TetMesh& m, const Vec& w);

// Scott-Zhang interpolation.  Nodes in `gamma_nodes` average over the
// lowest-index fine face of `gamma_faces` through them (else an edge of
// `gamma_edges`, else the point value); other nodes use the lowest-index tet.
// Values at `gamma_nodes` are then set to exactly zero.
Vec scott_zhang(const TetMesh& m, const TetSamples& f, const Mask& gamma_nodes,
                const Mask& gamma_edges, const Mask& gamma_faces);
Vec scott_zhang(const TetMesh& m, const Vec& w, const Mask& gamma_nodes, const Mask& gamma_edges,
                const Mask& gamma_faces);

// Fine nodes strictly inside a coarse face (not on its polygon boundary).
Mask face_interior_nodes(const TetMesh& m, const CoarseEntity& F);
// Nodes on the boundary of one block.
Mask block_boundary_nodes(const TetMesh& m, int block);

// Cut-off function of an interface face F of block `block`: 1 at interior
// nodes of F, 0 on the rest of the block boundary, linear decay over
// `layers` graph layers inside the block, 0 outside the block.
Vec face_cutoff(const TetMesh& m, const CoarseEntity& F, int block, int layers = 2);

// Discrete harmonic extension: values given at `dirichlet` nodes, K u = 0 elsewhere.
Vec harmonic_extend(const TetMesh& m, const Mask& dirichlet, const Vec& data);

// Edge field with the given moments on boundary edges minimizing the curl
// energy, then the L2 norm among minimizers.  `data` is full length; only
// boundary-edge entries are read.
Vec curl_harmonic_extend(const TetMesh& m, const Vec& data);

struct BoundaryLoop {
  std::vector<int> nodes;   // cyclic, nodes[0] is the start (t = 0)
  std::vector<int> edges;   // edges[k] joins nodes[k] and nodes[k+1]
  std::vector<int> signs;   // +1 when edges[k] is oriented nodes[k] -> nodes[k+1]
  std::vector<double> t;    // arc length at nodes[k]
  std::vector<double> len;  // |edges[k]|
  double length = 0;
  Mask face_mask;           // fine faces of the enclosed face (union)
  Vec3 normal = Vec3::Zero();

  int size() const { return static_cast<int>(edges.size()); }
  int position(int node) const;  // -1 when absent
};

// Loop along the boundary of a face union given by its fine faces,
// counterclockwise with respect to the outward normal, starting at `start`
// (lowest node id when -1).
BoundaryLoop make_loop(const TetMesh& m, const Mask& face_mask, int start = -1);
BoundaryLoop make_loop(const TetMesh& m, const CoarseEntity& F, int start = -1);

struct LoopDecomposition {
  double C = 0;
  std::vector<double> phi;  // per loop node
  double c_shift = 0;
  double constrained_length = 0;  // length over which C averages
};

// excluded: loop positions (edges) where v vanishes and phi is held at zero;
// those edges must end at the start node.  zero_mean: loop positions whose
// trapezoid mean of phi is shifted to zero.
LoopDecomposition loop_decompose(const BoundaryLoop& loop, const Vec& v,
                                 const std::vector<char>& excluded = {},
                                 const std::vector<char>& zero_mean = {});

// Flux of curl v through the loop's face union, oriented by the loop.
double loop_flux(const TetMesh& m, const BoundaryLoop& loop, const Vec& v);

// Minimum L2(loop)-norm nodal vector field supported on loop nodes with
// ((c_a + c_b)/2).(x_b - x_a) = target[k] on every constrained loop edge k
// (traversal direction), zero at `fixed` nodes.  Throws when infeasible.
Vec loop_constant_extension(const TetMesh& m, const BoundaryLoop& loop,
                            const std::vector<char>& constrained, const std::vector<double>& target,
                            const Mask& fixed);

// Piecewise constant loop function: -C on E, |E|/(2|E1|) C on E1,
// |E|/(2|E2|) C on E2, zero elsewhere (loop-position masks).
std::vector<double> epsilon_correction(const BoundaryLoop& loop, const std::vector<char>& E,
                                       const std::vector<char>& E1, const std::vector<char>& E2,
                                       double C);

}  // namespace helmdec::ops
