// Copyright (c) 2026 helmdec contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "helmdec/decompose.hpp"

namespace helmdec::dec::detail {

Mask faces_of(const TetMesh& m, const CoarseEntity& e);
Mask edges_of(const TetMesh& m, const CoarseEntity& e);
// Edges used by exactly one face of the set.
Mask boundary_of_faces(const TetMesh& m, const Mask& faces);
// Catalog faces of the blocks present in m whose fine faces are all on the boundary.
std::vector<const CoarseEntity*> candidate_faces(const TetMesh& m);
bool contains_nodes(const Mask& outer, const Mask& inner);

// Parent ids of the fine faces of a submesh.
std::vector<int> parent_faces(const TetMesh& parent, const TetMesh& sub);
Gamma restrict_gamma(const TetMesh& parent, const TetMesh& sub, const Gamma& g);
Vec restrict_edges(const TetMesh& sub, const Vec& v);
void add_nodal(const TetMesh& sub, const Vec& p, Vec& out);
void add_nodal3(const TetMesh& sub, const Vec& w, Vec& out);
void add_edges(const TetMesh& sub, const Vec& R, Vec& out);

// Consecutive runs of parallel loop edges (coarse edges of a polygonal loop),
// starting at position 0.
std::vector<std::vector<int>> loop_segments(const TetMesh& m, const ops::BoundaryLoop& L);

// Round-off tolerance for quantities that vanish in exact arithmetic.
double roundoff_tol(const Vec& a);

// Move the values of v on `edges` into `spill` and zero them in v.  Throws
// when a value exceeds tol.
void clear_edges(Vec& v, const Mask& edges, double tol, Vec& spill, const char* what);

HelmholtzSplit kernel_impl(const TetMesh& m, const Vec& v, const Gamma& g);
HelmholtzSplit loop_impl(const TetMesh& m, const Vec& v, const Mask& F, const Gamma& extra);
HelmholtzSplit machinery_impl(const TetMesh& m, const Vec& v, const std::vector<EdgeTask>& tasks,
                              const Gamma& extra);
// R = v - G p - r_h w with exact zeros on s.zero_edges (checked against round-off).
void recompute_residual(const TetMesh& m, const Vec& v, HelmholtzSplit& s);
// On vertex junctions: v plus vertex gradients per block so that every
// functional vanishes.  Other geometries: v unchanged.
Vec make_junction_compatible(const TetMesh& m, const Vec& v, const TraceSet& t);

// Route selection on one convex or L-shaped domain without junctions.
HelmholtzSplit dispatch_single(const TetMesh& m, const Vec& v, const TraceSet& t, bool convex);

}  // namespace helmdec::dec::detail
