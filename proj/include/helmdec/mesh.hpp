// Copyright (c) 2026 helmdec contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "helmdec/common.hpp"

#include <array>
#include <iosfwd>
#include <optional>

namespace helmdec::mesh {

enum class BlockShape { Brick, Pyramid };

struct Block {
  std::string name;
  BlockShape shape = BlockShape::Brick;
  Vec3 lo = Vec3::Zero(), hi = Vec3::Zero();  // brick corners
  // pyramid: apex, axis (0..2), direction (+1 or -1), height, base half-width
  Vec3 apex = Vec3::Zero();
  int axis = 2;
  int dir = -1;
  double height = 1.0;
  double half_width = 0.5;
};

enum class JunctionKind { Face, Edge, Vertex };

struct Junction {
  int a = 0, b = 0;
  JunctionKind kind = JunctionKind::Face;
};

// A named closed face, edge or vertex of one block.  Faces are convex
// polygons with corners listed in order.
struct CoarseEntity {
  std::string name;  // "<block>.<local>"
  int dim = 2;
  int block = 0;
  std::vector<Vec3> pts;
  Vec3 normal = Vec3::Zero();  // outward unit normal of the block (faces)
};

struct BlockComplex {
  std::string name;
  std::vector<Block> blocks;
  std::vector<Junction> junctions;
  std::vector<int> domain_blocks;          // blocks of the decomposition domain
  std::vector<int> sigma1;                 // Σ1 blocks for the multi-block face route
  std::vector<std::string> concave_faces;  // faces whose plane cuts the domain
  bool convex = true;
  bool lipschitz = true;
  std::vector<CoarseEntity> entities;

  const CoarseEntity* find(const std::string& name) const;
  int block_index(const std::string& name) const;
};

const BlockComplex& catalog(const std::string& name);
Vec3 pyramid_base_corner(const Block& b, int su, int sv);
bool inside_block(const Block& b, const Vec3& x, double tol);
std::vector<std::string> catalog_names();

struct TetMesh {
  std::string geometry;
  int level = 0;
  double nominal_h = 1.0;  // cube edge length 2^-level
  double h = 0.0;          // realized max edge length
  double hmin = 0.0;

  std::vector<Vec3> verts;
  std::vector<std::array<int, 2>> edges;  // low id -> high id
  std::vector<std::array<int, 3>> faces;  // sorted triples
  std::vector<std::array<int, 4>> tets;   // positive volume
  std::vector<std::array<int, 4>> tets_ordered;  // vertex order used by refinement
  std::vector<int> block_of_tet;

  // local edge k of a tet joins local vertices kLocalEdges[k]
  std::vector<std::array<int, 6>> tet_edges;
  std::vector<std::array<int, 4>> tet_faces;  // face opposite local vertex i
  std::vector<std::array<int, 2>> face_tets;  // second entry -1 on the boundary
  std::vector<int> edge_tet_ptr, edge_tet_idx;
  std::vector<int> vert_edge_ptr, vert_edge_idx;
  Mask boundary_vert, boundary_edge, boundary_face;

  // submesh bookkeeping: ids in the mesh this one was cut from (empty for roots)
  std::vector<int> parent_vert, parent_edge;

  std::uint64_t uid = 0;  // content hash

  int nv() const { return static_cast<int>(verts.size()); }
  int ne() const { return static_cast<int>(edges.size()); }
  int nf() const { return static_cast<int>(faces.size()); }
  int nt() const { return static_cast<int>(tets.size()); }
  double edge_length(int e) const { return (verts[edges[e][1]] - verts[edges[e][0]]).norm(); }
  int find_edge(int a, int b) const;  // -1 if absent
};

inline constexpr int kLocalEdges[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};

TetMesh build_complex(const std::string& name, double h);
TetMesh refine(const TetMesh& mesh);
// Orientation, entity enumeration and adjacency from tets_ordered.
void finalize_mesh(TetMesh& mesh);
// Tets cut out of `mesh` restricted to the given blocks, vertex order preserved.
TetMesh submesh(const TetMesh& mesh, const std::vector<int>& blocks);
// Same for an arbitrary tet selection.
TetMesh submesh_tets(const TetMesh& mesh, const Mask& keep);
// The decomposition domain of a catalog geometry (submesh when it is a proper subset).
TetMesh domain_mesh(const TetMesh& full);

// Kuhn subdivision of a brick into cubes of side h (coordinates of each tet).
std::vector<std::array<Vec3, 4>> kuhn_tets(const Vec3& lo, const Vec3& hi, double h);

// Empty string when conforming and consistent, otherwise a description.
std::string check_conformity(const TetMesh& mesh);
double quasi_uniformity(const TetMesh& mesh);

// Fine entities geometrically contained in a coarse entity.
Mask entity_nodes(const TetMesh& mesh, const CoarseEntity& ent);
Mask edges_in(const TetMesh& mesh, const Mask& nodes);
Mask faces_in(const TetMesh& mesh, const Mask& nodes);
Mask nodes_of_edges(const TetMesh& mesh, const Mask& edges);
Mask nodes_of_tets(const TetMesh& mesh, const std::vector<int>& blocks);

struct TraceComponent {
  std::vector<int> entities;  // indices into TraceSet::entities
  bool lipschitz = true;
};

struct TraceSet {
  std::string geometry;
  std::vector<std::string> spec;
  std::vector<const CoarseEntity*> entities;
  std::vector<int> coarse_faces, coarse_edges, coarse_vertices;  // indices into entities
  Mask nodes, edges, faces;
  std::vector<Mask> ent_nodes;  // fine nodes of each entity
  std::vector<TraceComponent> components;
  bool isolated_vertex_union = false;
  bool covers_concave = false;

  bool empty() const { return entities.empty(); }
  int J() const { return static_cast<int>(components.size()); }
  // edges of Γ not lying inside a Γ face
  std::vector<int> free_edges() const;
  std::vector<int> free_vertices() const;
};

TraceSet tag_trace(const TetMesh& mesh, const std::vector<std::string>& spec);

// Whether a Lipschitz face trace lets G be extended across Gamma to a domain
// B, and whether that B can be taken convex.
struct ExtensionReport {
  bool satisfiable = false;
  bool extended_domain_convex = false;
};
ExtensionReport check_extension_condition(const TetMesh& mesh, const TraceSet& trace);

void write_mesh(std::ostream& os, const TetMesh& mesh, const TraceSet* trace = nullptr);
struct MeshFile {
  TetMesh mesh;
  std::vector<std::string> trace_spec;
};
MeshFile read_mesh(std::istream& is);

// Exact decimal for dyadic rationals.
std::string format_exact(double x);

}  // namespace helmdec::mesh
