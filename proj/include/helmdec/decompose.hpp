// Copyright (c) 2026 helmdec contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "helmdec/operators.hpp"

#include <optional>

namespace helmdec::dec {

using mesh::CoarseEntity;
using mesh::TetMesh;
using mesh::TraceSet;

// Which right-hand side the route's stability bound uses.
enum class Claim { SemiLog, SemiNolog, FullLog, FullNolog };
// Bound claimed for ||w||_0 + ||p||_1: against ||v||_0, against ||v||_curl,
// or only the H1 seminorm of p against ||v||_curl.
enum class PClaim { L2, Full, Seminorm };

std::string claim_name(Claim c);
std::string pclaim_name(PClaim c);
bool claim_has_log(Claim c);
bool claim_is_semi(Claim c);

struct Ratios {
  double w_semi = 0, w_full = 0;  // ||w||_1 / ||curl v||_0, ||w||_1 / ||v||_curl
  double R_semi = 0, R_full = 0;  // h^-1 ||R||_0 over the same
  double p_L2 = 0, p_full = 0;    // (||w||_0 + ||p||_1) / ||v||_0, / ||v||_curl
  double v_L2 = 0, v_curl = 0, curl_v = 0;
  double w_H1 = 0, w_L2 = 0, p_H1 = 0, R_L2 = 0;
};

// One loop reduction: C against face flux / constrained length.
struct LoopRecord {
  double C = 0, flux = 0, length = 0;
  double stokes_defect() const { return std::abs(C - flux / length); }
};

struct HelmholtzSplit {
  Vec p, w, R;  // nodal, nodal vector (interleaved), edge
  std::string path;
  Claim claim = Claim::SemiLog;
  PClaim pclaim = PClaim::Full;
  Ratios ratios;
  std::vector<LoopRecord> loops;
  Mask zero_nodes;  // p and w vanish here exactly
  Mask zero_edges;  // R vanishes here exactly
};

// Fine-level description of a set where the split must vanish.
struct Gamma {
  Mask nodes, edges, faces;
  static Gamma empty(const TetMesh& m);
  bool is_empty() const { return count(nodes) == 0; }
};
Gamma gamma_of_entities(const TetMesh& m, const std::vector<const CoarseEntity*>& ents);
Gamma gamma_of_faces(const TetMesh& m, const Mask& faces);
Gamma gamma_of_edges(const TetMesh& m, const Mask& edges);
Gamma gamma_of_trace(const TraceSet& t);
Gamma operator|(const Gamma& a, const Gamma& b);

Ratios measure(const TetMesh& m, const Vec& v, const HelmholtzSplit& s);
// max_e |v - G p - r_h w - R| / max(max_e |v|, tiny)
double identity_residual(const TetMesh& m, const Vec& v, const HelmholtzSplit& s);

// Two-Poisson kernel: p from the gradient projection, w from the vector
// Poisson problem with data curl v, both with homogeneous Dirichlet values on
// gamma.nodes (mean-zero gauge when empty), w passed through Scott-Zhang, and
// R the exact residual.
HelmholtzSplit kernel_convex(const TetMesh& m, const Vec& v, const Gamma& gamma);

// v vanishes on the boundary of the face union F.  Split by curl-harmonic
// extension of the F trace and run the kernel on F_c and F.  `extra` lists
// additional faces/edges (disjoint from the interior of F) where v vanishes
// and the result has to vanish too.
HelmholtzSplit decompose_loop(const TetMesh& m, const Vec& v, const Mask& F_faces,
                              const Gamma& extra);

// One loop reduction: F a face union, E a path of fine edges on its boundary
// where v vanishes.
struct EdgeTask {
  Mask F_faces;
  Mask E_edges;
};
// Loop reductions for each task followed by decompose_loop on the union of
// the faces.  Loops may only meet each other inside the E sets.
HelmholtzSplit edge_machinery(const TetMesh& m, const Vec& v, const std::vector<EdgeTask>& tasks,
                              const Gamma& extra);

HelmholtzSplit decompose_face_trace(const TetMesh& m, const Vec& v, const TraceSet& trace);
HelmholtzSplit decompose_edge(const TetMesh& m, const Vec& v, const CoarseEntity& E);
HelmholtzSplit decompose_isolated_vertex_union(const TetMesh& m, const Vec& v,
                                               const TraceSet& trace);
HelmholtzSplit decompose_face_plus_edge(const TetMesh& m, const Vec& v,
                                        const std::vector<const CoarseEntity*>& faces,
                                        const CoarseEntity& E);
HelmholtzSplit decompose_disjoint_edges(const TetMesh& m, const Vec& v,
                                        const std::vector<const CoarseEntity*>& edges);

// Compatibility data of a vertex junction.
struct JunctionReport {
  std::vector<double> F;        // functionals between consecutive constrained blocks
  std::vector<double> values;   // p(v0) forced by each block (NaN when unconstrained)
  std::vector<std::string> faces, edges;  // F_i and E_i used per block
  double tol = 0;
  bool violated = false;
  double max_abs() const;
};

// Thrown by decompose() on a vertex junction whose functionals do not vanish.
class CompatibilityError : public PreconditionError {
 public:
  CompatibilityError(const std::string& msg, JunctionReport r)
      : PreconditionError(msg), report(std::move(r)) {}
  JunctionReport report;
};

struct JunctionOutcome {
  std::optional<HelmholtzSplit> split;
  JunctionReport report;
};

HelmholtzSplit decompose_edge_junction(const TetMesh& m, const Vec& v, const TraceSet& trace);
JunctionOutcome decompose_vertex_junction(const TetMesh& m, const Vec& v, const TraceSet& trace);
// phi_{dF_{i+1}}(v0) - phi_{dF_i}(v0) for the faces chosen on every block.
JunctionReport junction_functionals(const TetMesh& m, const Vec& v, const TraceSet& trace);

// delta times the gradient of the hat function of the junction vertex,
// restricted to the last gated block; shifts that block's functional by delta.
Vec junction_perturbation(const TetMesh& m, const TraceSet& trace, double delta);

// Dispatcher over the trace metadata.  Throws PreconditionError naming the
// offending fine edge when v has a nonzero moment on Gamma, and
// CompatibilityError when a vertex junction refuses v.
HelmholtzSplit decompose(const TetMesh& m, const Vec& v, const TraceSet& trace);

// Seeded uniform moments in [-1, 1] with the Gamma moments zeroed; on vertex
// junctions the field is then corrected so every functional vanishes.
Vec random_field(const TetMesh& m, const TraceSet& trace, std::uint64_t seed);
Vec random_nodal(int n, std::uint64_t seed);
// Nonzero moment on Gamma -> description of the first such edge, else empty.
std::string gamma_violation(const TetMesh& m, const Vec& v, const TraceSet& trace);

}  // namespace helmdec::dec
