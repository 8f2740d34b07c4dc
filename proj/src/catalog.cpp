// Copyright (c) 2026 helmdec contributors
// SPDX-License-Identifier: Apache-2.0
//
// Closed catalog of block complexes.  All coordinates are dyadic so that
// refined vertices stay exactly representable.

#include "helmdec/mesh.hpp"

#include <map>
#include <mutex>

namespace helmdec::mesh {
namespace {

const char kAxis[3] = {'x', 'y', 'z'};

Block brick(const std::string& name, Vec3 lo, Vec3 hi) {
  Block b;
  b.name = name;
  b.shape = BlockShape::Brick;
  b.lo = lo;
  b.hi = hi;
  return b;
}

Block pyramid(const std::string& name, Vec3 apex, int axis, int dir) {
  Block b;
  b.name = name;
  b.shape = BlockShape::Pyramid;
  b.apex = apex;
  b.axis = axis;
  b.dir = dir;
  return b;
}

void add_brick_entities(BlockComplex& c, int bi) {
  const Block& b = c.blocks[bi];
  auto corner = [&](int sx, int sy, int sz) {
    return Vec3(sx ? b.hi.x() : b.lo.x(), sy ? b.hi.y() : b.lo.y(), sz ? b.hi.z() : b.lo.z());
  };
  for (int a = 0; a < 3; ++a) {
    for (int s = 0; s < 2; ++s) {
      int u = (a + 1) % 3, v = (a + 2) % 3;
      if (u > v) std::swap(u, v);
      CoarseEntity f;
      f.name = b.name + "." + kAxis[a] + char('0' + s);
      f.dim = 2;
      f.block = bi;
      int sel[3];
      const int uv[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
      for (auto& q : uv) {
        sel[a] = s;
        sel[u] = q[0];
        sel[v] = q[1];
        f.pts.push_back(corner(sel[0], sel[1], sel[2]));
      }
      f.normal = Vec3::Zero();
      f.normal[a] = s ? 1.0 : -1.0;
      c.entities.push_back(f);
    }
  }
  for (int a = 0; a < 3; ++a) {
    for (int bb = a + 1; bb < 3; ++bb) {
      int free_axis = 3 - a - bb;
      for (int sa = 0; sa < 2; ++sa) {
        for (int sb = 0; sb < 2; ++sb) {
          CoarseEntity e;
          e.name = b.name + "." + kAxis[a] + char('0' + sa) + kAxis[bb] + char('0' + sb);
          e.dim = 1;
          e.block = bi;
          int sel[3];
          sel[a] = sa;
          sel[bb] = sb;
          for (int t = 0; t < 2; ++t) {
            sel[free_axis] = t;
            e.pts.push_back(corner(sel[0], sel[1], sel[2]));
          }
          c.entities.push_back(e);
        }
      }
    }
  }
  for (int sx = 0; sx < 2; ++sx)
    for (int sy = 0; sy < 2; ++sy)
      for (int sz = 0; sz < 2; ++sz) {
        CoarseEntity v;
        v.name = b.name + ".x" + char('0' + sx) + "y" + char('0' + sy) + "z" + char('0' + sz);
        v.dim = 0;
        v.block = bi;
        v.pts.push_back(corner(sx, sy, sz));
        c.entities.push_back(v);
      }
}

// Base corners of a pyramid indexed by (su, sv) in {0,1}^2.
Vec3 pyramid_corner(const Block& b, int su, int sv) {
  int u = (b.axis + 1) % 3, v = (b.axis + 2) % 3;
  if (u > v) std::swap(u, v);
  Vec3 p = b.apex;
  p[b.axis] += b.dir * b.height;
  p[u] += (su ? 1 : -1) * b.half_width;
  p[v] += (sv ? 1 : -1) * b.half_width;
  return p;
}

void add_pyramid_entities(BlockComplex& c, int bi) {
  const Block& b = c.blocks[bi];
  int u = (b.axis + 1) % 3, v = (b.axis + 2) % 3;
  if (u > v) std::swap(u, v);
  const std::string cu(1, kAxis[u]), cv(1, kAxis[v]);
  Vec3 centroid = b.apex + 0.75 * b.dir * b.height * Vec3::Unit(b.axis);
  auto orient = [&](CoarseEntity& f) {
    Vec3 n = (f.pts[1] - f.pts[0]).cross(f.pts[2] - f.pts[0]).normalized();
    if (n.dot(f.pts[0] - centroid) < 0) n = -n;
    f.normal = n;
  };
  CoarseEntity base;
  base.name = b.name + ".base";
  base.dim = 2;
  base.block = bi;
  base.pts = {pyramid_corner(b, 0, 0), pyramid_corner(b, 1, 0), pyramid_corner(b, 1, 1),
              pyramid_corner(b, 0, 1)};
  orient(base);
  c.entities.push_back(base);
  // lateral faces: side s of transverse axis u or v
  for (int which = 0; which < 2; ++which) {
    for (int s = 0; s < 2; ++s) {
      CoarseEntity f;
      f.name = b.name + ".lat_" + (which == 0 ? cu : cv) + char('0' + s);
      f.dim = 2;
      f.block = bi;
      Vec3 p0 = which == 0 ? pyramid_corner(b, s, 0) : pyramid_corner(b, 0, s);
      Vec3 p1 = which == 0 ? pyramid_corner(b, s, 1) : pyramid_corner(b, 1, s);
      f.pts = {b.apex, p0, p1};
      orient(f);
      c.entities.push_back(f);
    }
  }
  for (int which = 0; which < 2; ++which) {
    for (int s = 0; s < 2; ++s) {
      CoarseEntity e;
      e.name = b.name + ".base_" + (which == 0 ? cu : cv) + char('0' + s);
      e.dim = 1;
      e.block = bi;
      if (which == 0)
        e.pts = {pyramid_corner(b, s, 0), pyramid_corner(b, s, 1)};
      else
        e.pts = {pyramid_corner(b, 0, s), pyramid_corner(b, 1, s)};
      c.entities.push_back(e);
    }
  }
  for (int su = 0; su < 2; ++su)
    for (int sv = 0; sv < 2; ++sv) {
      CoarseEntity e;
      e.name = b.name + ".lat_" + cu + char('0' + su) + cv + char('0' + sv);
      e.dim = 1;
      e.block = bi;
      e.pts = {b.apex, pyramid_corner(b, su, sv)};
      c.entities.push_back(e);
    }
  CoarseEntity apex;
  apex.name = b.name + ".apex";
  apex.dim = 0;
  apex.block = bi;
  apex.pts = {b.apex};
  c.entities.push_back(apex);
  for (int su = 0; su < 2; ++su)
    for (int sv = 0; sv < 2; ++sv) {
      CoarseEntity e;
      e.name = b.name + ".base_" + cu + char('0' + su) + cv + char('0' + sv);
      e.dim = 0;
      e.block = bi;
      e.pts = {pyramid_corner(b, su, sv)};
      c.entities.push_back(e);
    }
}

BlockComplex finish(BlockComplex c) {
  for (int i = 0; i < static_cast<int>(c.blocks.size()); ++i) {
    if (c.blocks[i].shape == BlockShape::Brick)
      add_brick_entities(c, i);
    else
      add_pyramid_entities(c, i);
  }
  if (c.domain_blocks.empty())
    for (int i = 0; i < static_cast<int>(c.blocks.size()); ++i) c.domain_blocks.push_back(i);
  return c;
}

std::map<std::string, BlockComplex> make_catalog() {
  std::map<std::string, BlockComplex> m;
  {
    BlockComplex c;
    c.name = "unit_cube";
    c.blocks = {brick("G", {0, 0, 0}, {1, 1, 1})};
    m[c.name] = finish(c);
  }
  {
    BlockComplex c;
    c.name = "three_cube_L";
    c.blocks = {brick("D1", {0, 0, 0}, {1, 1, 1}), brick("D2", {1, 0, 0}, {2, 1, 1}),
                brick("D3", {0, 1, 0}, {1, 2, 1})};
    c.junctions = {{0, 1, JunctionKind::Face}, {0, 2, JunctionKind::Face},
                   {1, 2, JunctionKind::Edge}};
    c.sigma1 = {0};
    c.concave_faces = {"D2.y1", "D3.x1"};
    c.convex = false;
    m[c.name] = finish(c);
  }
  {
    BlockComplex c;
    c.name = "pyramid";
    c.blocks = {pyramid("P", {0.5, 0.5, 1.0}, 2, -1)};
    m[c.name] = finish(c);
  }
  {
    BlockComplex c;
    c.name = "cube_in_box";
    c.blocks = {brick("G", {0, 0, 0}, {1, 1, 1}), brick("Dy", {0, 1, 0}, {1, 2, 1}),
                brick("Dz", {0, 0, 1}, {1, 1, 2}), brick("Dyz", {0, 1, 1}, {1, 2, 2})};
    c.junctions = {{0, 1, JunctionKind::Face}, {0, 2, JunctionKind::Face},
                   {0, 3, JunctionKind::Edge}, {1, 3, JunctionKind::Face},
                   {2, 3, JunctionKind::Face}, {1, 2, JunctionKind::Edge}};
    c.domain_blocks = {0};
    m[c.name] = finish(c);
  }
  {
    BlockComplex c;
    c.name = "four_edge_cube";
    c.blocks = {brick("G", {0, 0, 0}, {2, 2, 2})};
    m[c.name] = finish(c);
  }
  {
    BlockComplex c;
    c.name = "edge_junction_pair";
    c.blocks = {brick("G1", {0, 0, 0}, {1, 1, 1}), brick("G2", {1, 1, 0}, {2, 2, 1})};
    c.junctions = {{0, 1, JunctionKind::Edge}};
    c.convex = false;
    c.lipschitz = false;
    m[c.name] = finish(c);
  }
  {
    BlockComplex c;
    c.name = "vertex_junction_pair";
    c.blocks = {brick("G1", {0, 0, 0}, {1, 1, 1}), brick("G2", {1, 1, 1}, {2, 2, 2})};
    c.junctions = {{0, 1, JunctionKind::Vertex}};
    c.convex = false;
    c.lipschitz = false;
    m[c.name] = finish(c);
  }
  {
    BlockComplex c;
    c.name = "vertex_junction_star";
    c.blocks = {pyramid("P1", {0, 0, 0}, 0, 1), pyramid("P2", {0, 0, 0}, 1, 1),
                pyramid("P3", {0, 0, 0}, 2, 1)};
    c.junctions = {{0, 1, JunctionKind::Vertex}, {0, 2, JunctionKind::Vertex},
                   {1, 2, JunctionKind::Vertex}};
    c.convex = false;
    c.lipschitz = false;
    m[c.name] = finish(c);
  }
  return m;
}

const std::map<std::string, BlockComplex>& all() {
  static const std::map<std::string, BlockComplex> m = make_catalog();
  return m;
}

}  // namespace

const CoarseEntity* BlockComplex::find(const std::string& n) const {
  for (const auto& e : entities)
    if (e.name == n) return &e;
  return nullptr;
}

int BlockComplex::block_index(const std::string& n) const {
  for (int i = 0; i < static_cast<int>(blocks.size()); ++i)
    if (blocks[i].name == n) return i;
  return -1;
}

const BlockComplex& catalog(const std::string& name) {
  auto it = all().find(name);
  if (it == all().end()) throw PreconditionError("unknown geometry '" + name + "'");
  return it->second;
}

std::vector<std::string> catalog_names() {
  return {"unit_cube",          "three_cube_L",         "pyramid",
          "cube_in_box",        "four_edge_cube",       "edge_junction_pair",
          "vertex_junction_pair", "vertex_junction_star"};
}

// Base corners are shared with the mesher.
Vec3 pyramid_base_corner(const Block& b, int su, int sv) { return pyramid_corner(b, su, sv); }

}  // namespace helmdec::mesh
