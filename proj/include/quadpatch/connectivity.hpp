#ifndef QUADPATCH_CONNECTIVITY_HPP
#define QUADPATCH_CONNECTIVITY_HPP

#include <cmath>
#include <optional>
#include <vector>

#include "quadpatch/core.hpp"

namespace quadpatch {

struct FaceLink {
  int32_t block = 0;  // neighbor block
  int32_t face = 0;   // neighbor's face
  Orientation orient; // neighbor axes relative to this block
};

enum class CornerStatus {
  Linked,    // regular corner: exactly four blocks meet (possibly with repeats)
  Boundary,  // an adjacent face of this block is a physical boundary
  Cone,      // corner closes with other than four blocks (e.g. cubed sphere)
};

struct CornerLink {
  CornerStatus status = CornerStatus::Boundary;
  int32_t block = 0;   // diagonal block (status == Linked)
  int32_t corner = 0;  // its corner id facing back
  BlockTransition trans;
};

/// Static multiblock topology: which block faces abut which and with what
/// index orientation.  Immutable after construction.
class Connectivity {
 public:
  enum class MapKind { BrickPlane, CubedSphere };

  static Connectivity build_brick(int nx, int ny, bool periodic_x, bool periodic_y);
  static Connectivity build_cubed_sphere();

  int num_blocks() const { return num_blocks_; }
  MapKind map_kind() const { return map_kind_; }

  const std::optional<FaceLink>& face_link(int block, int face) const {
    return face_links_[size_t(block)][size_t(face)];
  }

  /// Chart transition into the face neighbor's coordinates; nullopt at a
  /// physical boundary.
  std::optional<BlockTransition> face_transition(int block, int face) const {
    const auto& link = face_links_[size_t(block)][size_t(face)];
    if (!link) return std::nullopt;
    return face_trans_[size_t(block)][size_t(face)];
  }

  const CornerLink& corner_link(int block, int corner) const {
    return corner_links_[size_t(block)][size_t(corner)];
  }

  /// Geometric map of a block-local point; bricks live in the z=0 plane,
  /// cubed-sphere blocks are projected gnomonically onto the unit sphere.
  DVec3 map_point(int block, double x, double y) const;

  /// 3-d position of a block corner (pre-projection cube geometry for the
  /// sphere; unit-square lattice for bricks).
  DVec3 block_corner(int block, int corner) const;

  std::vector<std::string> validate() const;

  // test hook: corrupt a link in place and re-derive nothing
  void set_face_link_for_test(int block, int face, std::optional<FaceLink> link) {
    face_links_[size_t(block)][size_t(face)] = link;
  }

  bool brick_periodic_x() const { return periodic_x_; }
  bool brick_periodic_y() const { return periodic_y_; }
  int brick_nx() const { return nx_; }
  int brick_ny() const { return ny_; }

 private:
  Connectivity() = default;

  void derive_corner_links();
  struct WalkResult {
    bool closed = false;
    bool hit_boundary = false;
    int steps = 0;
    int32_t block2 = 0, corner2 = 0;  // state after two crossings
    BlockTransition trans2;
    BlockTransition holonomy;  // full cycle transition when closed
  };
  WalkResult corner_walk(int block, int corner, int first_face) const;

  int num_blocks_ = 0;
  MapKind map_kind_ = MapKind::BrickPlane;
  std::vector<std::array<std::optional<FaceLink>, 4>> face_links_;
  std::vector<std::array<BlockTransition, 4>> face_trans_;
  std::vector<std::array<CornerLink, 4>> corner_links_;

  // brick geometry
  int nx_ = 1, ny_ = 1;
  bool periodic_x_ = false, periodic_y_ = false;

  // cubed-sphere geometry: per block, 4 corner points on the cube surface
  std::vector<std::array<DVec3, 4>> cube_corners_;
};

// ---------------------------------------------------------------------------

inline Connectivity Connectivity::build_brick(int nx, int ny, bool periodic_x,
                                              bool periodic_y) {
  require(nx >= 1 && ny >= 1, "brick dimensions must be positive");
  Connectivity c;
  c.map_kind_ = MapKind::BrickPlane;
  c.num_blocks_ = nx * ny;
  c.nx_ = nx;
  c.ny_ = ny;
  c.periodic_x_ = periodic_x;
  c.periodic_y_ = periodic_y;
  c.face_links_.resize(size_t(c.num_blocks_));
  c.face_trans_.resize(size_t(c.num_blocks_));

  auto id = [nx](int i, int j) { return j * nx + i; };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int b = id(i, j);
      for (int f = 0; f < 4; ++f) {
        IVec2 n = face_normal(f);
        int ni = i + int(n.x), nj = j + int(n.y);
        bool wrap_x = ni < 0 || ni >= nx;
        bool wrap_y = nj < 0 || nj >= ny;
        if ((wrap_x && !periodic_x) || (wrap_y && !periodic_y)) continue;
        ni = (ni + nx) % nx;
        nj = (nj + ny) % ny;
        c.face_links_[size_t(b)][size_t(f)] =
            FaceLink{int32_t(id(ni, nj)), int32_t(opposite_face(f)), Orientation(0)};
        // chart transition: one block over, regardless of periodic wrap
        c.face_trans_[size_t(b)][size_t(f)] =
            BlockTransition{Orientation(0), IVec2{0, 0} - n};
      }
    }
  }
  c.derive_corner_links();
  return c;
}

inline Connectivity Connectivity::build_cubed_sphere() {
  Connectivity c;
  c.map_kind_ = MapKind::CubedSphere;
  c.num_blocks_ = 6;
  c.face_links_.resize(6);
  c.face_trans_.resize(6);
  c.cube_corners_.resize(6);

  // Six faces of the cube [-1,1]^3; block corners in z-order of (xi, eta).
  auto v = [](double x, double y, double z) { return DVec3{x, y, z}; };
  const std::array<std::array<DVec3, 4>, 6> corners = {{
      // 0: z = -1, xi->x, eta->y
      {v(-1, -1, -1), v(1, -1, -1), v(-1, 1, -1), v(1, 1, -1)},
      // 1: z = +1
      {v(-1, -1, 1), v(1, -1, 1), v(-1, 1, 1), v(1, 1, 1)},
      // 2: y = -1, xi->x, eta->z
      {v(-1, -1, -1), v(1, -1, -1), v(-1, -1, 1), v(1, -1, 1)},
      // 3: y = +1
      {v(-1, 1, -1), v(1, 1, -1), v(-1, 1, 1), v(1, 1, 1)},
      // 4: x = -1, xi->y, eta->z
      {v(-1, -1, -1), v(-1, 1, -1), v(-1, -1, 1), v(-1, 1, 1)},
      // 5: x = +1
      {v(1, -1, -1), v(1, 1, -1), v(1, -1, 1), v(1, 1, 1)},
  }};
  c.cube_corners_.assign(corners.begin(), corners.end());

  auto same = [](const DVec3& a, const DVec3& b) {
    return a.x == b.x && a.y == b.y && a.z == b.z;
  };

  for (int b = 0; b < 6; ++b) {
    for (int f = 0; f < 4; ++f) {
      const auto [e0, e1] = face_corners(f);
      const DVec3 p0 = corners[size_t(b)][size_t(e0)];
      const DVec3 p1 = corners[size_t(b)][size_t(e1)];
      for (int n = 0; n < 6 && !c.face_links_[size_t(b)][size_t(f)]; ++n) {
        if (n == b) continue;
        for (int fn = 0; fn < 4; ++fn) {
          const auto [g0, g1] = face_corners(fn);
          const DVec3 q0 = corners[size_t(n)][size_t(g0)];
          const DVec3 q1 = corners[size_t(n)][size_t(g1)];
          bool fwd = same(p0, q0) && same(p1, q1);
          bool rev = same(p0, q1) && same(p1, q0);
          if (!fwd && !rev) continue;

          // Solve for the unique placement A with A n_f = -n_fn and
          // A t_f = +/- t_fn.
          IVec2 tf = corner_point(e1) - corner_point(e0);
          IVec2 tn = corner_point(g1) - corner_point(g0);
          IVec2 want_t = fwd ? tn : IVec2{0, 0} - tn;
          IVec2 want_n = IVec2{0, 0} - face_normal(fn);
          for (int code = 0; code < 8; ++code) {
            Orientation a(code);
            if (a.apply(face_normal(f)) == want_n && a.apply(tf) == want_t) {
              IVec2 match = corner_point(fwd ? g0 : g1);
              IVec2 t = match - a.apply(corner_point(e0));
              c.face_links_[size_t(b)][size_t(f)] = FaceLink{int32_t(n), int32_t(fn), a};
              c.face_trans_[size_t(b)][size_t(f)] = BlockTransition{a, t};
              break;
            }
          }
          break;
        }
      }
    }
  }
  c.derive_corner_links();
  return c;
}

inline Connectivity::WalkResult Connectivity::corner_walk(int block, int corner,
                                                          int first_face) const {
  WalkResult r;
  int cb = block, cc = corner, cross = first_face;
  BlockTransition T{Orientation(0), {0, 0}};
  for (int step = 1; step <= 8; ++step) {
    const auto& link = face_links_[size_t(cb)][size_t(cross)];
    if (!link) {
      r.hit_boundary = true;
      r.steps = step - 1;
      return r;
    }
    const BlockTransition& ft = face_trans_[size_t(cb)][size_t(cross)];
    T = T.then(ft);
    IVec2 mapped = ft.apply_corner(corner_point(cc));
    cb = link->block;
    cc = corner_from_point(mapped);
    if (step == 2) {
      r.block2 = int32_t(cb);
      r.corner2 = int32_t(cc);
      r.trans2 = T;
    }
    if (cb == block && cc == corner) {
      r.closed = true;
      r.steps = step;
      r.holonomy = T;
      return r;
    }
    const auto faces = corner_faces(cc);
    const int arrived = link->face;
    cross = (faces[0] == arrived) ? faces[1] : faces[0];
  }
  r.steps = 8;
  return r;
}

inline void Connectivity::derive_corner_links() {
  corner_links_.assign(size_t(num_blocks_), {});
  for (int b = 0; b < num_blocks_; ++b) {
    for (int cn = 0; cn < 4; ++cn) {
      CornerLink cl;
      const auto faces = corner_faces(cn);
      const bool fx_open = !face_links_[size_t(b)][size_t(faces[0])].has_value();
      const bool fy_open = !face_links_[size_t(b)][size_t(faces[1])].has_value();
      if (fx_open || fy_open) {
        cl.status = CornerStatus::Boundary;
        corner_links_[size_t(b)][size_t(cn)] = cl;
        continue;
      }
      WalkResult fwd = corner_walk(b, cn, faces[0]);
      WalkResult bwd = corner_walk(b, cn, faces[1]);
      require(!(fwd.closed && fwd.steps > 4), "more than four blocks meet at a corner");
      require(fwd.closed || fwd.hit_boundary, "corner cycle does not close");
      if (fwd.closed && bwd.closed && fwd.steps == 4 && bwd.steps == 4 &&
          fwd.block2 == bwd.block2 && fwd.corner2 == bwd.corner2 &&
          fwd.trans2 == bwd.trans2) {
        cl.status = CornerStatus::Linked;
        cl.block = fwd.block2;
        cl.corner = fwd.corner2;
        cl.trans = fwd.trans2;
      } else {
        // Both adjacent faces are linked but the corner does not close with
        // four blocks; the corner region has no diagonal source and is filled
        // by the fallback corner fill.
        cl.status = CornerStatus::Cone;
      }
      corner_links_[size_t(b)][size_t(cn)] = cl;
    }
  }
}

inline DVec3 Connectivity::map_point(int block, double x, double y) const {
  if (map_kind_ == MapKind::BrickPlane) {
    const int bi = block % nx_, bj = block / nx_;
    return {x + bi, y + bj, 0.0};
  }
  const auto& c = cube_corners_[size_t(block)];
  const double px = c[0].x + x * (c[1].x - c[0].x) + y * (c[2].x - c[0].x);
  const double py = c[0].y + x * (c[1].y - c[0].y) + y * (c[2].y - c[0].y);
  const double pz = c[0].z + x * (c[1].z - c[0].z) + y * (c[2].z - c[0].z);
  const double r = std::sqrt(px * px + py * py + pz * pz);
  return {px / r, py / r, pz / r};
}

inline DVec3 Connectivity::block_corner(int block, int corner) const {
  if (map_kind_ == MapKind::BrickPlane) {
    const int bi = block % nx_, bj = block / nx_;
    IVec2 p = corner_point(corner);
    return {double(bi + p.x), double(bj + p.y), 0.0};
  }
  return cube_corners_[size_t(block)][size_t(corner)];
}

inline std::vector<std::string> Connectivity::validate() const {
  std::vector<std::string> out;
  auto note = [&out](int b, int f, const std::string& what) {
    out.push_back("block " + std::to_string(b) + " face " + std::to_string(f) + ": " + what);
  };
  for (int b = 0; b < num_blocks_; ++b) {
    for (int f = 0; f < 4; ++f) {
      const auto& link = face_links_[size_t(b)][size_t(f)];
      if (!link) continue;
      if (link->block < 0 || link->block >= num_blocks_ || link->face < 0 || link->face > 3) {
        note(b, f, "link out of range");
        continue;
      }
      const auto& back = face_links_[size_t(link->block)][size_t(link->face)];
      if (!back) {
        note(b, f, "reverse link missing");
        continue;
      }
      if (back->block != b || back->face != f)
        note(b, f, "reverse link does not return");
      if (!(back->orient == link->orient.inverse()))
        note(b, f, "reverse orientation is not the inverse");
      if (!(link->orient.apply(face_normal(f)) == IVec2{0, 0} - face_normal(link->face)))
        note(b, f, "orientation inconsistent with face pairing");
    }
    for (int cn = 0; cn < 4; ++cn) {
      const auto faces = corner_faces(cn);
      if (!face_links_[size_t(b)][size_t(faces[0])] || !face_links_[size_t(b)][size_t(faces[1])])
        continue;
      WalkResult fwd = corner_walk(b, cn, faces[0]);
      WalkResult bwd = corner_walk(b, cn, faces[1]);
      if (fwd.closed && fwd.steps == 4) {
        if (!fwd.holonomy.identity())
          out.push_back("block " + std::to_string(b) + " corner " + std::to_string(cn) +
                        ": four-block corner has nontrivial holonomy");
        if (!bwd.closed || bwd.block2 != fwd.block2 || bwd.corner2 != fwd.corner2 ||
            !(bwd.trans2 == fwd.trans2))
          out.push_back("block " + std::to_string(b) + " corner " + std::to_string(cn) +
                        ": corner compositions disagree");
      } else if (fwd.closed && fwd.steps > 4) {
        out.push_back("block " + std::to_string(b) + " corner " + std::to_string(cn) +
                      ": more than four blocks at corner");
      }
    }
  }
  return out;
}

}  // namespace quadpatch

#endif  // QUADPATCH_CONNECTIVITY_HPP
