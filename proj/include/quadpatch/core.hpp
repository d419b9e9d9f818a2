#ifndef QUADPATCH_CORE_HPP
#define QUADPATCH_CORE_HPP

#include <array>
#include <cstdint>
#include <compare>
#include <stdexcept>
#include <string>

namespace quadpatch {

struct IVec2 {
  int64_t x = 0, y = 0;
  friend IVec2 operator+(IVec2 a, IVec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend IVec2 operator-(IVec2 a, IVec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend IVec2 operator*(int64_t s, IVec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(IVec2 a, IVec2 b) = default;
};

struct DVec2 {
  double x = 0, y = 0;
};

struct DVec3 {
  double x = 0, y = 0, z = 0;
};

/// Placement of one block's index axes relative to a neighbor: the dihedral
/// group of the square.  Codes 0..3 are counterclockwise rotations by
/// 0/90/180/270 degrees, codes 4..7 the reflected placements.
class Orientation {
 public:
  constexpr Orientation() = default;
  constexpr explicit Orientation(int code) : code_(code) {
    if (code < 0 || code > 7) throw std::invalid_argument("orientation code out of range");
  }

  constexpr int code() const { return code_; }
  constexpr bool is_identity() const { return code_ == 0; }

  /// Row-major 2x2 matrix entries {axx, axy, ayx, ayy}.
  constexpr std::array<int, 4> matrix() const { return kMatrix[code_]; }

  constexpr IVec2 apply(IVec2 v) const {
    const auto& a = kMatrix[code_];
    return {a[0] * v.x + a[1] * v.y, a[2] * v.x + a[3] * v.y};
  }

  constexpr Orientation inverse() const { return Orientation(kInverse[code_]); }

  /// Composition: (a.compose(b)).apply(v) == a.apply(b.apply(v)).
  constexpr Orientation compose(Orientation rhs) const {
    return Orientation(kCompose[code_][rhs.code_]);
  }

  friend constexpr bool operator==(Orientation a, Orientation b) { return a.code_ == b.code_; }

 private:
  int code_ = 0;

  static constexpr std::array<std::array<int, 4>, 8> kMatrix = {{
      {1, 0, 0, 1},    // 0: identity
      {0, -1, 1, 0},   // 1: rot 90
      {-1, 0, 0, -1},  // 2: rot 180
      {0, 1, -1, 0},   // 3: rot 270
      {1, 0, 0, -1},   // 4: reflect y
      {-1, 0, 0, 1},   // 5: reflect x
      {0, 1, 1, 0},    // 6: reflect across diagonal
      {0, -1, -1, 0},  // 7: reflect across anti-diagonal
  }};

  static constexpr int mat_to_code(std::array<int, 4> m) {
    for (int c = 0; c < 8; ++c)
      if (kMatrix[c] == m) return c;
    return -1;
  }

  static constexpr std::array<std::array<int, 8>, 8> make_compose() {
    std::array<std::array<int, 8>, 8> t{};
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b) {
        const auto& ma = kMatrix[a];
        const auto& mb = kMatrix[b];
        std::array<int, 4> p = {ma[0] * mb[0] + ma[1] * mb[2], ma[0] * mb[1] + ma[1] * mb[3],
                                ma[2] * mb[0] + ma[3] * mb[2], ma[2] * mb[1] + ma[3] * mb[3]};
        t[a][b] = mat_to_code(p);
      }
    return t;
  }

  static constexpr std::array<int, 8> make_inverse() {
    std::array<int, 8> inv{};
    auto comp = make_compose();
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b)
        if (comp[a][b] == 0) inv[a] = b;
    return inv;
  }

  static constexpr std::array<std::array<int, 8>, 8> kCompose = make_compose();
  static constexpr std::array<int, 8> kInverse = make_inverse();
};

/// Affine chart transition between two blocks: p_nbr = A p + t with p in this
/// block's unit-square coordinates.  t is integral because charts are unit
/// squares glued along complete faces.
struct BlockTransition {
  Orientation a;
  IVec2 t;

  IVec2 apply_corner(IVec2 p) const { return a.apply(p) + t; }

  BlockTransition inverse() const {
    Orientation ai = a.inverse();
    IVec2 ti = IVec2{0, 0} - ai.apply(t);
    return {ai, ti};
  }

  /// this->then(next): first this transition, then next.
  BlockTransition then(const BlockTransition& next) const {
    return {next.a.compose(a), next.a.apply(t) + next.t};
  }

  bool identity() const { return a.is_identity() && t == IVec2{0, 0}; }
  friend bool operator==(const BlockTransition&, const BlockTransition&) = default;
};

/// Leaf placeholder: block id, refinement level, integer coordinates in units
/// of 2^-level of the block edge (0 <= x,y < 2^level).
struct Quadrant {
  int32_t block = 0;
  int32_t level = 0;
  int32_t x = 0;
  int32_t y = 0;

  friend bool operator==(const Quadrant&, const Quadrant&) = default;
};

inline constexpr int kMaxLevel = 24;

namespace morton {

inline uint64_t spread_bits(uint64_t v) {
  v &= 0xffffffffull;
  v = (v | (v << 16)) & 0x0000ffff0000ffffull;
  v = (v | (v << 8)) & 0x00ff00ff00ff00ffull;
  v = (v | (v << 4)) & 0x0f0f0f0f0f0f0f0full;
  v = (v | (v << 2)) & 0x3333333333333333ull;
  v = (v | (v << 1)) & 0x5555555555555555ull;
  return v;
}

inline uint64_t interleave(uint32_t x, uint32_t y) {
  return spread_bits(x) | (spread_bits(y) << 1);
}

}  // namespace morton

/// Key ordering leaves of one block along the z-shaped space-filling curve.
/// Coordinates are scaled to kMaxLevel so that keys of any two
/// non-overlapping quadrants compare consistently; the level breaks ties
/// between a quadrant and its ancestors during intermediate states.
struct MortonKey {
  uint64_t scaled;
  int32_t level;

  static MortonKey of(const Quadrant& q) {
    const int shift = kMaxLevel - q.level;
    return {morton::interleave(uint32_t(q.x) << shift, uint32_t(q.y) << shift), q.level};
  }

  friend auto operator<=>(const MortonKey&, const MortonKey&) = default;
};

/// Packed id usable as a hash/map key; unique per (block, level, x, y).
inline uint64_t quad_id(const Quadrant& q) {
  return (uint64_t(uint32_t(q.block)) << 55) | (uint64_t(q.level) << 50) |
         (uint64_t(uint32_t(q.x)) << 25) | uint64_t(uint32_t(q.y));
}

inline bool morton_less(const Quadrant& a, const Quadrant& b) {
  if (a.block != b.block) return a.block < b.block;
  return MortonKey::of(a) < MortonKey::of(b);
}

/// Faces are numbered 0:-x, 1:+x, 2:-y, 3:+y; corners z-order
/// 0:(-,-), 1:(+,-), 2:(-,+), 3:(+,+).
inline constexpr IVec2 face_normal(int face) {
  constexpr IVec2 n[4] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
  return n[face];
}

/// Endpoints of a face as corner ids, ordered by corner id.
inline constexpr std::array<int, 2> face_corners(int face) {
  constexpr std::array<int, 2> fc[4] = {{0, 2}, {1, 3}, {0, 1}, {2, 3}};
  return fc[face];
}

/// The two faces touching a corner: {x-face, y-face}.
inline constexpr std::array<int, 2> corner_faces(int corner) {
  constexpr std::array<int, 2> cf[4] = {{0, 2}, {1, 2}, {0, 3}, {1, 3}};
  return cf[corner];
}

inline constexpr IVec2 corner_point(int corner) {
  return {corner & 1, (corner >> 1) & 1};
}

inline constexpr IVec2 corner_offset(int corner) {
  return {(corner & 1) ? 1 : -1, (corner & 2) ? 1 : -1};
}

inline int corner_from_point(IVec2 p) {
  return int(p.x) | (int(p.y) << 1);
}

inline int opposite_face(int face) { return face ^ 1; }

[[noreturn]] inline void fail(const std::string& msg) { throw std::runtime_error(msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace quadpatch

#endif  // QUADPATCH_CORE_HPP
