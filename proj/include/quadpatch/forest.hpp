#ifndef QUADPATCH_FOREST_HPP
#define QUADPATCH_FOREST_HPP

#include <algorithm>
#include <optional>
#include <sstream>
#include <unordered_map>
#include <vector>

#include "quadpatch/connectivity.hpp"
#include "quadpatch/core.hpp"

namespace quadpatch {

inline Quadrant quad_parent(const Quadrant& q) {
  return {q.block, q.level - 1, q.x >> 1, q.y >> 1};
}

inline std::array<Quadrant, 4> quad_children(const Quadrant& q) {
  const int32_t l = q.level + 1, x = q.x * 2, y = q.y * 2;
  return {Quadrant{q.block, l, x, y}, Quadrant{q.block, l, x + 1, y},
          Quadrant{q.block, l, x, y + 1}, Quadrant{q.block, l, x + 1, y + 1}};
}

/// Child index within the parent (z-order 0..3).
inline int quad_child_id(const Quadrant& q) { return (q.x & 1) | ((q.y & 1) << 1); }

inline bool is_family(const std::array<Quadrant, 4>& f) {
  if (f[0].level < 1) return false;
  const Quadrant p = quad_parent(f[0]);
  for (int k = 0; k < 4; ++k) {
    if (f[size_t(k)].block != f[0].block || f[size_t(k)].level != f[0].level) return false;
    if (!(quad_parent(f[size_t(k)]) == p) || quad_child_id(f[size_t(k)]) != k) return false;
  }
  return true;
}

struct NeighborInfo {
  enum Kind { SameSize, DoubleSize, HalfSize, Boundary };
  Kind kind = Boundary;
  Quadrant self;
  int dir = 0;  // 0..3 face, 4..7 corner
  std::array<Quadrant, 2> nbr{};
  int count = 0;
  std::array<int, 2> which_half{};  // HalfSize face: position along the shared face
  BlockTransition trans;            // chart transition self-block -> neighbor-block
  bool cone = false;                // corner with no diagonal source (e.g. cubed sphere)

  bool across_block() const { return !trans.identity(); }
  Orientation orientation() const { return trans.a; }
  bool is_face() const { return dir < 4; }
};

/// Per-block sets of leaf quadrants, Morton-ordered, with an ownership map
/// over logical ranks.
class Forest {
 public:
  Forest(const Connectivity& conn, int level) : conn_(&conn) {
    require(level >= 0 && level <= kMaxLevel, "level beyond coordinate capacity");
    leaves_.resize(size_t(conn.num_blocks()));
    const int32_t n = int32_t(1) << level;
    for (int b = 0; b < conn.num_blocks(); ++b) {
      auto& v = leaves_[size_t(b)];
      v.reserve(size_t(n) * size_t(n));
      for (int32_t y = 0; y < n; ++y)
        for (int32_t x = 0; x < n; ++x) v.push_back({b, level, x, y});
      std::sort(v.begin(), v.end(), morton_less);
    }
    owners_.resize(size_t(conn.num_blocks()));
    for (int b = 0; b < conn.num_blocks(); ++b)
      owners_[size_t(b)].assign(leaves_[size_t(b)].size(), 0);
    rebuild_index();
  }

  const Connectivity& connectivity() const { return *conn_; }

  int64_t leaf_count() const {
    int64_t n = 0;
    for (const auto& v : leaves_) n += int64_t(v.size());
    return n;
  }
  int64_t leaf_count(int block) const { return int64_t(leaves_[size_t(block)].size()); }

  const std::vector<Quadrant>& block_leaves(int block) const { return leaves_[size_t(block)]; }

  bool is_leaf(const Quadrant& q) const { return index_.count(quad_id(q)) != 0; }

  /// All leaves in global Morton order (block-major).
  std::vector<Quadrant> all_leaves() const {
    std::vector<Quadrant> out;
    out.reserve(size_t(leaf_count()));
    for (const auto& v : leaves_) out.insert(out.end(), v.begin(), v.end());
    return out;
  }

  int min_level() const {
    int m = kMaxLevel;
    for (const auto& v : leaves_)
      for (const auto& q : v) m = std::min(m, int(q.level));
    return m;
  }
  int max_level() const {
    int m = 0;
    for (const auto& v : leaves_)
      for (const auto& q : v) m = std::max(m, int(q.level));
    return m;
  }

  // -- mutation ------------------------------------------------------------

  void refine(const std::vector<Quadrant>& quads) {
    std::vector<std::vector<Quadrant>> add(leaves_.size()), del(leaves_.size());
    for (const auto& q : quads) {
      require(is_leaf(q), "refine: not a leaf");
      require(q.level < kMaxLevel, "refine: level beyond coordinate capacity");
      del[size_t(q.block)].push_back(q);
      for (const auto& c : quad_children(q)) add[size_t(q.block)].push_back(c);
    }
    apply(add, del);
  }

  /// Replaces each family of four siblings by its parent.  The argument lists
  /// the parents to create; all four children must be present leaves.
  void coarsen(const std::vector<Quadrant>& parents) {
    std::vector<std::vector<Quadrant>> add(leaves_.size()), del(leaves_.size());
    for (const auto& p : parents) {
      std::array<Quadrant, 4> fam = quad_children(p);
      for (const auto& c : fam)
        require(is_leaf(c), "coarsen: family member is not a leaf");
      require(is_family(fam), "coarsen: not a sibling family");
      add[size_t(p.block)].push_back(p);
      for (const auto& c : fam) del[size_t(p.block)].push_back(c);
    }
    apply(add, del);
  }

  /// 2:1 balance over faces and corners, including across block links.
  /// Only refines, never coarsens; iterates to the (unique) minimal closure.
  void balance() {
    bool changed = true;
    while (changed) {
      changed = false;
      std::vector<Quadrant> to_refine;
      for (const auto& v : leaves_)
        for (const auto& q : v)
          if (violates_balance(q)) to_refine.push_back(q);
      if (!to_refine.empty()) {
        refine(to_refine);
        changed = true;
      }
    }
  }

  // -- neighbor lookup -----------------------------------------------------

  /// Resolves the leaf neighbor(s) of q in one of 8 directions.  Requires a
  /// 2:1 balanced forest for HalfSize resolution; throws otherwise.
  NeighborInfo neighbor(const Quadrant& q, int dir) const;

  // -- partition -----------------------------------------------------------

  int num_ranks() const { return num_ranks_; }

  /// Splits the global Morton sequence into P contiguous segments whose
  /// counts differ by at most one; larger segments go to the lowest ranks.
  void partition(int ranks) {
    require(ranks >= 1, "partition: rank count must be positive");
    num_ranks_ = ranks;
    const int64_t total = leaf_count();
    const int64_t base = total / ranks, extra = total % ranks;
    int64_t g = 0;
    for (size_t b = 0; b < leaves_.size(); ++b) {
      for (size_t i = 0; i < leaves_[b].size(); ++i, ++g) {
        // rank r owns [r*base + min(r, extra), ...) of length base + (r < extra)
        int64_t lo = 0, hi = ranks - 1, r = 0;
        while (lo <= hi) {
          int64_t mid = (lo + hi) / 2;
          int64_t start = mid * base + std::min(mid, extra);
          if (start <= g) {
            r = mid;
            lo = mid + 1;
          } else {
            hi = mid - 1;
          }
        }
        owners_[b][i] = int(r);
      }
    }
  }

  /// Test hook and repartition helper: explicit ownership in global Morton
  /// order; values must be valid rank ids.
  void set_ownership(const std::vector<int>& owner_by_global_index, int ranks) {
    require(int64_t(owner_by_global_index.size()) == leaf_count(),
            "ownership size mismatch");
    num_ranks_ = ranks;
    size_t g = 0;
    for (size_t b = 0; b < leaves_.size(); ++b)
      for (size_t i = 0; i < leaves_[b].size(); ++i, ++g) {
        require(owner_by_global_index[g] >= 0 && owner_by_global_index[g] < ranks,
                "ownership rank out of range");
        owners_[b][i] = owner_by_global_index[g];
      }
  }

  int owner(const Quadrant& q) const {
    auto it = index_.find(quad_id(q));
    require(it != index_.end(), "owner: not a leaf");
    return owners_[size_t(q.block)][it->second];
  }

  std::vector<Quadrant> rank_leaves(int rank) const {
    std::vector<Quadrant> out;
    for (size_t b = 0; b < leaves_.size(); ++b)
      for (size_t i = 0; i < leaves_[b].size(); ++i)
        if (owners_[b][i] == rank) out.push_back(leaves_[b][i]);
    return out;
  }

  std::vector<int64_t> rank_counts() const {
    std::vector<int64_t> c(size_t(num_ranks_), 0);
    for (size_t b = 0; b < leaves_.size(); ++b)
      for (size_t i = 0; i < leaves_[b].size(); ++i) c[size_t(owners_[b][i])]++;
    return c;
  }

  /// Local leaves of `rank` having at least one face/corner neighbor owned by
  /// another rank.
  std::vector<Quadrant> boundary_leaves(int rank) const {
    std::vector<Quadrant> out;
    for (const auto& q : rank_leaves(rank)) {
      if (touches_other_rank(q, rank)) out.push_back(q);
    }
    return out;
  }

  bool touches_other_rank(const Quadrant& q, int rank) const {
    for (int dir = 0; dir < 8; ++dir) {
      NeighborInfo info = neighbor(q, dir);
      for (int k = 0; k < info.count; ++k)
        if (owner(info.nbr[size_t(k)]) != rank) return true;
    }
    return false;
  }

  /// Debug dump: "block level x y rank" per leaf in global Morton order.
  std::string dump() const {
    std::ostringstream os;
    for (size_t b = 0; b < leaves_.size(); ++b)
      for (size_t i = 0; i < leaves_[b].size(); ++i) {
        const Quadrant& q = leaves_[b][i];
        os << q.block << ' ' << q.level << ' ' << q.x << ' ' << q.y << ' ' << owners_[b][i]
           << '\n';
      }
    return os.str();
  }

  /// Maps a cell of the level-`level` lattice through a chart transition.
  static IVec2 transform_cell(const BlockTransition& t, int level, IVec2 cell) {
    const int64_t two_n = int64_t(2) << level;  // 2 * 2^level
    IVec2 c{2 * cell.x + 1, 2 * cell.y + 1};
    IVec2 m = t.a.apply(c) + two_n * t.t;
    return {(m.x - 1) / 2, (m.y - 1) / 2};
  }

  /// Maps a corner-lattice point (units of 2^-level) through a transition.
  static IVec2 transform_point(const BlockTransition& t, int level, IVec2 pt) {
    const int64_t n = int64_t(1) << level;
    return t.a.apply(pt) + n * t.t;
  }

 private:
  struct Probe {
    bool exists = false;  // false: physical boundary or cone corner
    bool cone = false;
    int block = 0;             // target block
    IVec2 cell;                // virtual same-level neighbor cell, target frame
    IVec2 cell_mine;           // same cell in my frame (pre-transition)
    BlockTransition trans;     // my block -> target block
  };

  Probe probe_dir(const Quadrant& q, int dir) const {
    Probe p;
    const int64_t n = int64_t(1) << q.level;
    IVec2 off = dir < 4 ? face_normal(dir) : corner_offset(dir - 4);
    IVec2 v{q.x + off.x, q.y + off.y};
    p.cell_mine = v;
    const bool out_x = v.x < 0 || v.x >= n;
    const bool out_y = v.y < 0 || v.y >= n;
    p.trans = BlockTransition{Orientation(0), {0, 0}};
    p.block = q.block;
    if (!out_x && !out_y) {
      p.exists = true;
      p.cell = v;
      return p;
    }
    if (out_x != out_y) {
      const int face = out_x ? (off.x > 0 ? 1 : 0) : (off.y > 0 ? 3 : 2);
      auto tr = conn_->face_transition(q.block, face);
      if (!tr) return p;  // physical boundary
      p.trans = *tr;
      p.block = conn_->face_link(q.block, face)->block;
    } else {
      const int corner = int(off.x > 0) | (int(off.y > 0) << 1);
      const CornerLink& cl = conn_->corner_link(q.block, corner);
      if (cl.status != CornerStatus::Linked) {
        p.cone = (cl.status == CornerStatus::Cone);
        return p;
      }
      p.trans = cl.trans;
      p.block = cl.block;
    }
    p.exists = true;
    p.cell = transform_cell(p.trans, q.level, v);
    return p;
  }

  bool violates_balance(const Quadrant& q) const {
    for (int dir = 0; dir < 8; ++dir) {
      Probe p = probe_dir(q, dir);
      if (!p.exists) continue;
      if (scan_deeper_than(p, q, dir, q.level + 1)) return true;
    }
    return false;
  }

  /// True if a leaf deeper than `max_level` touches the region shared between
  /// q and the probed virtual cell.
  bool scan_deeper_than(const Probe& p, const Quadrant& q, int dir, int max_level) const {
    const auto& v = leaves_[size_t(p.block)];
    const int s = kMaxLevel - q.level;
    const uint64_t lo = morton::interleave(uint32_t(p.cell.x << s), uint32_t(p.cell.y << s));
    auto first = std::lower_bound(v.begin(), v.end(), lo, [](const Quadrant& a, uint64_t key) {
      return MortonKey::of(a).scaled < key;
    });
    const uint64_t hi = lo + (uint64_t(1) << (2 * s));
    // shared region in the target frame, scaled to the kMaxLevel lattice
    int64_t ex0, ex1, ey0, ey1;
    shared_region_scaled(p, q, dir, ex0, ex1, ey0, ey1);
    for (auto it = first; it != v.end() && MortonKey::of(*it).scaled < hi; ++it) {
      if (it->level <= max_level) continue;
      const int ls = kMaxLevel - it->level;
      const int64_t lx0 = int64_t(it->x) << ls, lx1 = lx0 + (int64_t(1) << ls);
      const int64_t ly0 = int64_t(it->y) << ls, ly1 = ly0 + (int64_t(1) << ls);
      const bool touch_x = std::max(lx0, ex0) <= std::min(lx1, ex1);
      const bool touch_y = std::max(ly0, ey0) <= std::min(ly1, ey1);
      const bool degenerate_x = ex0 == ex1, degenerate_y = ey0 == ey1;
      // face: overlap must be a segment along the edge; corner: the point
      bool touches;
      if (degenerate_x && degenerate_y)
        touches = touch_x && touch_y;
      else if (degenerate_x)
        touches = touch_x && std::min(ly1, ey1) > std::max(ly0, ey0);
      else
        touches = touch_y && std::min(lx1, ex1) > std::max(lx0, ex0);
      if (touches) return true;
    }
    return false;
  }

  void shared_region_scaled(const Probe& p, const Quadrant& q, int dir, int64_t& x0,
                            int64_t& x1, int64_t& y0, int64_t& y1) const {
    // endpoints in my corner lattice at q.level
    IVec2 a, b;
    if (dir < 4) {
      const auto ends = face_corners(dir);
      a = IVec2{q.x, q.y} + corner_point(ends[0]);
      b = IVec2{q.x, q.y} + corner_point(ends[1]);
    } else {
      a = b = IVec2{q.x, q.y} + corner_point(dir - 4);
    }
    a = transform_point(p.trans, q.level, a);
    b = transform_point(p.trans, q.level, b);
    const int s = kMaxLevel - q.level;
    x0 = std::min(a.x, b.x) << s;
    x1 = std::max(a.x, b.x) << s;
    y0 = std::min(a.y, b.y) << s;
    y1 = std::max(a.y, b.y) << s;
  }

  void apply(std::vector<std::vector<Quadrant>>& add, std::vector<std::vector<Quadrant>>& del) {
    for (size_t b = 0; b < leaves_.size(); ++b) {
      if (add[b].empty() && del[b].empty()) continue;
      auto& v = leaves_[b];
      std::sort(del[b].begin(), del[b].end(), morton_less);
      std::vector<Quadrant> merged;
      merged.reserve(v.size() + add[b].size());
      for (const auto& q : v) {
        if (!std::binary_search(del[b].begin(), del[b].end(), q, morton_less))
          merged.push_back(q);
      }
      merged.insert(merged.end(), add[b].begin(), add[b].end());
      std::sort(merged.begin(), merged.end(), morton_less);
      v = std::move(merged);
      owners_[b].assign(v.size(), 0);
    }
    num_ranks_ = 1;
    rebuild_index();
  }

  void rebuild_index() {
    index_.clear();
    index_.reserve(size_t(leaf_count()));
    for (size_t b = 0; b < leaves_.size(); ++b)
      for (size_t i = 0; i < leaves_[b].size(); ++i)
        index_.emplace(quad_id(leaves_[b][i]), i);
  }

  const Connectivity* conn_;
  std::vector<std::vector<Quadrant>> leaves_;
  std::vector<std::vector<int>> owners_;
  std::unordered_map<uint64_t, size_t> index_;
  int num_ranks_ = 1;
};

inline NeighborInfo Forest::neighbor(const Quadrant& q, int dir) const {
  NeighborInfo info;
  info.self = q;
  info.dir = dir;
  Probe p = probe_dir(q, dir);
  if (!p.exists) {
    info.kind = NeighborInfo::Boundary;
    info.cone = p.cone;
    return info;
  }
  info.trans = p.trans;

  const Quadrant same{p.block, q.level, int32_t(p.cell.x), int32_t(p.cell.y)};
  if (is_leaf(same)) {
    info.kind = NeighborInfo::SameSize;
    info.nbr[0] = same;
    info.count = 1;
    return info;
  }
  if (q.level > 0) {
    const Quadrant dbl{p.block, q.level - 1, int32_t(p.cell.x >> 1), int32_t(p.cell.y >> 1)};
    if (is_leaf(dbl)) {
      info.kind = NeighborInfo::DoubleSize;
      info.nbr[0] = dbl;
      info.count = 1;
      return info;
    }
  }
  // half-size: children of the virtual cell adjacent to the shared region,
  // computed in my frame and transformed individually
  IVec2 off = dir < 4 ? face_normal(dir) : corner_offset(dir - 4);
  const IVec2 vm = p.cell_mine;
  std::array<IVec2, 2> kids_mine;
  int nkids = 0;
  if (dir < 4) {
    // the two children hugging my face, ordered along my tangential axis
    if (off.x != 0) {
      const int64_t cx = 2 * vm.x + (off.x > 0 ? 0 : 1);
      kids_mine[0] = {cx, 2 * vm.y};
      kids_mine[1] = {cx, 2 * vm.y + 1};
    } else {
      const int64_t cy = 2 * vm.y + (off.y > 0 ? 0 : 1);
      kids_mine[0] = {2 * vm.x, cy};
      kids_mine[1] = {2 * vm.x + 1, cy};
    }
    nkids = 2;
  } else {
    kids_mine[0] = {2 * vm.x + (off.x < 0 ? 1 : 0), 2 * vm.y + (off.y < 0 ? 1 : 0)};
    nkids = 1;
  }
  info.kind = NeighborInfo::HalfSize;
  info.count = nkids;
  for (int k = 0; k < nkids; ++k) {
    IVec2 tc = transform_cell(p.trans, q.level + 1, kids_mine[size_t(k)]);
    const Quadrant half{p.block, q.level + 1, int32_t(tc.x), int32_t(tc.y)};
    if (!is_leaf(half)) fail("neighbor: forest is not 2:1 balanced");
    info.nbr[size_t(k)] = half;
    info.which_half[size_t(k)] = k;
  }
  return info;
}

}  // namespace quadpatch

#endif  // QUADPATCH_FOREST_HPP
