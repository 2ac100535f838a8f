#ifndef POLECAL_KDTREE_HPP
#define POLECAL_KDTREE_HPP

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "polecal/geometry.hpp"

namespace polecal {

/// Static 3-d tree over a point array, median split, nearest-neighbor query.
/// Construction and queries are fully deterministic.
class KdTree {
 public:
  explicit KdTree(const std::vector<Vec3>& points) : points_(points) {
    if (points_.empty()) return;
    index_.resize(points_.size());
    std::iota(index_.begin(), index_.end(), 0);
    nodes_.reserve(2 * points_.size());
    root_ = build(0, points_.size(), 0);
  }

  std::size_t size() const { return points_.size(); }

  struct Result {
    std::size_t index = std::numeric_limits<std::size_t>::max();
    double squared_distance = std::numeric_limits<double>::infinity();
    bool found() const { return index != std::numeric_limits<std::size_t>::max(); }
  };

  /// Nearest neighbor of `query`; `max_distance` optionally bounds the search.
  Result nearest(const Vec3& query,
                 double max_distance = std::numeric_limits<double>::infinity()) const {
    Result best;
    if (points_.empty()) return best;
    best.squared_distance = max_distance * max_distance;
    bool hit = false;
    search(root_, query, best, hit);
    if (!hit) return Result{};
    return best;
  }

 private:
  struct Node {
    std::size_t point = 0;
    int axis = 0;
    int left = -1;
    int right = -1;
  };

  int build(std::size_t lo, std::size_t hi, int depth) {
    if (lo >= hi) return -1;
    const int axis = depth % 3;
    const std::size_t mid = (lo + hi) / 2;
    std::nth_element(index_.begin() + lo, index_.begin() + mid, index_.begin() + hi,
                     [&](std::size_t a, std::size_t b) {
                       if (points_[a][axis] != points_[b][axis]) {
                         return points_[a][axis] < points_[b][axis];
                       }
                       return a < b;  // deterministic tie-break
                     });
    Node node;
    node.point = index_[mid];
    node.axis = axis;
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    nodes_[self].left = build(lo, mid, depth + 1);
    nodes_[self].right = build(mid + 1, hi, depth + 1);
    return self;
  }

  void search(int id, const Vec3& query, Result& best, bool& hit) const {
    if (id < 0) return;
    const Node& node = nodes_[id];
    const double d2 = (points_[node.point] - query).squaredNorm();
    if (d2 <= best.squared_distance) {
      // <= so that an exact max-distance match still counts as found.
      if (d2 < best.squared_distance ||
          (!hit || node.point < best.index)) {
        best.index = node.point;
        best.squared_distance = d2;
        hit = true;
      }
    }
    const double delta = query[node.axis] - points_[node.point][node.axis];
    const int near = delta <= 0.0 ? node.left : node.right;
    const int far = delta <= 0.0 ? node.right : node.left;
    search(near, query, best, hit);
    if (delta * delta <= best.squared_distance) {
      search(far, query, best, hit);
    }
  }

  std::vector<Vec3> points_;
  std::vector<std::size_t> index_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace polecal

#endif  // POLECAL_KDTREE_HPP
