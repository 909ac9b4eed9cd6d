#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "xmodal/camera.hpp"
#include "xmodal/grid.hpp"
#include "xmodal/warp.hpp"

namespace xmodal {

// World-frame points with optional source-pixel provenance. The world frame
// is Z-up for the mapping pipeline; "height" below means the z coordinate.
struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<std::pair<int, int>> pixels;  // (row, col) per point; empty when untracked

  size_t size() const { return points.size(); }
};

// Backprojects every valid depth pixel and moves it to the world frame via
// world_from_camera.
inline PointCloud depth_to_pointcloud(const DepthMap& depth, const CameraIntrinsics& K,
                                      const RigidTransform& world_from_camera) {
  PointCloud cloud;
  cloud.points.reserve(static_cast<size_t>(mask_count(depth.valid)));
  cloud.pixels.reserve(cloud.points.capacity());
  for (int r = 0; r < depth.rows(); ++r)
    for (int c = 0; c < depth.cols(); ++c) {
      if (!depth.valid(r, c)) continue;
      const Eigen::Vector3d p =
          backproject({static_cast<double>(c), static_cast<double>(r)}, depth.values(r, c), K);
      cloud.points.push_back(world_from_camera.apply(p));
      cloud.pixels.emplace_back(r, c);
    }
  return cloud;
}

// One centroid per occupied voxel; voxel index = floor(coord/voxel) per
// axis. Output order follows first occupancy, so results are deterministic
// for a fixed input order. Provenance does not survive averaging.
inline PointCloud voxel_downsample(const PointCloud& cloud, double voxel) {
  if (!(voxel > 0.0)) throw std::invalid_argument("voxel_downsample: voxel must be positive");
  using Key = std::tuple<long long, long long, long long>;
  std::map<Key, size_t> slot;
  std::vector<Eigen::Vector3d> sums;
  std::vector<long> counts;
  std::vector<Key> order;
  for (const auto& p : cloud.points) {
    const Key k{static_cast<long long>(std::floor(p.x() / voxel)),
                static_cast<long long>(std::floor(p.y() / voxel)),
                static_cast<long long>(std::floor(p.z() / voxel))};
    auto it = slot.find(k);
    if (it == slot.end()) {
      slot.emplace(k, sums.size());
      sums.push_back(p);
      counts.push_back(1);
      order.push_back(k);
    } else {
      sums[it->second] += p;
      ++counts[it->second];
    }
  }
  PointCloud out;
  out.points.reserve(order.size());
  for (const Key& k : order) {
    const size_t i = slot[k];
    out.points.push_back(sums[i] / static_cast<double>(counts[i]));
  }
  return out;
}

// Keeps points with at least min_neighbors other points within radius.
inline PointCloud radial_outlier_filter(const PointCloud& cloud, double radius,
                                        int min_neighbors) {
  if (!(radius > 0.0)) throw std::invalid_argument("radial_outlier_filter: radius must be positive");
  const double r2 = radius * radius;
  PointCloud out;
  for (size_t i = 0; i < cloud.size(); ++i) {
    int neighbors = 0;
    for (size_t j = 0; j < cloud.size() && neighbors < min_neighbors; ++j) {
      if (j == i) continue;
      if ((cloud.points[i] - cloud.points[j]).squaredNorm() <= r2) ++neighbors;
    }
    if (neighbors >= min_neighbors) {
      out.points.push_back(cloud.points[i]);
      if (!cloud.pixels.empty()) out.pixels.push_back(cloud.pixels[i]);
    }
  }
  return out;
}

// Drops ground points (height <= ground_height) and overhead points
// (height > max_height), then projects survivors onto the ground plane.
inline std::vector<Eigen::Vector2d> remove_ground_and_flatten(const PointCloud& cloud,
                                                              double ground_height,
                                                              double max_height) {
  if (!(max_height > ground_height))
    throw std::invalid_argument("remove_ground_and_flatten: max_height must exceed ground_height");
  std::vector<Eigen::Vector2d> out;
  for (const auto& p : cloud.points) {
    if (p.z() <= ground_height || p.z() > max_height) continue;
    out.emplace_back(p.x(), p.y());
  }
  return out;
}

// Standard DBSCAN over 2-D points: a core point has >= min_pts neighbors
// within eps, counting itself; clusters are eps-connected cores plus border
// points. Expansion proceeds lowest-index-first, so labels (noise = -1) are
// deterministic for a fixed input order and border ties go to the earliest
// cluster.
inline std::vector<int> dbscan(const std::vector<Eigen::Vector2d>& points, double eps,
                               int min_pts) {
  if (!(eps > 0.0)) throw std::invalid_argument("dbscan: eps must be positive");
  if (min_pts < 1) throw std::invalid_argument("dbscan: min_pts must be >= 1");
  const size_t n = points.size();
  const double eps2 = eps * eps;
  std::vector<int> labels(n, -1);
  std::vector<char> visited(n, 0);

  auto neighbors_of = [&](size_t i) {
    std::vector<size_t> nb;
    for (size_t j = 0; j < n; ++j)
      if ((points[i] - points[j]).squaredNorm() <= eps2) nb.push_back(j);
    return nb;  // includes i itself
  };

  int next_cluster = 0;
  for (size_t i = 0; i < n; ++i) {
    if (visited[i]) continue;
    visited[i] = 1;
    std::vector<size_t> seed_nb = neighbors_of(i);
    if (static_cast<int>(seed_nb.size()) < min_pts) continue;  // noise unless later claimed
    const int cluster = next_cluster++;
    labels[i] = cluster;
    std::vector<size_t> queue = std::move(seed_nb);
    for (size_t qi = 0; qi < queue.size(); ++qi) {
      const size_t j = queue[qi];
      if (labels[j] == -1) labels[j] = cluster;  // border or previously noise
      if (visited[j]) continue;
      visited[j] = 1;
      std::vector<size_t> nb = neighbors_of(j);
      if (static_cast<int>(nb.size()) >= min_pts) {
        for (size_t k : nb)
          if (!visited[k] || labels[k] == -1) queue.push_back(k);
      }
    }
  }
  return labels;
}

// Convex polygon, CCW vertices.
struct ObstaclePolygon {
  int cluster = -1;
  std::vector<Eigen::Vector2d> vertices;
};

struct ObstacleMap {
  std::vector<ObstaclePolygon> polygons;
};

namespace detail {

inline double cross2(const Eigen::Vector2d& o, const Eigen::Vector2d& a,
                     const Eigen::Vector2d& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

// Andrew's monotone chain; returns CCW hull without collinear vertices.
inline std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const auto& a, const auto& b) { return a.x() == b.x() && a.y() == b.y(); }),
            pts.end());
  const size_t n = pts.size();
  if (n < 3) return pts;
  std::vector<Eigen::Vector2d> hull(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  const size_t lower = k + 1;
  for (size_t i = n - 1; i-- > 0;) {
    while (k >= lower && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;  // CCW
}

// Alpha-shape boundary vertices via the circumscribed-circle test: an edge
// lies on the boundary when one of the two radius-1/alpha circles through
// its endpoints is empty. O(n^3); clusters here are small.
inline std::vector<Eigen::Vector2d> alpha_boundary(const std::vector<Eigen::Vector2d>& pts,
                                                   double alpha) {
  const double r = 1.0 / alpha;
  const double r2 = r * r;
  std::vector<char> on_boundary(pts.size(), 0);
  for (size_t i = 0; i < pts.size(); ++i)
    for (size_t j = i + 1; j < pts.size(); ++j) {
      const Eigen::Vector2d mid = 0.5 * (pts[i] + pts[j]);
      const Eigen::Vector2d d = pts[j] - pts[i];
      const double half2 = 0.25 * d.squaredNorm();
      if (half2 > r2) continue;  // points farther apart than the circle diameter
      if (d.squaredNorm() < 1e-24) continue;  // coincident points span no edge
      const double h = std::sqrt(std::max(0.0, r2 - half2));
      const Eigen::Vector2d perp = Eigen::Vector2d(-d.y(), d.x()).normalized();
      for (int side = 0; side < 2; ++side) {
        const Eigen::Vector2d center = mid + (side ? h : -h) * perp;
        bool empty = true;
        for (size_t k = 0; k < pts.size() && empty; ++k) {
          if (k == i || k == j) continue;
          if ((pts[k] - center).squaredNorm() < r2 - 1e-12) empty = false;
        }
        if (empty) {
          on_boundary[i] = on_boundary[j] = 1;
          break;
        }
      }
    }
  std::vector<Eigen::Vector2d> out;
  for (size_t i = 0; i < pts.size(); ++i)
    if (on_boundary[i]) out.push_back(pts[i]);
  return out;
}

}  // namespace detail

// Alpha-shape boundary followed by its convex hull (the output contract is
// convex). alpha <= 0 selects the hull-equivalent regime directly. Clusters
// that cannot span a polygon (fewer than 3 distinct points, or collinear)
// yield an axis-aligned rectangle padded around the points.
inline ObstaclePolygon cluster_to_polygon(const std::vector<Eigen::Vector2d>& points, double alpha,
                                          double degenerate_padding = 0.05) {
  if (points.empty()) throw std::domain_error("cluster_to_polygon: empty cluster");
  std::vector<Eigen::Vector2d> candidates = points;
  if (alpha > 0.0) {
    candidates = detail::alpha_boundary(points, alpha);
    if (candidates.size() < 3) candidates = points;  // fragmented shape; fall back to all points
  }
  ObstaclePolygon poly;
  poly.vertices = detail::convex_hull(candidates);
  if (poly.vertices.size() < 3) {
    double x0 = points[0].x(), x1 = x0, y0 = points[0].y(), y1 = y0;
    for (const auto& p : points) {
      x0 = std::min(x0, p.x());
      x1 = std::max(x1, p.x());
      y0 = std::min(y0, p.y());
      y1 = std::max(y1, p.y());
    }
    x0 -= degenerate_padding;
    x1 += degenerate_padding;
    y0 -= degenerate_padding;
    y1 += degenerate_padding;
    poly.vertices = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};  // CCW rectangle
  }
  return poly;
}

// Containment test against a convex CCW polygon, boundary inclusive.
inline bool point_in_convex_polygon(const Eigen::Vector2d& p,
                                    const std::vector<Eigen::Vector2d>& poly, double tol = 1e-9) {
  if (poly.size() < 3) return false;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Eigen::Vector2d& a = poly[i];
    const Eigen::Vector2d& b = poly[(i + 1) % poly.size()];
    if (detail::cross2(a, b, p) < -tol) return false;
  }
  return true;
}

// Full depth-to-obstacle pipeline over already-clustered 2-D points.
inline ObstacleMap build_obstacle_map(const std::vector<Eigen::Vector2d>& points,
                                      const std::vector<int>& labels, double alpha,
                                      double degenerate_padding = 0.05) {
  if (points.size() != labels.size())
    throw std::invalid_argument("build_obstacle_map: label count mismatch");
  int max_label = -1;
  for (int l : labels) max_label = std::max(max_label, l);
  ObstacleMap map;
  for (int cluster = 0; cluster <= max_label; ++cluster) {
    std::vector<Eigen::Vector2d> members;
    for (size_t i = 0; i < points.size(); ++i)
      if (labels[i] == cluster) members.push_back(points[i]);
    if (members.empty()) continue;
    ObstaclePolygon poly = cluster_to_polygon(members, alpha, degenerate_padding);
    poly.cluster = cluster;
    map.polygons.push_back(std::move(poly));
  }
  return map;
}

}  // namespace xmodal
