#pragma once

#include "fit4cad/geometry.hpp"

#include <vector>

namespace fit4cad {

/// kd-tree over a fixed point set. Queries return the k nearest points
/// ordered by (squared distance, index), identical to the exhaustive scan.
class KdTree {
public:
    explicit KdTree(const std::vector<Point3>& pts);

    /// k nearest neighbors of an arbitrary query point.
    std::vector<int> query(const Point3& q, int k) const;

    /// k nearest neighbors of point `idx`, excluding the point itself.
    std::vector<int> query_point(int idx, int k) const;

    int size() const { return static_cast<int>(pts_.size()); }

private:
    struct Node {
        int left = -1, right = -1;
        int begin = 0, end = 0;  // leaf range into order_
        int axis = -1;
        double split = 0.0;
    };

    void search(int node, const Point3& q, int k, int exclude,
                std::vector<std::pair<double, int>>& heap) const;

    std::vector<Point3> pts_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

/// O(n^2) reference used as the test oracle; same ordering contract.
std::vector<int> knn_exhaustive(const std::vector<Point3>& pts, const Point3& q, int k,
                                int exclude = -1);

/// Per-point k nearest neighbor lists (self excluded).
struct NeighborGraph {
    int k = 0;
    std::vector<std::vector<int>> neighbors;
};

NeighborGraph build_neighbor_graph(const std::vector<Point3>& pts, int k);

}  // namespace fit4cad
