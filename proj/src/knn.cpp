#include "fit4cad/knn.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace fit4cad {

namespace {
constexpr int kLeafSize = 16;

using Entry = std::pair<double, int>;  // (squared distance, index)
}  // namespace

KdTree::KdTree(const std::vector<Point3>& pts) : pts_(pts) {
    order_.resize(pts_.size());
    std::iota(order_.begin(), order_.end(), 0);
    if (pts_.empty()) return;

    // Iterative build over index ranges.
    struct Task {
        int begin, end, parent, side;
    };
    std::vector<Task> stack{{0, static_cast<int>(pts_.size()), -1, 0}};
    while (!stack.empty()) {
        Task t = stack.back();
        stack.pop_back();
        int node_id = static_cast<int>(nodes_.size());
        nodes_.push_back({});
        Node& node = nodes_.back();
        node.begin = t.begin;
        node.end = t.end;
        if (t.parent < 0)
            root_ = node_id;
        else if (t.side == 0)
            nodes_[t.parent].left = node_id;
        else
            nodes_[t.parent].right = node_id;

        if (t.end - t.begin <= kLeafSize) continue;

        Vec3 lo = pts_[order_[t.begin]], hi = lo;
        for (int i = t.begin; i < t.end; ++i) {
            lo = lo.cwiseMin(pts_[order_[i]]);
            hi = hi.cwiseMax(pts_[order_[i]]);
        }
        Vec3 ext = hi - lo;
        int axis = 0;
        if (ext.y() > ext.x()) axis = 1;
        if (ext.z() > ext[axis]) axis = 2;
        if (ext[axis] <= 0.0) continue;  // all points coincident: keep as leaf

        int mid = (t.begin + t.end) / 2;
        std::nth_element(order_.begin() + t.begin, order_.begin() + mid, order_.begin() + t.end,
                         [&](int a, int b) { return pts_[a][axis] < pts_[b][axis]; });
        node.axis = axis;
        node.split = pts_[order_[mid]][axis];
        stack.push_back({t.begin, mid, node_id, 0});
        stack.push_back({mid, t.end, node_id, 1});
    }
}

void KdTree::search(int node_id, const Point3& q, int k, int exclude,
                    std::vector<Entry>& heap) const {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
        for (int i = node.begin; i < node.end; ++i) {
            int idx = order_[i];
            if (idx == exclude) continue;
            Entry e{(pts_[idx] - q).squaredNorm(), idx};
            if (static_cast<int>(heap.size()) < k) {
                heap.push_back(e);
                std::push_heap(heap.begin(), heap.end());
            } else if (e < heap.front()) {
                std::pop_heap(heap.begin(), heap.end());
                heap.back() = e;
                std::push_heap(heap.begin(), heap.end());
            }
        }
        return;
    }
    double diff = q[node.axis] - node.split;
    int near = diff < 0 ? node.left : node.right;
    int far = diff < 0 ? node.right : node.left;
    search(near, q, k, exclude, heap);
    // Visit the far side unless its minimum distance strictly exceeds the
    // current worst entry; ties must be visited to keep index tie-breaks exact.
    if (static_cast<int>(heap.size()) < k || diff * diff <= heap.front().first)
        search(far, q, k, exclude, heap);
}

std::vector<int> KdTree::query(const Point3& q, int k) const {
    if (k < 1) throw std::invalid_argument("k must be positive");
    std::vector<Entry> heap;
    heap.reserve(k + 1);
    if (root_ >= 0) search(root_, q, k, -1, heap);
    std::sort(heap.begin(), heap.end());
    std::vector<int> out;
    out.reserve(heap.size());
    for (const Entry& e : heap) out.push_back(e.second);
    return out;
}

std::vector<int> KdTree::query_point(int idx, int k) const {
    if (k < 1) throw std::invalid_argument("k must be positive");
    std::vector<Entry> heap;
    heap.reserve(k + 1);
    if (root_ >= 0) search(root_, pts_[idx], k, idx, heap);
    std::sort(heap.begin(), heap.end());
    std::vector<int> out;
    out.reserve(heap.size());
    for (const Entry& e : heap) out.push_back(e.second);
    return out;
}

std::vector<int> knn_exhaustive(const std::vector<Point3>& pts, const Point3& q, int k,
                                int exclude) {
    std::vector<Entry> all;
    all.reserve(pts.size());
    for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
        if (i == exclude) continue;
        all.emplace_back((pts[i] - q).squaredNorm(), i);
    }
    int take = std::min<int>(k, static_cast<int>(all.size()));
    std::partial_sort(all.begin(), all.begin() + take, all.end());
    std::vector<int> out(take);
    for (int i = 0; i < take; ++i) out[i] = all[i].second;
    return out;
}

NeighborGraph build_neighbor_graph(const std::vector<Point3>& pts, int k) {
    if (static_cast<int>(pts.size()) <= k)
        throw std::invalid_argument("cloud too small for requested neighbor count");
    KdTree tree(pts);
    NeighborGraph g;
    g.k = k;
    g.neighbors.resize(pts.size());
    for (int i = 0; i < static_cast<int>(pts.size()); ++i) g.neighbors[i] = tree.query_point(i, k);
    return g;
}

}  // namespace fit4cad
