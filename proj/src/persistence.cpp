#include "fit4cad/persistence.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace fit4cad {

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n, -1) {}
    int find(int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
};

}  // namespace

std::vector<GridPeak> grid_persistence(const std::vector<double>& values,
                                       const std::vector<int>& shape) {
    std::size_t total = 1;
    for (int s : shape) {
        if (s < 1) throw std::invalid_argument("grid shape entries must be positive");
        total *= static_cast<std::size_t>(s);
    }
    if (values.size() != total) throw std::invalid_argument("grid size does not match shape");
    for (double v : values)
        if (v < 0.0) throw std::invalid_argument("grid values must be non-negative");

    const int dims = static_cast<int>(shape.size());
    std::vector<std::size_t> stride(dims, 1);
    for (int d = dims - 2; d >= 0; --d) stride[d] = stride[d + 1] * shape[d + 1];

    std::vector<int> order(total);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (values[a] != values[b]) return values[a] > values[b];
        return a < b;
    });
    std::vector<int> rank(total);
    for (std::size_t i = 0; i < total; ++i) rank[order[i]] = static_cast<int>(i);

    UnionFind uf(static_cast<int>(total));
    std::vector<int> birth_cell(total, -1);  // per root

    std::vector<GridPeak> peaks;
    std::vector<int> coord(dims);

    const auto elder = [&](int ra, int rb) {
        // Higher birth value wins; ties break toward the smaller birth cell.
        double va = values[birth_cell[ra]], vb = values[birth_cell[rb]];
        if (va != vb) return va > vb ? ra : rb;
        return birth_cell[ra] < birth_cell[rb] ? ra : rb;
    };

    for (std::size_t step = 0; step < total; ++step) {
        int cell = order[step];
        uf.parent[cell] = cell;
        birth_cell[cell] = cell;

        std::size_t rem = cell;
        for (int d = 0; d < dims; ++d) {
            coord[d] = static_cast<int>(rem / stride[d]);
            rem %= stride[d];
        }
        for (int d = 0; d < dims; ++d) {
            for (int dir = -1; dir <= 1; dir += 2) {
                int c = coord[d] + dir;
                if (c < 0 || c >= shape[d]) continue;
                int nb = cell + dir * static_cast<int>(stride[d]);
                if (rank[nb] > rank[cell]) continue;  // not processed yet
                int ra = uf.find(cell), rb = uf.find(nb);
                if (ra == rb) continue;
                int keep = elder(ra, rb);
                int drop = keep == ra ? rb : ra;
                double pers = values[birth_cell[drop]] - values[cell];
                if (pers > 0.0) {
                    GridPeak pk;
                    pk.height = values[birth_cell[drop]];
                    pk.persistence = pers;
                    std::size_t r = birth_cell[drop];
                    pk.cell.resize(dims);
                    for (int dd = 0; dd < dims; ++dd) {
                        pk.cell[dd] = static_cast<int>(r / stride[dd]);
                        r %= stride[dd];
                    }
                    peaks.push_back(std::move(pk));
                }
                uf.parent[drop] = keep;
            }
        }
    }

    // Surviving components: essential classes, persistence = full height.
    for (std::size_t i = 0; i < total; ++i) {
        if (birth_cell[i] < 0) continue;
        if (uf.find(static_cast<int>(i)) != static_cast<int>(i)) continue;
        int bc = birth_cell[i];
        GridPeak pk;
        pk.height = values[bc];
        pk.persistence = values[bc];
        std::size_t r = bc;
        pk.cell.resize(dims);
        for (int dd = 0; dd < dims; ++dd) {
            pk.cell[dd] = static_cast<int>(r / stride[dd]);
            r %= stride[dd];
        }
        peaks.push_back(std::move(pk));
    }

    std::sort(peaks.begin(), peaks.end(), [&](const GridPeak& a, const GridPeak& b) {
        if (a.height != b.height) return a.height > b.height;
        return a.cell < b.cell;
    });
    return peaks;
}

std::vector<GridPeak> persistent_maxima(const std::vector<double>& values,
                                        const std::vector<int>& shape, double ratio) {
    if (ratio <= 0.0 || ratio > 1.0) throw std::invalid_argument("ratio must be in (0, 1]");
    double vmax = 0.0;
    for (double v : values) vmax = std::max(vmax, v);
    if (vmax <= 0.0) return {};

    auto all = grid_persistence(values, shape);
    std::vector<GridPeak> kept;
    for (const auto& pk : all) {
        bool essential = pk.persistence == pk.height && pk.height == vmax;
        if (essential || pk.persistence > ratio * vmax) kept.push_back(pk);
    }
    return kept;
}

}  // namespace fit4cad
