#pragma once

#include <cstdint>
#include <vector>

namespace fit4cad {

/// Local maximum of a grid function with its topological persistence under
/// the superlevel-set filtration.
struct GridPeak {
    std::vector<int> cell;     // integer cell coordinates
    double height = 0.0;       // function value at the peak
    double persistence = 0.0;  // birth - death; the global maximum keeps
                               // its full height (death at level 0)
};

/// Superlevel-set persistence of a dense grid function by a union-find
/// sweep over cells sorted by decreasing value. Neighbors differ by +-1
/// along one axis. Returns peaks sorted by descending height, then by
/// linear cell index. Values must be non-negative.
std::vector<GridPeak> grid_persistence(const std::vector<double>& values,
                                       const std::vector<int>& shape);

/// Peaks whose persistence exceeds ratio * max(values); the global maximum
/// always survives. All-zero input yields an empty list.
std::vector<GridPeak> persistent_maxima(const std::vector<double>& values,
                                        const std::vector<int>& shape, double ratio);

}  // namespace fit4cad
