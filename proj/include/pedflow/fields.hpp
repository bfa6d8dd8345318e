#ifndef PEDFLOW_FIELDS_HPP
#define PEDFLOW_FIELDS_HPP

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <queue>
#include <vector>

#include "pedflow/grid.hpp"

namespace pedflow {

enum class FieldKind { Path, Obstacle, Density };

// A scalar layer superimposed on the grid. Path layers store weighted-Moore
// distance to a destination (kUnreachable where no path exists); obstacle
// layers a wall-proximity value; density layers local pedestrian density.
struct FieldLayer {
    FieldKind kind = FieldKind::Density;
    int rows = 0;
    int cols = 0;
    std::optional<int> destination_id;
    std::vector<double> values;

    static constexpr double kUnreachable = std::numeric_limits<double>::infinity();

    FieldLayer() = default;
    FieldLayer(FieldKind k, int r, int c, double init = 0.0)
        : kind(k), rows(r), cols(c),
          values(static_cast<std::size_t>(r) * c, init) {}

    double at(CellIndex cell) const {
        return values[static_cast<std::size_t>(cell.row) * cols + cell.col];
    }
    double& at(CellIndex cell) {
        return values[static_cast<std::size_t>(cell.row) * cols + cell.col];
    }
    bool reachable(CellIndex cell) const { return std::isfinite(at(cell)); }
};

// Shortest-path distance to the destination area over walkable cells, Moore
// moves costing 1 straight and sqrt(2) diagonal. Multi-source Dijkstra from
// every destination cell; honours column wrap on torus grids.
inline FieldLayer compute_path_field(const Grid& grid, const Marker& destination) {
    if (destination.kind != MarkerKind::DestinationArea) {
        throw ValidationError("path field requires a destination_area marker");
    }
    if (destination.cells.empty()) {
        throw ValidationError("destination marker has no cells");
    }
    FieldLayer field(FieldKind::Path, grid.rows(), grid.cols(),
                     FieldLayer::kUnreachable);
    field.destination_id = destination.destination_id;

    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    for (CellIndex c : destination.cells) {
        if (!grid.walkable(c)) {
            throw ValidationError("destination cell is not walkable");
        }
        field.at(c) = 0.0;
        open.push({0.0, grid.index_of(c)});
    }
    const double kDiag = std::sqrt(2.0);
    while (!open.empty()) {
        const auto [dist, idx] = open.top();
        open.pop();
        const CellIndex cell{static_cast<int>(idx) / grid.cols(),
                             static_cast<int>(idx) % grid.cols()};
        if (dist > field.at(cell)) continue;  // stale entry
        for (Action a : kActionOrder) {
            if (!is_move(a)) continue;
            const auto next = grid.neighbor(cell, a);
            if (!next || !grid.walkable(*next)) continue;
            const double cand = dist + (is_diagonal(a) ? kDiag : 1.0);
            if (cand < field.at(*next) - 1e-12) {
                field.at(*next) = cand;
                open.push({cand, grid.index_of(*next)});
            }
        }
    }
    return field;
}

// Wall proximity: max_value next to an obstacle or boundary wall, linearly
// decaying to 0 beyond `radius` cells (Chebyshev).
inline FieldLayer compute_obstacle_field(const Grid& grid, int radius,
                                         double max_value) {
    if (radius < 1) throw ValidationError("obstacle field radius must be >= 1");
    if (max_value <= 0.0) throw ValidationError("obstacle field max must be > 0");

    const int kFar = 1 << 28;
    std::vector<int> dist(grid.cell_count(), kFar);
    std::deque<std::size_t> frontier;
    for (int r = 0; r < grid.rows(); ++r) {
        for (int c = 0; c < grid.cols(); ++c) {
            const CellIndex cell{r, c};
            if (!grid.walkable(cell)) {
                dist[grid.index_of(cell)] = 0;
                frontier.push_back(grid.index_of(cell));
            }
        }
    }
    // Chebyshev distance to the nearest obstacle: BFS over Moore neighbours.
    while (!frontier.empty()) {
        const std::size_t idx = frontier.front();
        frontier.pop_front();
        const CellIndex cell{static_cast<int>(idx) / grid.cols(),
                             static_cast<int>(idx) % grid.cols()};
        for (Action a : kActionOrder) {
            if (!is_move(a)) continue;
            const auto next = grid.neighbor(cell, a);
            if (!next) continue;
            const std::size_t nidx = grid.index_of(*next);
            if (dist[nidx] > dist[idx] + 1) {
                dist[nidx] = dist[idx] + 1;
                frontier.push_back(nidx);
            }
        }
    }

    FieldLayer field(FieldKind::Obstacle, grid.rows(), grid.cols());
    for (int r = 0; r < grid.rows(); ++r) {
        for (int c = 0; c < grid.cols(); ++c) {
            const CellIndex cell{r, c};
            const int d = std::min(dist[grid.index_of(cell)],
                                   grid.boundary_wall_distance(cell));
            double value;
            if (d <= 0) {
                value = max_value;  // the obstacle cell itself
            } else {
                value = max_value *
                        std::max(0.0, static_cast<double>(radius - d + 1) / radius);
            }
            field.at(cell) = value;
        }
    }
    return field;
}

// Instantaneous local density: pedestrians within a Chebyshev window divided
// by the window's area clipped to the grid (in m^2). Recomputed from scratch.
inline FieldLayer update_density_field(const Grid& grid,
                                       const std::vector<CellIndex>& agents,
                                       int radius) {
    if (radius < 1) throw ValidationError("density field radius must be >= 1");
    FieldLayer field(FieldKind::Density, grid.rows(), grid.cols());

    std::vector<int> counts(grid.cell_count(), 0);
    for (CellIndex a : agents) {
        ++counts[grid.index_of(a)];
    }
    const int span = 2 * radius + 1;
    const int col_span = grid.wrap() ? std::min(span, grid.cols()) : span;
    for (int r = 0; r < grid.rows(); ++r) {
        const int r0 = std::max(0, r - radius);
        const int r1 = std::min(grid.rows() - 1, r + radius);
        for (int c = 0; c < grid.cols(); ++c) {
            int window_cells = 0;
            int found = 0;
            for (int rr = r0; rr <= r1; ++rr) {
                for (int dc = -radius; dc < -radius + col_span; ++dc) {
                    int cc = c + dc;
                    if (grid.wrap()) {
                        cc = ((cc % grid.cols()) + grid.cols()) % grid.cols();
                    } else if (cc < 0 || cc >= grid.cols()) {
                        continue;
                    }
                    ++window_cells;
                    found += counts[static_cast<std::size_t>(rr) * grid.cols() + cc];
                }
            }
            field.at({r, c}) = found / (window_cells * kCellAreaM2);
        }
    }
    return field;
}

// Exponential smoothing toward a cumulative-mean-density style layer;
// alpha = 0 keeps the instantaneous field.
inline FieldLayer ema_blend(const FieldLayer& previous, const FieldLayer& instant,
                            double alpha) {
    if (alpha <= 0.0) return instant;
    FieldLayer out = instant;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] = alpha * previous.values[i] + (1.0 - alpha) * instant.values[i];
    }
    return out;
}

}  // namespace pedflow

#endif
