#ifndef PEDFLOW_GRID_HPP
#define PEDFLOW_GRID_HPP

#include <cassert>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pedflow/core.hpp"
#include "pedflow/markers.hpp"

namespace pedflow {

struct Cell {
    bool walkable = true;
    int marker_index = -1;  // index into Grid::markers, -1 when unmarked
    std::array<int, 2> occupants = {-1, -1};
    int occupant_count = 0;
};

// Discrete walkable space on the 0.4 m lattice. Rows span the transversal
// extent of a corridor, columns its length (the movement axis). `wrap`
// closes the column axis into a ring; `boundary_walls` makes out-of-bounds
// edges count as walls for the obstacle field and for admissibility (the
// corridor's long sides behave as walls without spending grid cells on them).
class Grid {
  public:
    static constexpr int kMaxOccupancy = 2;

    Grid() = default;
    Grid(int rows, int cols, bool wrap = false, bool boundary_walls = true)
        : rows_(rows), cols_(cols), wrap_(wrap),
          boundary_walls_(boundary_walls),
          cells_(static_cast<std::size_t>(rows) * cols) {
        if (rows < 1 || cols < 1) {
            throw ValidationError("grid must have at least one row and column");
        }
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool wrap() const { return wrap_; }
    bool boundary_walls() const { return boundary_walls_; }
    std::size_t cell_count() const { return cells_.size(); }
    double area_m2() const { return cell_count() * kCellAreaM2; }

    bool in_bounds(CellIndex c) const {
        return c.row >= 0 && c.row < rows_ && c.col >= 0 && c.col < cols_;
    }

    // Maps an index onto the grid, wrapping the column axis on a torus.
    // Empty when the index falls outside a non-wrapped edge.
    std::optional<CellIndex> resolve(CellIndex c) const {
        if (wrap_) {
            c.col = ((c.col % cols_) + cols_) % cols_;
        }
        if (!in_bounds(c)) return std::nullopt;
        return c;
    }

    std::optional<CellIndex> neighbor(CellIndex c, Action a) const {
        const auto off = action_offset(a);
        return resolve({c.row + off.drow, c.col + off.dcol});
    }

    Cell& at(CellIndex c) { return cells_[index_of(c)]; }
    const Cell& at(CellIndex c) const { return cells_[index_of(c)]; }

    std::size_t index_of(CellIndex c) const {
        assert(in_bounds(c));
        return static_cast<std::size_t>(c.row) * cols_ + c.col;
    }

    bool walkable(CellIndex c) const { return at(c).walkable; }
    int occupancy(CellIndex c) const { return at(c).occupant_count; }

    void add_occupant(CellIndex c, int agent_id) {
        Cell& cell = at(c);
        if (!cell.walkable) {
            throw Error("occupant placed on a non-walkable cell");
        }
        if (cell.occupant_count >= kMaxOccupancy) {
            throw Error("cell occupancy cap exceeded");
        }
        cell.occupants[cell.occupant_count++] = agent_id;
    }

    void remove_occupant(CellIndex c, int agent_id) {
        Cell& cell = at(c);
        for (int i = 0; i < cell.occupant_count; ++i) {
            if (cell.occupants[i] == agent_id) {
                cell.occupants[i] = cell.occupants[cell.occupant_count - 1];
                cell.occupants[--cell.occupant_count] = -1;
                return;
            }
        }
        throw Error("removing an occupant that is not on the cell");
    }

    const std::vector<Marker>& markers() const { return markers_; }

    const Marker* destination_marker(int destination_id) const {
        for (const Marker& m : markers_) {
            if (m.kind == MarkerKind::DestinationArea &&
                m.destination_id == destination_id) {
                return &m;
            }
        }
        return nullptr;
    }

    // True when the out-of-bounds side next to `c` counts as a wall.
    // Wrapped edges never do.
    bool touches_boundary_wall(CellIndex c) const {
        if (!boundary_walls_) return false;
        if (c.row == 0 || c.row == rows_ - 1) return true;
        if (!wrap_ && (c.col == 0 || c.col == cols_ - 1)) return true;
        return false;
    }

    // Chebyshev distance from `c` to the virtual wall ring, or a huge value
    // when boundaries are not walls.
    int boundary_wall_distance(CellIndex c) const {
        if (!boundary_walls_) return 1 << 28;
        int d = std::min(c.row + 1, rows_ - c.row);
        if (!wrap_) {
            d = std::min(d, std::min(c.col + 1, cols_ - c.col));
        }
        return d;
    }

    void attach_markers(std::vector<Marker> markers) {
        std::set<std::pair<int, int>> seen;
        for (const Marker& m : markers) {
            if (m.cells.empty()) {
                throw ValidationError("marker with no cells");
            }
            switch (m.kind) {
                case MarkerKind::StartArea:
                    if (!m.generation) {
                        throw ValidationError("start area without a generation spec");
                    }
                    validate_generation_spec(*m.generation);
                    break;
                case MarkerKind::DestinationArea:
                    if (!m.destination_id) {
                        throw ValidationError("destination area without an id");
                    }
                    break;
                case MarkerKind::Obstacle:
                    if (m.generation || m.destination_id) {
                        throw ValidationError("obstacle markers carry no generation spec or id");
                    }
                    break;
            }
            for (CellIndex c : m.cells) {
                if (!in_bounds(c)) {
                    throw ValidationError("marker cell (" + std::to_string(c.row) +
                                          "," + std::to_string(c.col) +
                                          ") outside the grid");
                }
                if (!seen.insert({c.row, c.col}).second) {
                    throw ValidationError("overlapping markers at cell (" +
                                          std::to_string(c.row) + "," +
                                          std::to_string(c.col) + ")");
                }
            }
        }
        std::set<int> dest_ids;
        for (const Marker& m : markers) {
            if (m.kind == MarkerKind::DestinationArea &&
                !dest_ids.insert(*m.destination_id).second) {
                throw ValidationError("duplicate destination id " +
                                      std::to_string(*m.destination_id));
            }
        }
        markers_ = std::move(markers);
        for (std::size_t i = 0; i < markers_.size(); ++i) {
            for (CellIndex c : markers_[i].cells) {
                Cell& cell = at(c);
                cell.marker_index = static_cast<int>(i);
                if (markers_[i].kind == MarkerKind::Obstacle) {
                    cell.walkable = false;
                }
            }
        }
    }

  private:
    int rows_ = 1;
    int cols_ = 1;
    bool wrap_ = false;
    bool boundary_walls_ = true;
    std::vector<Cell> cells_{1};
    std::vector<Marker> markers_;
};

namespace detail {
inline int cells_from_metres(double metres, const char* which) {
    const double ratio = metres / kCellSizeM;
    const double rounded = std::round(ratio);
    if (metres <= 0.0 || std::abs(ratio - rounded) > 1e-9 || rounded < 1.0) {
        throw ValidationError(std::string("grid ") + which + " (" +
                              std::to_string(metres) +
                              " m) is not a positive multiple of 0.4 m");
    }
    return static_cast<int>(rounded);
}
}  // namespace detail

// Builds the lattice for a space of `width_m` (transversal, rows) by
// `length_m` (movement axis, columns) and stamps the markers onto it.
inline Grid build_grid(double width_m, double length_m,
                       std::vector<Marker> markers, bool wrap,
                       bool boundary_walls = true) {
    const int rows = detail::cells_from_metres(width_m, "width");
    const int cols = detail::cells_from_metres(length_m, "length");
    Grid grid(rows, cols, wrap, boundary_walls);
    grid.attach_markers(std::move(markers));
    return grid;
}

}  // namespace pedflow

#endif
