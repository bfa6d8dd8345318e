#ifndef PEDFLOW_POPULATION_HPP
#define PEDFLOW_POPULATION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <unordered_set>
#include <vector>

#include "pedflow/grid.hpp"
#include "pedflow/markers.hpp"
#include "pedflow/random.hpp"

namespace pedflow {

struct Pedestrian {
    int id = -1;
    int group_id = -1;  // innermost containing group; -1 for individuals
    CellIndex pos{0, 0};
    Action prev_direction = Action::X;
    int destination_id = 0;
};

// A node in the group forest. Simple groups hold pedestrians directly;
// structured groups hold other groups and no direct members.
struct Group {
    int id = -1;
    int parent_id = -1;
    std::vector<int> subgroups;
    std::vector<int> members;

    bool structured() const { return !subgroups.empty(); }
};

class GroupForest {
  public:
    int add_simple(std::vector<int> member_ids) {
        if (member_ids.empty()) {
            throw ValidationError("simple group needs at least one member");
        }
        Group g;
        g.id = static_cast<int>(groups_.size());
        g.members = std::move(member_ids);
        groups_.push_back(std::move(g));
        return groups_.back().id;
    }

    int add_structured(const std::vector<int>& child_group_ids) {
        if (child_group_ids.empty()) {
            throw ValidationError("structured group needs at least one subgroup");
        }
        const int id = static_cast<int>(groups_.size());
        for (int child : child_group_ids) {
            if (child < 0 || child >= id) {
                throw ValidationError("structured group references unknown subgroup");
            }
            if (groups_[child].parent_id != -1) {
                throw ValidationError("subgroup already has a parent");
            }
        }
        Group g;
        g.id = id;
        g.subgroups = child_group_ids;
        groups_.push_back(std::move(g));
        for (int child : child_group_ids) {
            groups_[child].parent_id = id;
        }
        return id;
    }

    int size() const { return static_cast<int>(groups_.size()); }
    bool empty() const { return groups_.empty(); }

    const Group& group(int id) const {
        if (id < 0 || id >= size()) throw ValidationError("unknown group id");
        return groups_[id];
    }

    // Outermost ancestor in the containment chain.
    int root_of(int id) const {
        int cur = group(id).id;
        while (groups_[cur].parent_id != -1) {
            cur = groups_[cur].parent_id;
        }
        return cur;
    }

    // All pedestrians contained in the group, transitively through subgroups.
    std::vector<int> pedestrians_of(int id) const {
        std::vector<int> out;
        std::vector<int> stack{group(id).id};
        while (!stack.empty()) {
            const Group& g = groups_[stack.back()];
            stack.pop_back();
            out.insert(out.end(), g.members.begin(), g.members.end());
            for (auto it = g.subgroups.rbegin(); it != g.subgroups.rend(); ++it) {
                stack.push_back(*it);
            }
        }
        return out;
    }

    // Structural integrity: nodes form a forest, no group mixes direct members
    // with subgroups, and no pedestrian appears in two member lists.
    void validate() const {
        std::unordered_set<int> seen;
        for (const Group& g : groups_) {
            if (!g.members.empty() && !g.subgroups.empty()) {
                throw ValidationError("group mixes direct members and subgroups");
            }
            for (int ped : g.members) {
                if (!seen.insert(ped).second) {
                    throw ValidationError("pedestrian listed in more than one group");
                }
            }
        }
        for (const Group& g : groups_) {
            int hops = 0;
            int cur = g.id;
            while (groups_[cur].parent_id != -1) {
                cur = groups_[cur].parent_id;
                if (++hops > size()) {
                    throw ValidationError("group containment contains a cycle");
                }
            }
        }
    }

  private:
    std::vector<Group> groups_;  // id == index
};

// The agent's innermost group and the root of its containment chain;
// -1/-1 for individuals, equal ids when the group is not nested.
struct GroupResolution {
    int direct = -1;
    int largest = -1;
};

inline GroupResolution resolve_groups(const Pedestrian& agent,
                                      const GroupForest& forest) {
    GroupResolution res;
    for (int gid = 0; gid < forest.size(); ++gid) {
        const Group& g = forest.group(gid);
        if (std::find(g.members.begin(), g.members.end(), agent.id) !=
            g.members.end()) {
            if (res.direct != -1) {
                throw ValidationError("pedestrian listed in more than one group");
            }
            res.direct = gid;
        }
    }
    if (res.direct != -1) {
        res.largest = forest.root_of(res.direct);
    }
    return res;
}

inline Vec2 group_centroid(const std::vector<Vec2>& positions) {
    if (positions.empty()) throw DomainError("centroid of an empty group");
    Vec2 sum{0.0, 0.0};
    for (const Vec2& p : positions) sum = sum + p;
    return sum * (1.0 / static_cast<double>(positions.size()));
}

// Mean Euclidean distance of members from their centroid, in metres.
inline double dispersion_centroid(const std::vector<Vec2>& positions) {
    const Vec2 centre = group_centroid(positions);
    double total = 0.0;
    for (const Vec2& p : positions) total += (p - centre).norm();
    return total / static_cast<double>(positions.size());
}

namespace detail {

// Cell centers scaled to an integer lattice (x = 2*col + 1, y = 2*row + 1)
// so every hull predicate is exact.
struct LatticePoint {
    std::int64_t x = 0;
    std::int64_t y = 0;
    friend bool operator==(LatticePoint a, LatticePoint b) {
        return a.x == b.x && a.y == b.y;
    }
    friend bool operator<(LatticePoint a, LatticePoint b) {
        return a.x != b.x ? a.x < b.x : a.y < b.y;
    }
};

inline LatticePoint lattice_center(CellIndex c) {
    return {2 * static_cast<std::int64_t>(c.col) + 1,
            2 * static_cast<std::int64_t>(c.row) + 1};
}

inline std::int64_t cross(LatticePoint o, LatticePoint a, LatticePoint b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Monotone-chain convex hull, counter-clockwise, collinear points dropped.
inline std::vector<LatticePoint> convex_hull(std::vector<LatticePoint> pts) {
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    const std::size_t n = pts.size();
    if (n <= 2) return pts;
    std::vector<LatticePoint> hull(2 * n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    const std::size_t lower = k + 1;
    for (std::size_t i = n - 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

inline bool on_segment(LatticePoint a, LatticePoint b, LatticePoint p) {
    if (cross(a, b, p) != 0) return false;
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
           std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

inline bool in_hull(const std::vector<LatticePoint>& hull, LatticePoint p) {
    if (hull.size() == 1) return hull[0] == p;
    if (hull.size() == 2) return on_segment(hull[0], hull[1], p);
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const LatticePoint a = hull[i];
        const LatticePoint b = hull[(i + 1) % hull.size()];
        if (cross(a, b, p) < 0) return false;
    }
    return true;
}

}  // namespace detail

// Group spread in cells per member: the number of grid cells whose centers
// lie inside or on the convex hull of the member cell centers, divided by the
// member count. Degenerate hulls (points, segments) count the cells whose
// centers they touch.
inline double dispersion_area(const std::vector<CellIndex>& cells) {
    if (cells.empty()) throw DomainError("dispersion of an empty group");
    std::vector<detail::LatticePoint> pts;
    pts.reserve(cells.size());
    int row_lo = cells[0].row, row_hi = cells[0].row;
    int col_lo = cells[0].col, col_hi = cells[0].col;
    for (CellIndex c : cells) {
        pts.push_back(detail::lattice_center(c));
        row_lo = std::min(row_lo, c.row);
        row_hi = std::max(row_hi, c.row);
        col_lo = std::min(col_lo, c.col);
        col_hi = std::max(col_hi, c.col);
    }
    const std::vector<detail::LatticePoint> hull = detail::convex_hull(std::move(pts));
    long covered = 0;
    for (int r = row_lo; r <= row_hi; ++r) {
        for (int c = col_lo; c <= col_hi; ++c) {
            if (detail::in_hull(hull, detail::lattice_center({r, c}))) ++covered;
        }
    }
    return static_cast<double>(covered) / static_cast<double>(cells.size());
}

// Pedestrians plus their group forest, owned by one simulation run.
class Population {
  public:
    int add_pedestrian(CellIndex pos, int destination_id, int group_id = -1) {
        Pedestrian p;
        p.id = static_cast<int>(peds_.size());
        p.pos = pos;
        p.destination_id = destination_id;
        p.group_id = group_id;
        peds_.push_back(p);
        return p.id;
    }

    int size() const { return static_cast<int>(peds_.size()); }
    Pedestrian& ped(int id) { return peds_.at(static_cast<std::size_t>(id)); }
    const Pedestrian& ped(int id) const {
        return peds_.at(static_cast<std::size_t>(id));
    }
    const std::vector<Pedestrian>& pedestrians() const { return peds_; }

    GroupForest& forest() { return forest_; }
    const GroupForest& forest() const { return forest_; }

    std::vector<CellIndex> member_cells(int group_id) const {
        std::vector<CellIndex> out;
        for (int id : forest_.pedestrians_of(group_id)) {
            out.push_back(peds_[static_cast<std::size_t>(id)].pos);
        }
        return out;
    }

    std::vector<Vec2> member_centers(int group_id) const {
        std::vector<Vec2> out;
        for (CellIndex c : member_cells(group_id)) {
            out.push_back(cell_center(c));
        }
        return out;
    }

  private:
    std::vector<Pedestrian> peds_;  // id == index
    GroupForest forest_;
};

// En-bloc composition resolved from a population total and a group-size mix:
// one entry per simple group plus a count of unaffiliated individuals.
struct BatchComposition {
    std::vector<int> group_sizes;
    int individuals = 0;
};

// Largest-remainder apportionment of `total` pedestrians into groups so the
// realized member shares track the requested mix as closely as the total
// allows; the remainder walks alone.
inline BatchComposition compose_from_mix(int total,
                                         const std::map<int, double>& mix) {
    if (total < 0) throw ValidationError("population total must be >= 0");
    BatchComposition out;
    int budget = total;
    std::vector<std::pair<double, int>> leftovers;  // (fractional groups, size)
    for (const auto& [size, share] : mix) {
        const double ideal_groups = total * share / size;
        const int whole = static_cast<int>(std::floor(ideal_groups + 1e-9));
        const int usable = std::min(whole, budget / size);
        for (int i = 0; i < usable; ++i) out.group_sizes.push_back(size);
        budget -= usable * size;
        leftovers.push_back({ideal_groups - whole, size});
    }
    std::stable_sort(leftovers.begin(), leftovers.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& [frac, size] : leftovers) {
        if (frac > 1e-9 && size <= budget) {
            out.group_sizes.push_back(size);
            budget -= size;
        }
    }
    std::sort(out.group_sizes.begin(), out.group_sizes.end());
    out.individuals = budget;
    return out;
}

// One per-step arrival check for frequency-based generation. Returns the
// party size to spawn this step (1 = individual), or nothing. The event
// chance is scaled so the long-run pedestrian rate matches spec.rate and the
// member shares match the mix; consumes exactly one draw.
inline std::optional<int> sample_arrival(const GenerationSpec& spec,
                                         RandomStream& rng) {
    if (spec.rate <= 0.0) return std::nullopt;
    double solo_share = 1.0;
    std::vector<std::pair<int, double>> event_weights;  // (size, share/size)
    for (const auto& [size, share] : spec.group_mix) {
        solo_share -= share;
        event_weights.push_back({size, share / size});
    }
    if (solo_share > 1e-12) {
        event_weights.push_back({1, solo_share});
    }
    double total_weight = 0.0;
    for (const auto& [size, w] : event_weights) total_weight += w;
    const double event_prob = spec.rate * total_weight;
    if (event_prob > 1.0 + 1e-9) {
        throw ValidationError("generation rate too high for per-step arrivals");
    }
    const double u = rng.next_unit();
    if (u >= event_prob) return std::nullopt;
    double acc = 0.0;
    for (const auto& [size, w] : event_weights) {
        acc += spec.rate * w;
        if (u < acc) return size;
    }
    return event_weights.back().first;
}

namespace detail {

inline std::vector<CellIndex> chebyshev_disc(CellIndex anchor, int radius) {
    std::vector<CellIndex> out{anchor};
    for (Action a : kActionOrder) {
        if (is_move(a)) {
            const auto [dr, dc] = action_offset(a);
            out.push_back({anchor.row + dr, anchor.col + dc});
        }
    }
    for (int ring = 2; ring <= radius; ++ring) {
        for (int dr = -ring; dr <= ring; ++dr) {
            for (int dc = -ring; dc <= ring; ++dc) {
                if (std::max(std::abs(dr), std::abs(dc)) == ring) {
                    out.push_back({anchor.row + dr, anchor.col + dc});
                }
            }
        }
    }
    return out;
}

}  // namespace detail

// Chooses spawn cells inside a start area: a random free anchor, then free
// cells packed around it so group members start mutually close (pairwise
// Chebyshev distance <= 2 for parties of up to nine). Returns nothing when
// the area cannot host the whole party this step. Consumes one draw when at
// least one start cell is free, none otherwise.
inline std::optional<std::vector<CellIndex>> place_members(const Grid& grid,
                                                           const Marker& start,
                                                           int size,
                                                           RandomStream& rng) {
    if (start.kind != MarkerKind::StartArea) {
        throw ValidationError("spawn placement requires a start_area marker");
    }
    if (size < 1) throw ValidationError("party size must be >= 1");

    std::unordered_set<std::size_t> start_cells;
    std::vector<CellIndex> free_cells;
    for (CellIndex c : start.cells) {
        start_cells.insert(grid.index_of(c));
        if (grid.walkable(c) && grid.occupancy(c) == 0) free_cells.push_back(c);
    }
    if (free_cells.empty() || static_cast<int>(free_cells.size()) < size) {
        return std::nullopt;
    }
    const std::size_t first = rng.next_index(free_cells.size());
    const int radius = size <= 9 ? 1 : 2;
    for (std::size_t attempt = 0; attempt < free_cells.size(); ++attempt) {
        const CellIndex anchor = free_cells[(first + attempt) % free_cells.size()];
        std::vector<CellIndex> chosen;
        for (CellIndex raw : detail::chebyshev_disc(anchor, radius)) {
            const auto cell = grid.resolve(raw);
            if (!cell || !start_cells.count(grid.index_of(*cell))) continue;
            if (!grid.walkable(*cell) || grid.occupancy(*cell) != 0) continue;
            chosen.push_back(*cell);
            if (static_cast<int>(chosen.size()) == size) return chosen;
        }
    }
    return std::nullopt;
}

}  // namespace pedflow

#endif
