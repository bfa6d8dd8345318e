#ifndef PEDFLOW_METRICS_HPP
#define PEDFLOW_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pedflow/population.hpp"
#include "pedflow/stats.hpp"
#include "pedflow/trajectory.hpp"

namespace pedflow {

// Inclusive cell rectangle used to scope density and flow measurements.
struct CellRect {
    int row0 = 0;
    int col0 = 0;
    int row1 = 0;
    int col1 = 0;

    bool contains(int row, int col) const {
        return row >= row0 && row <= row1 && col >= col0 && col <= col1;
    }
    long cell_count() const {
        return static_cast<long>(row1 - row0 + 1) * (col1 - col0 + 1);
    }
    double area_m2() const { return cell_count() * kCellAreaM2; }

    static CellRect full(const TrajectoryMeta& meta) {
        return {0, 0, meta.rows - 1, meta.cols - 1};
    }
};

inline void validate_rect(const CellRect& r, const TrajectoryMeta& meta) {
    if (r.row0 > r.row1 || r.col0 > r.col1) {
        throw ValidationError("region rectangle is inverted");
    }
    if (r.row0 < 0 || r.col0 < 0 || r.row1 >= meta.rows || r.col1 >= meta.cols) {
        throw ValidationError("region rectangle lies outside the grid");
    }
}

// Distance walked along one contiguous trajectory: 0.4 m per straight step,
// 0.56 m per diagonal step, nothing for standing. `end_corrections` adds the
// 0.2 m half-cell allowance at each end that observation protocols use.
inline double path_length(const std::vector<TrajectoryRecord>& traj,
                          bool end_corrections = false) {
    double total = 0.0;
    for (std::size_t i = 1; i < traj.size(); ++i) {
        const int dr = std::abs(traj[i].row - traj[i - 1].row);
        const int dc = std::abs(traj[i].col - traj[i - 1].col);
        if (dr > 1 || dc > 1) {
            throw DataError("non-adjacent jump at step " +
                            std::to_string(traj[i].step) + " for agent " +
                            std::to_string(traj[i].agent_id));
        }
        if (dr == 0 && dc == 0) continue;
        total += (dr == 1 && dc == 1) ? kDiagonalStepM : kStraightStepM;
    }
    if (end_corrections && traj.size() >= 2) total += 0.4;
    return total;
}

inline double walking_speed(const std::vector<TrajectoryRecord>& traj,
                            double interval_s = kStepSeconds,
                            bool end_corrections = false) {
    if (traj.size() < 2) throw DomainError("speed needs at least two records");
    const int span = traj.back().step - traj.front().step;
    if (span <= 0 || interval_s <= 0.0) {
        throw DomainError("speed over zero elapsed time");
    }
    return path_length(traj, end_corrections) / (span * interval_s);
}

// Mean speed of one agent across all its contiguous walks (wrap-around and
// re-entry seams excluded): total distance over total walking time.
inline std::optional<double> agent_speed(const std::vector<TrajectoryRecord>& records,
                                         double interval_s = kStepSeconds) {
    double dist = 0.0;
    long steps = 0;
    for (const auto& transit : split_transits(records)) {
        if (transit.size() < 2) continue;
        dist += path_length(transit);
        steps += transit.back().step - transit.front().step;
    }
    if (steps <= 0) return std::nullopt;
    return dist / (steps * interval_s);
}

struct FundamentalDiagramPoint {
    int window_start = 0;
    double density = 0.0;   // ped/m^2
    double velocity = 0.0;  // m/s
    double flow = 0.0;      // ped/(m*s), always density * velocity
    std::optional<double> section_flow;  // crossing count flow, ped/(m*s)
    int agents = 0;
};

enum class SectionAxis { Row, Column };

// A full transversal line through the grid: all cells with the given row
// (axis Row) or column (axis Column) index.
struct Section {
    SectionAxis axis = SectionAxis::Column;
    int index = 0;
};

struct FlowCount {
    int window_start = 0;
    long increasing = 0;  // crossings toward larger row/col indices
    long decreasing = 0;
};

// Crossing counts per window. A crossing is a consecutive in-transit pair of
// positions moving from one side of the section line onto or past it; the
// line sits on the low edge of the indexed row/column.
inline std::vector<FlowCount> count_flows(const TrajectoryLog& log,
                                          Section section, int window_steps) {
    if (window_steps < 1) throw ValidationError("window must be >= 1 step");
    if (log.records.empty()) return {};
    int lo = log.records.front().step;
    int hi = lo;
    for (const TrajectoryRecord& r : log.records) {
        lo = std::min(lo, r.step);
        hi = std::max(hi, r.step);
    }
    std::vector<FlowCount> windows;
    for (int w = lo; w <= hi; w += window_steps) {
        windows.push_back({w, 0, 0});
    }
    auto coord = [&](const TrajectoryRecord& r) {
        return section.axis == SectionAxis::Row ? r.row : r.col;
    };
    for (const auto& [agent, records] : log.by_agent()) {
        for (const auto& transit : split_transits(records)) {
            for (std::size_t i = 1; i < transit.size(); ++i) {
                const int before = coord(transit[i - 1]);
                const int after = coord(transit[i]);
                FlowCount& bucket =
                    windows[(transit[i].step - lo) / window_steps];
                if (before < section.index && after >= section.index) {
                    ++bucket.increasing;
                } else if (before >= section.index && after < section.index) {
                    ++bucket.decreasing;
                }
            }
        }
    }
    return windows;
}

// Density/velocity/flow per time window over a region. Density averages the
// per-step head count over the region area; velocity averages the in-window
// walking speed of the agents seen in the region; flow is their product.
// Windows with nobody in the region are omitted.
inline std::vector<FundamentalDiagramPoint> fundamental_diagram(
    const TrajectoryLog& log, const CellRect& region,
    std::optional<Section> section, int window_steps) {
    if (window_steps < 1) throw ValidationError("window must be >= 1 step");
    validate_rect(region, log.meta);
    if (log.records.empty()) return {};

    int lo = log.records.front().step;
    int hi = lo;
    for (const TrajectoryRecord& r : log.records) {
        lo = std::min(lo, r.step);
        hi = std::max(hi, r.step);
    }
    const int window_count = (hi - lo) / window_steps + 1;

    std::vector<long> in_region(window_count, 0);
    std::vector<std::set<int>> present(window_count);
    for (const TrajectoryRecord& r : log.records) {
        if (!region.contains(r.row, r.col)) continue;
        const int w = (r.step - lo) / window_steps;
        ++in_region[w];
        present[w].insert(r.agent_id);
    }

    std::vector<double> speed_sum(window_count, 0.0);
    std::vector<int> speed_n(window_count, 0);
    for (const auto& [agent, records] : log.by_agent()) {
        for (int w = 0; w < window_count; ++w) {
            if (!present[w].count(agent)) continue;
            const int w0 = lo + w * window_steps;
            const int w1 = w0 + window_steps - 1;
            std::vector<TrajectoryRecord> clipped;
            for (const TrajectoryRecord& r : records) {
                if (r.step >= w0 && r.step <= w1) clipped.push_back(r);
            }
            if (const auto v = agent_speed(clipped, log.meta.interval_s)) {
                speed_sum[w] += *v;
                ++speed_n[w];
            }
        }
    }

    std::vector<FlowCount> crossings;
    if (section) crossings = count_flows(log, *section, window_steps);

    std::vector<FundamentalDiagramPoint> out;
    for (int w = 0; w < window_count; ++w) {
        if (present[w].empty()) continue;
        const int w0 = lo + w * window_steps;
        const int covered = std::min(hi, w0 + window_steps - 1) - w0 + 1;
        FundamentalDiagramPoint pt;
        pt.window_start = w0;
        pt.agents = static_cast<int>(present[w].size());
        pt.density = static_cast<double>(in_region[w]) / covered / region.area_m2();
        pt.velocity = speed_n[w] > 0 ? speed_sum[w] / speed_n[w] : 0.0;
        pt.flow = pt.density * pt.velocity;
        if (section) {
            const double width_m = log.meta.rows * log.meta.cell_m;
            const double seconds = covered * log.meta.interval_s;
            pt.section_flow =
                (crossings[w].increasing + crossings[w].decreasing) /
                (width_m * seconds);
        }
        out.push_back(pt);
    }
    return out;
}

// Walkway service grades by flow rate (pedestrians per minute per metre of
// width); each band names its exclusive upper bound, the last is open.
struct LOSTable {
    struct Band {
        char grade = 'A';
        double upper = 0.0;
    };
    std::vector<Band> bands;

    void validate() const {
        if (bands.size() < 2) throw ValidationError("service table needs >= 2 bands");
        for (std::size_t i = 0; i + 1 < bands.size(); ++i) {
            if (!(bands[i].upper < bands[i + 1].upper)) {
                throw ValidationError("service bands must strictly increase");
            }
        }
        if (bands.back().upper != std::numeric_limits<double>::infinity()) {
            throw ValidationError("last service band must be unbounded");
        }
    }

    static LOSTable walkway_default() {
        const double inf = std::numeric_limits<double>::infinity();
        return {{{'A', 7.0},
                 {'B', 10.0},
                 {'C', 20.0},
                 {'D', 36.0},
                 {'E', 59.0},
                 {'F', inf}}};
    }
};

inline char level_of_service(double flow_ped_min_m, const LOSTable& table) {
    if (flow_ped_min_m < 0.0) throw DomainError("flow must be >= 0");
    table.validate();
    for (const LOSTable::Band& band : table.bands) {
        if (flow_ped_min_m < band.upper) return band.grade;
    }
    return table.bands.back().grade;
}

struct DensitySnapshot {
    int step = 0;
    double density = 0.0;  // ped/m^2
};

inline std::vector<DensitySnapshot> density_snapshots(const TrajectoryLog& log,
                                                      const CellRect& region,
                                                      int sample_interval) {
    if (sample_interval < 1) throw ValidationError("sample interval must be >= 1");
    validate_rect(region, log.meta);
    if (log.records.empty()) return {};
    int lo = log.records.front().step;
    int hi = lo;
    for (const TrajectoryRecord& r : log.records) {
        lo = std::min(lo, r.step);
        hi = std::max(hi, r.step);
    }
    std::map<int, long> counts;
    for (const TrajectoryRecord& r : log.records) {
        if ((r.step - lo) % sample_interval != 0) continue;
        if (!region.contains(r.row, r.col)) continue;
        ++counts[r.step];
    }
    std::vector<DensitySnapshot> out;
    for (int s = lo; s <= hi; s += sample_interval) {
        const auto it = counts.find(s);
        out.push_back({s, (it == counts.end() ? 0 : it->second) / region.area_m2()});
    }
    return out;
}

struct DispersionSample {
    int step = 0;
    double centroid_m = 0.0;   // mean member distance from the centroid
    double area_cells = 0.0;   // hull cells per member
    double area_m2 = 0.0;      // the same, scaled by the cell area
};

struct DispersionSeries {
    std::vector<DispersionSample> samples;
    std::vector<int> skipped_steps;  // samples with a member missing
};

inline DispersionSeries dispersion_series(const TrajectoryLog& log, int group_id,
                                          int sample_interval) {
    if (sample_interval < 1) throw ValidationError("sample interval must be >= 1");
    std::set<int> members;
    int lo = std::numeric_limits<int>::max();
    int hi = std::numeric_limits<int>::min();
    for (const TrajectoryRecord& r : log.records) {
        if (r.group_id != group_id) continue;
        members.insert(r.agent_id);
        lo = std::min(lo, r.step);
        hi = std::max(hi, r.step);
    }
    if (members.empty()) {
        throw ValidationError("group " + std::to_string(group_id) +
                              " has no trajectory records");
    }
    std::map<std::pair<int, int>, CellIndex> at_step;  // (step, agent) -> cell
    for (const TrajectoryRecord& r : log.records) {
        if (r.group_id == group_id) at_step[{r.step, r.agent_id}] = r.cell();
    }
    DispersionSeries out;
    for (int s = lo; s <= hi; s += sample_interval) {
        std::vector<CellIndex> cells;
        std::vector<Vec2> centers;
        for (int agent : members) {
            const auto it = at_step.find({s, agent});
            if (it == at_step.end()) break;
            cells.push_back(it->second);
            centers.push_back(cell_center(it->second));
        }
        if (cells.size() != members.size()) {
            out.skipped_steps.push_back(s);
            continue;
        }
        DispersionSample sample;
        sample.step = s;
        sample.centroid_m = dispersion_centroid(centers);
        sample.area_cells = dispersion_area(cells);
        sample.area_m2 = sample.area_cells * kCellAreaM2;
        out.samples.push_back(sample);
    }
    return out;
}

enum class ArrangementPattern {
    LineAbreast,
    RiverLike,
    VLike,
    Rhombus,
    SplitDyads,
    Dispersed,
};

inline const char* arrangement_name(ArrangementPattern p) {
    switch (p) {
        case ArrangementPattern::LineAbreast: return "line_abreast";
        case ArrangementPattern::RiverLike: return "river_like";
        case ArrangementPattern::VLike: return "v_like";
        case ArrangementPattern::Rhombus: return "rhombus";
        case ArrangementPattern::SplitDyads: return "split_dyads";
        case ArrangementPattern::Dispersed: return "dispersed";
    }
    return "dispersed";
}

struct ArrangementThresholds {
    double tolerance_m = 0.25;  // alignment tolerance
};

// Spatial pattern of a walking party relative to its heading. Members are
// projected onto the heading (longitudinal) and its left-hand perpendicular
// (lateral); the rules compare spreads and per-member offsets against the
// alignment tolerance, most specific first, falling back to dispersed.
inline ArrangementPattern classify_arrangement(
    const std::vector<Vec2>& positions, Vec2 heading,
    const ArrangementThresholds& thr = {}) {
    const std::size_t n = positions.size();
    if (n < 2 || n > 5) throw DomainError("arrangement defined for 2-5 members");
    const double len = heading.norm();
    if (len <= 0.0) throw DomainError("arrangement needs a non-zero heading");
    const Vec2 ahead{heading.x / len, heading.y / len};
    const Vec2 left{-ahead.y, ahead.x};

    const Vec2 centre = group_centroid(positions);
    std::vector<double> lon(n), lat(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 d = positions[i] - centre;
        lon[i] = d.dot(ahead);
        lat[i] = d.dot(left);
    }
    const auto [lon_min, lon_max] = std::minmax_element(lon.begin(), lon.end());
    const auto [lat_min, lat_max] = std::minmax_element(lat.begin(), lat.end());
    const double lon_spread = *lon_max - *lon_min;
    const double lat_spread = *lat_max - *lat_min;
    const double tol = thr.tolerance_m;

    if (lon_spread <= tol && lat_spread > tol) {
        return ArrangementPattern::LineAbreast;
    }
    if (lat_spread <= tol && lon_spread > tol) {
        return ArrangementPattern::RiverLike;
    }

    if (n == 3 || n == 4) {
        // Flankers are the laterally extreme members; a V needs them level
        // and every middle member offset to the same longitudinal side.
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return lat[a] < lat[b]; });
        const double f0 = lon[order.front()];
        const double f1 = lon[order.back()];
        if (std::abs(f0 - f1) <= tol) {
            const double flank = (f0 + f1) / 2.0;
            bool v_shape = true;
            int side = 0;
            for (std::size_t k = 1; k + 1 < n; ++k) {
                const double offset = lon[order[k]] - flank;
                if (std::abs(offset) <= tol) {
                    v_shape = false;
                    break;
                }
                const int s = offset > 0.0 ? 1 : -1;
                if (side == 0) side = s;
                if (s != side) {
                    v_shape = false;
                    break;
                }
            }
            if (v_shape) return ArrangementPattern::VLike;
        }
    }

    if (n == 4) {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return lon[a] > lon[b]; });
        const double lead = lon[order[0]];
        const double mid_a = lon[order[1]];
        const double mid_b = lon[order[2]];
        const double trail = lon[order[3]];
        const bool abreast = std::abs(mid_a - mid_b) <= tol &&
                             std::abs(lat[order[1]] - lat[order[2]]) > tol;
        if (abreast && lead - std::max(mid_a, mid_b) > tol &&
            std::min(mid_a, mid_b) - trail > tol) {
            return ArrangementPattern::Rhombus;
        }
        // Two tight pairs clearly separated from each other.
        constexpr std::array<std::array<std::size_t, 4>, 3> kPairings = {
            {{0, 1, 2, 3}, {0, 2, 1, 3}, {0, 3, 1, 2}}};
        for (const auto& [a, b, c, d] : kPairings) {
            const double intra = std::max((positions[a] - positions[b]).norm(),
                                          (positions[c] - positions[d]).norm());
            const Vec2 first = (positions[a] + positions[b]) * 0.5;
            const Vec2 second = (positions[c] + positions[d]) * 0.5;
            const double inter = (first - second).norm();
            if (intra < inter / 2.0) return ArrangementPattern::SplitDyads;
        }
    }
    return ArrangementPattern::Dispersed;
}

struct RelativePosition {
    int group_id = -1;
    int agent_id = -1;
    int step = 0;
    double longitudinal = 0.0;  // + ahead of the centroid, m
    double lateral = 0.0;       // + left of the heading, m
};

// Member offsets from the group centroid in heading coordinates, sampled
// every `sample_interval` steps. The heading is the centroid displacement
// since the previous sample; samples with a stationary centroid or a missing
// member are skipped.
inline std::vector<RelativePosition> relative_position_map(
    const TrajectoryLog& log, int sample_interval) {
    if (sample_interval < 1) throw ValidationError("sample interval must be >= 1");
    std::set<int> group_ids;
    for (const TrajectoryRecord& r : log.records) {
        if (r.group_id >= 0) group_ids.insert(r.group_id);
    }
    std::vector<RelativePosition> out;
    for (int gid : group_ids) {
        std::set<int> members;
        int lo = std::numeric_limits<int>::max();
        int hi = std::numeric_limits<int>::min();
        std::map<std::pair<int, int>, Vec2> at_step;
        for (const TrajectoryRecord& r : log.records) {
            if (r.group_id != gid) continue;
            members.insert(r.agent_id);
            lo = std::min(lo, r.step);
            hi = std::max(hi, r.step);
            at_step[{r.step, r.agent_id}] = cell_center(r.cell());
        }
        if (members.size() < 2) continue;
        auto sample_positions = [&](int s) -> std::optional<std::vector<Vec2>> {
            std::vector<Vec2> pts;
            for (int agent : members) {
                const auto it = at_step.find({s, agent});
                if (it == at_step.end()) return std::nullopt;
                pts.push_back(it->second);
            }
            return pts;
        };
        for (int s = lo + sample_interval; s <= hi; s += sample_interval) {
            const auto prev = sample_positions(s - sample_interval);
            const auto cur = sample_positions(s);
            if (!prev || !cur) continue;
            const Vec2 displacement =
                group_centroid(*cur) - group_centroid(*prev);
            if (displacement.norm() <= 1e-12) continue;
            const double len = displacement.norm();
            const Vec2 ahead{displacement.x / len, displacement.y / len};
            const Vec2 left{-ahead.y, ahead.x};
            const Vec2 centre = group_centroid(*cur);
            std::size_t i = 0;
            for (int agent : members) {
                const Vec2 d = (*cur)[i++] - centre;
                out.push_back({gid, agent, s, d.dot(ahead), d.dot(left)});
            }
        }
    }
    return out;
}

// Per-agent mean speeds bucketed by party size (1 = individuals), the cohort
// shape the calibration comparisons consume.
inline std::map<int, std::vector<double>> speeds_by_group_size(
    const TrajectoryLog& log) {
    std::map<int, std::set<int>> group_members;
    for (const TrajectoryRecord& r : log.records) {
        if (r.group_id >= 0) group_members[r.group_id].insert(r.agent_id);
    }
    std::map<int, std::vector<double>> out;
    for (const auto& [agent, records] : log.by_agent()) {
        const int gid = records.front().group_id;
        const int size =
            gid >= 0 ? static_cast<int>(group_members[gid].size()) : 1;
        if (const auto v = agent_speed(records, log.meta.interval_s)) {
            out[size].push_back(*v);
        }
    }
    return out;
}

}  // namespace pedflow

#endif
