#ifndef PEDFLOW_TRAJECTORY_HPP
#define PEDFLOW_TRAJECTORY_HPP

#include <algorithm>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pedflow/core.hpp"

namespace pedflow {

// One agent's end-of-step position. Placement steps (spawn, re-entry after a
// wrap-around) record action X.
struct TrajectoryRecord {
    int step = 0;
    int agent_id = -1;
    int group_id = -1;  // -1 = individual
    int row = 0;
    int col = 0;
    Action action = Action::X;

    CellIndex cell() const { return {row, col}; }
};

// Dataset header: grid shape plus the sampling interval the speeds are
// computed against (simulation steps or observation frames).
struct TrajectoryMeta {
    int rows = 0;
    int cols = 0;
    double cell_m = kCellSizeM;
    double interval_s = kStepSeconds;
    bool wrap = false;
};

struct TrajectoryLog {
    TrajectoryMeta meta;
    std::vector<TrajectoryRecord> records;

    // Per-agent records ordered by step.
    std::map<int, std::vector<TrajectoryRecord>> by_agent() const {
        std::map<int, std::vector<TrajectoryRecord>> out;
        for (const TrajectoryRecord& r : records) out[r.agent_id].push_back(r);
        for (auto& [id, rows_] : out) {
            std::stable_sort(rows_.begin(), rows_.end(),
                             [](const TrajectoryRecord& a, const TrajectoryRecord& b) {
                                 return a.step < b.step;
                             });
        }
        return out;
    }
};

inline const char* kTrajectoryMagic = "# pedflow-trajectory v1";

inline void write_trajectory(std::ostream& os, const TrajectoryLog& log) {
    os << kTrajectoryMagic << '\n';
    os << "# rows=" << log.meta.rows << " cols=" << log.meta.cols
       << " cell_m=" << log.meta.cell_m << " interval_s=" << log.meta.interval_s
       << " wrap=" << (log.meta.wrap ? 1 : 0) << '\n';
    os << "step\tagent\tgroup\trow\tcol\taction\n";
    for (const TrajectoryRecord& r : log.records) {
        os << r.step << '\t' << r.agent_id << '\t' << r.group_id << '\t' << r.row
           << '\t' << r.col << '\t' << action_name(r.action) << '\n';
    }
}

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

inline int parse_int(const std::string& s, const char* what) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError(std::string("bad ") + what + " value: '" + s + "'");
    }
}

inline double parse_double(const std::string& s, const char* what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError(std::string("bad ") + what + " value: '" + s + "'");
    }
}

}  // namespace detail

inline TrajectoryLog read_trajectory(std::istream& is) {
    TrajectoryLog log;
    std::string line;
    bool saw_magic = false;
    bool saw_columns = false;
    bool has_action_column = false;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (!saw_magic) {
                if (line != kTrajectoryMagic) {
                    throw DataError("not a pedflow trajectory file");
                }
                saw_magic = true;
                continue;
            }
            std::istringstream meta_in(line.substr(1));
            std::string token;
            while (meta_in >> token) {
                const auto eq = token.find('=');
                if (eq == std::string::npos) continue;
                const std::string key = token.substr(0, eq);
                const std::string value = token.substr(eq + 1);
                if (key == "rows") log.meta.rows = detail::parse_int(value, "rows");
                else if (key == "cols") log.meta.cols = detail::parse_int(value, "cols");
                else if (key == "cell_m") log.meta.cell_m = detail::parse_double(value, "cell_m");
                else if (key == "interval_s") log.meta.interval_s = detail::parse_double(value, "interval_s");
                else if (key == "wrap") log.meta.wrap = detail::parse_int(value, "wrap") != 0;
            }
            continue;
        }
        if (!saw_magic) throw DataError("not a pedflow trajectory file");
        const std::vector<std::string> fields = detail::split_fields(line, '\t');
        if (!saw_columns) {
            if (fields.size() != 5 && fields.size() != 6) {
                throw DataError("trajectory column header must have 5 or 6 fields");
            }
            has_action_column = fields.size() == 6;
            saw_columns = true;
            continue;
        }
        const std::size_t expected = has_action_column ? 6 : 5;
        if (fields.size() != expected) {
            throw DataError("trajectory row has wrong field count: '" + line + "'");
        }
        TrajectoryRecord r;
        r.step = detail::parse_int(fields[0], "step");
        r.agent_id = detail::parse_int(fields[1], "agent");
        r.group_id = detail::parse_int(fields[2], "group");
        r.row = detail::parse_int(fields[3], "row");
        r.col = detail::parse_int(fields[4], "col");
        if (has_action_column && !parse_action(fields[5], r.action)) {
            throw DataError("unknown action '" + fields[5] + "'");
        }
        log.records.push_back(r);
    }
    if (!saw_magic) throw DataError("empty trajectory input");
    return log;
}

// Splits one agent's records into contiguous walks: a new transit starts
// after a recording gap or a non-Moore jump (e.g. the wrap-around seam of a
// ring corridor, or re-entry at the start area).
inline std::vector<std::vector<TrajectoryRecord>> split_transits(
    const std::vector<TrajectoryRecord>& records) {
    std::vector<std::vector<TrajectoryRecord>> out;
    for (const TrajectoryRecord& r : records) {
        bool fresh = out.empty();
        if (!fresh) {
            const TrajectoryRecord& prev = out.back().back();
            const int dr = std::abs(r.row - prev.row);
            const int dc = std::abs(r.col - prev.col);
            fresh = r.step != prev.step + 1 || std::max(dr, dc) > 1;
        }
        if (fresh) out.emplace_back();
        out.back().push_back(r);
    }
    return out;
}

}  // namespace pedflow

#endif
