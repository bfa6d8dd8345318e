#ifndef PEDFLOW_MARKERS_HPP
#define PEDFLOW_MARKERS_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pedflow/core.hpp"

namespace pedflow {

enum class MarkerKind { StartArea, DestinationArea, Obstacle };

inline const char* marker_kind_name(MarkerKind k) {
    switch (k) {
        case MarkerKind::StartArea: return "start_area";
        case MarkerKind::DestinationArea: return "destination_area";
        case MarkerKind::Obstacle: return "obstacle";
    }
    return "?";
}

enum class GenerationMode { FrequencyBased, EnBloc };

// One row of an explicit batch composition: `count` groups of `group_size`
// members each. kind/parent support structured-group declarations; parent
// points at another row (by row_id) whose kind must be "structured".
struct CompositionRow {
    int row_id = -1;
    int group_size = 1;  // 1 = individuals
    int count = 0;
    bool structured = false;
    std::optional<int> parent_row;
};

// How a start area generates pedestrians. Frequency mode draws a Bernoulli
// arrival per step; en-bloc places a whole batch at step 0 (spilling into
// later steps only when the area has no free room).
struct GenerationSpec {
    GenerationMode mode = GenerationMode::EnBloc;
    double rate = 0.0;                       // arrivals/step, frequency mode
    int total = 0;                           // batch size, en-bloc mode
    std::map<int, double> group_mix;         // size -> share of pedestrians
    std::vector<CompositionRow> batch;       // explicit rows override the mix
    int target_destination = -1;             // destination_id for spawns
};

inline void validate_generation_spec(const GenerationSpec& g) {
    if (g.rate < 0.0) throw ValidationError("generation rate must be >= 0");
    if (g.total < 0) throw ValidationError("generation total must be >= 0");
    double mix_sum = 0.0;
    for (const auto& [size, share] : g.group_mix) {
        if (size < 2) throw ValidationError("group_mix sizes must be >= 2");
        if (share < 0.0) throw ValidationError("group_mix shares must be >= 0");
        mix_sum += share;
    }
    if (mix_sum > 1.0 + 1e-9) {
        throw ValidationError("group_mix shares must sum to <= 1");
    }
}

struct Marker {
    MarkerKind kind = MarkerKind::Obstacle;
    std::vector<CellIndex> cells;
    std::optional<GenerationSpec> generation;  // start areas only
    std::optional<int> destination_id;         // destination areas only
};

// Convenience builder for the rectangle syntax used by scenario files:
// (row0, col0, row1, col1), all inclusive.
inline Marker make_rect_marker(MarkerKind kind, int row0, int col0, int row1,
                               int col1) {
    Marker m;
    m.kind = kind;
    for (int r = row0; r <= row1; ++r) {
        for (int c = col0; c <= col1; ++c) {
            m.cells.push_back({r, c});
        }
    }
    return m;
}

}  // namespace pedflow

#endif
