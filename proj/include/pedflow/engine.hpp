#ifndef PEDFLOW_ENGINE_HPP
#define PEDFLOW_ENGINE_HPP

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "pedflow/behavior.hpp"
#include "pedflow/fields.hpp"
#include "pedflow/grid.hpp"
#include "pedflow/metrics.hpp"
#include "pedflow/population.hpp"
#include "pedflow/random.hpp"
#include "pedflow/scenario.hpp"
#include "pedflow/trajectory.hpp"

namespace pedflow {

enum class AgentPhase { Live, Staged, Exited };

struct MoveTrace {
    int agent_id = -1;
    Action action = Action::X;
    CellIndex from{0, 0};
    CellIndex to{0, 0};
};

struct StepTrace {
    int step = 0;
    std::vector<MoveTrace> moves;  // one entry per agent live this step
    std::vector<int> placed;       // agents put on the grid this step
    std::vector<int> arrived;      // agents that reached their destination
    int deferred_parties = 0;      // parties still waiting for room
};

// One run of the model: a grid with its field layers, the population, and
// the seeded stream driving every random choice. Draws happen in a fixed
// order — construction placement first, then per step: the update
// permutation, one action draw per live agent, then spawn/re-entry draws —
// so identical (scenario, seed) pairs replay identically.
class Simulation {
  public:
    explicit Simulation(Scenario scenario)
        : scenario_(std::move(scenario)), rng_(scenario_.seed) {
        scenario_.validate();
        grid_ = build_scenario_grid(scenario_);
        for (const Marker& m : grid_.markers()) {
            if (m.kind == MarkerKind::DestinationArea) {
                path_fields_.emplace(*m.destination_id,
                                     compute_path_field(grid_, m));
            }
        }
        if (path_fields_.empty()) {
            throw ValidationError("scenario has no destination areas");
        }
        obstacle_field_ = compute_obstacle_field(
            grid_, scenario_.fields.obstacle_radius, scenario_.fields.obstacle_max);
        density_field_ =
            FieldLayer(FieldKind::Density, grid_.rows(), grid_.cols());
        for (std::size_t i = 0; i < grid_.markers().size(); ++i) {
            if (grid_.markers()[i].kind == MarkerKind::StartArea) {
                start_markers_.push_back(static_cast<int>(i));
            }
        }
        pending_.resize(grid_.markers().size());
        init_explicit_agents();
        init_generated_population();
        initial_trace_.step = 0;
        process_queues(initial_trace_);
    }

    const Grid& grid() const { return grid_; }
    const Population& population() const { return pop_; }
    const Scenario& scenario() const { return scenario_; }
    const FieldLayer& density_field() const { return density_field_; }
    const FieldLayer& obstacle_field() const { return obstacle_field_; }
    const FieldLayer& path_field(int destination_id) const {
        return path_fields_.at(destination_id);
    }
    int current_step() const { return step_; }
    int arrivals() const { return arrivals_total_; }
    long deferred_events() const { return deferred_events_; }
    const StepTrace& initial_trace() const { return initial_trace_; }
    AgentPhase phase(int agent_id) const {
        return status_.at(static_cast<std::size_t>(agent_id)).phase;
    }

    std::vector<int> live_agent_ids() const {
        std::vector<int> ids;
        for (int id = 0; id < pop_.size(); ++id) {
            if (status_[static_cast<std::size_t>(id)].phase == AgentPhase::Live) {
                ids.push_back(id);
            }
        }
        return ids;
    }

    StepTrace step() {
        StepTrace trace;
        refresh_density();
        std::vector<int> order = live_agent_ids();
        rng_.shuffle(order);
        for (int id : order) {
            trace.moves.push_back(move_agent(id));
        }
        process_queues(trace);       // re-entries and deferred spawns first,
        process_arrivals(trace);     // so a fresh arrival waits a full step
        process_frequency_spawns(trace);
        trace.deferred_parties = pending_party_count();
        trace.step = ++step_;
        return trace;
    }

    // Cross-checks the redundant state (grid occupancy vs agent positions,
    // phase bookkeeping); throws on any mismatch.
    void check_consistency() const {
        long on_grid = 0;
        for (int r = 0; r < grid_.rows(); ++r) {
            for (int c = 0; c < grid_.cols(); ++c) {
                const Cell& cell = grid_.at({r, c});
                if (cell.occupant_count > Grid::kMaxOccupancy) {
                    throw Error("occupancy cap violated");
                }
                if (!cell.walkable && cell.occupant_count > 0) {
                    throw Error("agent on a non-walkable cell");
                }
                for (int i = 0; i < cell.occupant_count; ++i) {
                    const Pedestrian& p = pop_.ped(cell.occupants[i]);
                    if (p.pos.row != r || p.pos.col != c) {
                        throw Error("occupant list disagrees with agent position");
                    }
                    ++on_grid;
                }
            }
        }
        long live = 0, staged = 0, exited = 0;
        for (const AgentStatus& st : status_) {
            switch (st.phase) {
                case AgentPhase::Live: ++live; break;
                case AgentPhase::Staged: ++staged; break;
                case AgentPhase::Exited: ++exited; break;
            }
        }
        if (on_grid != live) throw Error("live count disagrees with grid occupancy");
        if (live + staged + exited != pop_.size()) {
            throw Error("agent phases do not partition the population");
        }
    }

  private:
    struct AgentStatus {
        AgentPhase phase = AgentPhase::Staged;
        int origin_start = -1;  // marker index the agent (re-)enters from
    };

    struct PendingParty {
        std::vector<int> members;
    };

    void init_explicit_agents() {
        if (scenario_.agents.empty()) return;
        std::map<std::string, std::vector<int>> by_label;
        std::vector<int> ids;
        for (const ExplicitAgent& spec : scenario_.agents) {
            const int id = pop_.add_pedestrian(spec.pos, spec.destination_id);
            ids.push_back(id);
            if (!spec.group.empty()) by_label[spec.group].push_back(id);
        }
        std::map<std::string, int> group_of_label;
        for (const auto& [label, members] : by_label) {
            const int gid = pop_.forest().add_simple(members);
            group_of_label[label] = gid;
            for (int id : members) pop_.ped(id).group_id = gid;
        }
        for (const StructuredGroupSpec& spec : scenario_.structured_groups) {
            std::vector<int> children;
            for (const std::string& child : spec.children) {
                const auto it = group_of_label.find(child);
                if (it == group_of_label.end()) {
                    throw ValidationError("structured group references unknown label '" +
                                          child + "'");
                }
                children.push_back(it->second);
            }
            group_of_label[spec.label] = pop_.forest().add_structured(children);
        }
        status_.resize(static_cast<std::size_t>(pop_.size()));
        for (int id : ids) {
            Pedestrian& p = pop_.ped(id);
            if (!grid_.in_bounds(p.pos) || !grid_.walkable(p.pos)) {
                throw ValidationError("agent placed on a non-walkable cell");
            }
            grid_.add_occupant(p.pos, id);
            AgentStatus& st = status_[static_cast<std::size_t>(id)];
            st.phase = AgentPhase::Live;
            st.origin_start = start_for_destination(p.destination_id);
            initial_trace_.placed.push_back(id);
        }
    }

    int start_for_destination(int destination_id) const {
        for (int idx : start_markers_) {
            const Marker& m = grid_.markers()[static_cast<std::size_t>(idx)];
            if (m.generation && m.generation->target_destination == destination_id) {
                return idx;
            }
        }
        return -1;
    }

    void init_generated_population() {
        if (start_markers_.empty()) return;
        if (scenario_.population.mode == GenerationMode::FrequencyBased) {
            return;  // agents appear over time
        }
        if (!scenario_.population.batch.empty()) {
            init_batch_population();
            return;
        }
        int total = 0;
        if (scenario_.population.total) {
            total = *scenario_.population.total;
        } else if (scenario_.population.density_ped_m2) {
            total = static_cast<int>(
                std::lround(*scenario_.population.density_ped_m2 * grid_.area_m2()));
        }
        const int n_starts = static_cast<int>(start_markers_.size());
        for (int s = 0; s < n_starts; ++s) {
            const int share = total / n_starts + (s < total % n_starts ? 1 : 0);
            const BatchComposition comp =
                compose_from_mix(share, scenario_.population.group_mix);
            for (int size : comp.group_sizes) enqueue_new_party(s, size);
            for (int i = 0; i < comp.individuals; ++i) enqueue_new_party(s, 1);
        }
    }

    void init_batch_population() {
        // Simple rows become parties dealt round-robin over the start areas;
        // structured rows wrap their children's group instances.
        std::map<int, std::vector<int>> instances_by_row;  // row_id -> group ids
        int next_start = 0;
        for (const CompositionRow& row : scenario_.population.batch) {
            if (row.structured) continue;
            for (int i = 0; i < row.count; ++i) {
                const int start_slot = next_start++ % static_cast<int>(start_markers_.size());
                const int gid = enqueue_new_party(start_slot, row.group_size);
                if (row.row_id >= 0 && gid >= 0) {
                    instances_by_row[row.row_id].push_back(gid);
                }
            }
        }
        for (const CompositionRow& row : scenario_.population.batch) {
            if (!row.structured) continue;
            std::vector<std::vector<int>> children(
                static_cast<std::size_t>(std::max(row.count, 1)));
            for (const CompositionRow& child : scenario_.population.batch) {
                if (!child.parent_row || *child.parent_row != row.row_id) continue;
                const auto it = instances_by_row.find(child.row_id);
                if (it == instances_by_row.end()) continue;
                for (std::size_t i = 0; i < it->second.size(); ++i) {
                    children[i % children.size()].push_back(it->second[i]);
                }
            }
            for (const std::vector<int>& sub : children) {
                if (!sub.empty()) pop_.forest().add_structured(sub);
            }
        }
    }

    // Creates the pedestrians (and group, for parties of 2+) for one party
    // and queues it at the given start area. Returns the group id or -1.
    int enqueue_new_party(int start_slot, int size) {
        const int marker_idx = start_markers_[static_cast<std::size_t>(start_slot)];
        const Marker& start = grid_.markers()[static_cast<std::size_t>(marker_idx)];
        const int destination = start.generation->target_destination;
        PendingParty party;
        for (int i = 0; i < size; ++i) {
            const int id = pop_.add_pedestrian({0, 0}, destination);
            party.members.push_back(id);
            status_.push_back({AgentPhase::Staged, marker_idx});
        }
        int gid = -1;
        if (size >= 2) {
            gid = pop_.forest().add_simple(party.members);
            for (int id : party.members) pop_.ped(id).group_id = gid;
        }
        pending_[static_cast<std::size_t>(marker_idx)].push_back(std::move(party));
        return gid;
    }

    void refresh_density() {
        std::vector<CellIndex> positions;
        for (int id : live_agent_ids()) positions.push_back(pop_.ped(id).pos);
        FieldLayer instant =
            update_density_field(grid_, positions, scenario_.fields.density_radius);
        density_field_ =
            ema_blend(density_field_, instant, scenario_.fields.density_ema);
    }

    MoveTrace move_agent(int id) {
        Pedestrian& agent = pop_.ped(id);
        MoveTrace mt;
        mt.agent_id = id;
        mt.from = agent.pos;

        UtilityWeights weights = scenario_.weights;
        DecisionInputs inputs;
        inputs.grid = &grid_;
        inputs.population = &pop_;
        inputs.path = &path_fields_.at(agent.destination_id);
        inputs.obstacle = &obstacle_field_;
        inputs.obstacle_max = scenario_.fields.obstacle_max;
        if (agent.group_id >= 0) {
            const std::vector<CellIndex> cells = live_member_cells(agent.group_id);
            const double spread = dispersion_area(cells);
            const double db = disp_balance(spread, scenario_.delta);
            weights.kappa_c = balance(scenario_.weights.kappa_c, BalanceKind::Cohesion, db);
            weights.kappa_g = balance(scenario_.weights.kappa_g, BalanceKind::Goal, db);
            weights.kappa_i = balance(scenario_.weights.kappa_i, BalanceKind::Structured, db);
            inputs.direct_centroid = centroid_of(cells);
            const int root = pop_.forest().root_of(agent.group_id);
            if (root != agent.group_id) {
                inputs.largest_centroid = centroid_of(live_member_cells(root));
            }
        }
        const Decision decision = evaluate_agent(agent, inputs, weights);
        const Action action = choose_action(decision.distribution, rng_);
        mt.action = action;
        mt.to = agent.pos;
        if (is_move(action)) {
            const CellIndex target =
                *decision.targets.target[static_cast<std::size_t>(action)];
            grid_.remove_occupant(agent.pos, id);
            grid_.add_occupant(target, id);
            agent.pos = target;
            agent.prev_direction = action;
            mt.to = target;
        }
        return mt;
    }

    std::vector<CellIndex> live_member_cells(int group_id) const {
        std::vector<CellIndex> cells;
        for (int id : pop_.forest().pedestrians_of(group_id)) {
            if (status_[static_cast<std::size_t>(id)].phase == AgentPhase::Live) {
                cells.push_back(pop_.ped(id).pos);
            }
        }
        return cells;
    }

    static std::optional<Vec2> centroid_of(const std::vector<CellIndex>& cells) {
        if (cells.empty()) return std::nullopt;
        std::vector<Vec2> centers;
        centers.reserve(cells.size());
        for (CellIndex c : cells) centers.push_back(cell_center(c));
        return group_centroid(centers);
    }

    void process_arrivals(StepTrace& trace) {
        for (int id = 0; id < pop_.size(); ++id) {
            AgentStatus& st = status_[static_cast<std::size_t>(id)];
            if (st.phase != AgentPhase::Live) continue;
            Pedestrian& agent = pop_.ped(id);
            const int marker_idx = grid_.at(agent.pos).marker_index;
            if (marker_idx < 0) continue;
            const Marker& m = grid_.markers()[static_cast<std::size_t>(marker_idx)];
            if (m.kind != MarkerKind::DestinationArea ||
                m.destination_id != agent.destination_id) {
                continue;
            }
            ++arrivals_total_;
            trace.arrived.push_back(id);
            grid_.remove_occupant(agent.pos, id);
            if (scenario_.torus && st.origin_start >= 0) {
                st.phase = AgentPhase::Staged;
                stage_for_reentry(id);
            } else {
                st.phase = AgentPhase::Exited;
            }
        }
    }

    // Queues the agent's party once every member is off the grid, so groups
    // re-enter whole and the seam never tears them apart.
    void stage_for_reentry(int id) {
        const Pedestrian& agent = pop_.ped(id);
        const int origin = status_[static_cast<std::size_t>(id)].origin_start;
        if (agent.group_id < 0) {
            pending_[static_cast<std::size_t>(origin)].push_back({{id}});
            return;
        }
        const Group& g = pop_.forest().group(agent.group_id);
        for (int member : g.members) {
            if (status_[static_cast<std::size_t>(member)].phase != AgentPhase::Staged) {
                return;  // still walking; the last arrival queues the party
            }
        }
        pending_[static_cast<std::size_t>(origin)].push_back({g.members});
    }

    void process_queues(StepTrace& trace) {
        for (int marker_idx : start_markers_) {
            auto& queue = pending_[static_cast<std::size_t>(marker_idx)];
            while (!queue.empty()) {
                if (!place_party(marker_idx, queue.front(), trace)) {
                    ++deferred_events_;
                    break;  // strict FIFO: the head keeps its turn
                }
                queue.pop_front();
            }
        }
    }

    bool place_party(int marker_idx, const PendingParty& party, StepTrace& trace) {
        const Marker& start = grid_.markers()[static_cast<std::size_t>(marker_idx)];
        const auto cells = place_members(
            grid_, start, static_cast<int>(party.members.size()), rng_);
        if (!cells) return false;
        for (std::size_t i = 0; i < party.members.size(); ++i) {
            const int id = party.members[i];
            Pedestrian& agent = pop_.ped(id);
            grid_.add_occupant((*cells)[i], id);
            agent.pos = (*cells)[i];
            agent.prev_direction = Action::X;
            status_[static_cast<std::size_t>(id)].phase = AgentPhase::Live;
            trace.placed.push_back(id);
        }
        return true;
    }

    void process_frequency_spawns(StepTrace& trace) {
        if (scenario_.population.mode != GenerationMode::FrequencyBased) return;
        if (scenario_.population.rate <= 0.0 || start_markers_.empty()) return;
        GenerationSpec spec;
        spec.mode = GenerationMode::FrequencyBased;
        spec.rate = scenario_.population.rate /
                    static_cast<double>(start_markers_.size());
        spec.group_mix = scenario_.population.group_mix;
        const std::optional<int> cap = scenario_.population.total;
        for (std::size_t s = 0; s < start_markers_.size(); ++s) {
            if (cap && spawned_by_frequency_ >= *cap) return;
            const std::optional<int> size = sample_arrival(spec, rng_);
            if (!size) continue;
            int party_size = *size;
            if (cap) party_size = std::min(party_size, *cap - spawned_by_frequency_);
            if (party_size < 1) continue;
            spawned_by_frequency_ += party_size;
            const int marker_idx = start_markers_[s];
            auto& queue = pending_[static_cast<std::size_t>(marker_idx)];
            const bool head_free = queue.empty();
            enqueue_new_party(static_cast<int>(s), party_size);
            if (head_free && place_party(marker_idx, queue.front(), trace)) {
                queue.pop_front();
            }
        }
    }

    int pending_party_count() const {
        int n = 0;
        for (const auto& queue : pending_) n += static_cast<int>(queue.size());
        return n;
    }

    Scenario scenario_;
    Grid grid_;
    Population pop_;
    RandomStream rng_;
    std::map<int, FieldLayer> path_fields_;
    FieldLayer obstacle_field_;
    FieldLayer density_field_;
    std::vector<int> start_markers_;  // marker indices
    std::vector<AgentStatus> status_;
    std::vector<std::deque<PendingParty>> pending_;  // per marker index
    StepTrace initial_trace_;
    int step_ = 0;
    int arrivals_total_ = 0;
    long deferred_events_ = 0;
    int spawned_by_frequency_ = 0;
};

struct RunSummary {
    std::string scenario;
    int steps = 0;
    double simulated_seconds = 0.0;
    int population = 0;
    int arrivals = 0;
    long deferred_events = 0;
    double mean_density = 0.0;  // ped/m^2 over the whole grid
    double mean_speed = 0.0;    // m/s over agent transits
    double mean_flow = 0.0;     // ped/(m*s), density * speed
    std::map<int, double> mean_speed_by_size;
    std::map<int, double> mean_area_dispersion;  // cells/member by group size
};

inline void write_summary(std::ostream& os, const RunSummary& s) {
    os << "scenario=" << s.scenario << '\n';
    os << "steps=" << s.steps << '\n';
    os << "simulated_seconds=" << s.simulated_seconds << '\n';
    os << "population=" << s.population << '\n';
    os << "arrivals=" << s.arrivals << '\n';
    os << "deferred_events=" << s.deferred_events << '\n';
    os << "mean_density=" << s.mean_density << '\n';
    os << "mean_speed=" << s.mean_speed << '\n';
    os << "mean_flow=" << s.mean_flow << '\n';
    for (const auto& [size, v] : s.mean_speed_by_size) {
        os << "mean_speed_size_" << size << "=" << v << '\n';
    }
    for (const auto& [size, v] : s.mean_area_dispersion) {
        os << "mean_area_dispersion_size_" << size << "=" << v << '\n';
    }
}

struct RunResult {
    TrajectoryLog log;
    RunSummary summary;
};

namespace detail {

inline void append_step_records(TrajectoryLog& log, const Population& pop,
                                const StepTrace& trace) {
    std::vector<TrajectoryRecord> rows;
    for (const MoveTrace& m : trace.moves) {
        const Pedestrian& p = pop.ped(m.agent_id);
        rows.push_back({trace.step, m.agent_id, p.group_id, m.to.row, m.to.col,
                        m.action});
    }
    for (int id : trace.placed) {
        const Pedestrian& p = pop.ped(id);
        rows.push_back({trace.step, id, p.group_id, p.pos.row, p.pos.col,
                        Action::X});
    }
    std::sort(rows.begin(), rows.end(),
              [](const TrajectoryRecord& a, const TrajectoryRecord& b) {
                  return a.agent_id < b.agent_id;
              });
    log.records.insert(log.records.end(), rows.begin(), rows.end());
}

}  // namespace detail

// Executes a scenario end to end and computes the run summary. The sample
// interval for the dispersion series keeps the summary cheap on long runs.
inline RunResult run_scenario(Scenario sc,
                              std::optional<std::uint64_t> seed_override = {},
                              std::optional<int> steps_override = {},
                              int dispersion_interval = 15) {
    if (seed_override) sc.seed = *seed_override;
    if (steps_override) sc.steps = *steps_override;
    const int steps = sc.steps;
    Simulation sim(std::move(sc));

    RunResult out;
    out.log.meta.rows = sim.grid().rows();
    out.log.meta.cols = sim.grid().cols();
    out.log.meta.cell_m = kCellSizeM;
    out.log.meta.interval_s = kStepSeconds;
    out.log.meta.wrap = sim.grid().wrap();
    detail::append_step_records(out.log, sim.population(), sim.initial_trace());

    std::map<int, long> live_per_step;
    live_per_step[0] = static_cast<long>(sim.initial_trace().placed.size());
    for (int i = 0; i < steps; ++i) {
        const StepTrace trace = sim.step();
        detail::append_step_records(out.log, sim.population(), trace);
        live_per_step[trace.step] = static_cast<long>(sim.live_agent_ids().size());
    }

    RunSummary& s = out.summary;
    s.scenario = sim.scenario().name;
    s.steps = steps;
    s.simulated_seconds = steps * kStepSeconds;
    s.population = sim.population().size();
    s.arrivals = sim.arrivals();
    s.deferred_events = sim.deferred_events();
    double count_sum = 0.0;
    for (const auto& [step, n] : live_per_step) count_sum += static_cast<double>(n);
    s.mean_density = count_sum / static_cast<double>(live_per_step.size()) /
                     sim.grid().area_m2();
    const auto by_size = speeds_by_group_size(out.log);
    double speed_sum = 0.0;
    long speed_n = 0;
    for (const auto& [size, speeds] : by_size) {
        double cohort = 0.0;
        for (double v : speeds) cohort += v;
        speed_sum += cohort;
        speed_n += static_cast<long>(speeds.size());
        if (!speeds.empty()) {
            s.mean_speed_by_size[size] = cohort / static_cast<double>(speeds.size());
        }
    }
    s.mean_speed = speed_n > 0 ? speed_sum / static_cast<double>(speed_n) : 0.0;
    s.mean_flow = s.mean_density * s.mean_speed;
    std::set<int> logged_groups;
    for (const TrajectoryRecord& r : out.log.records) {
        if (r.group_id >= 0) logged_groups.insert(r.group_id);
    }
    std::map<int, std::pair<double, long>> disp_acc;  // size -> (sum, n)
    for (int gid = 0; gid < sim.population().forest().size(); ++gid) {
        const Group& g = sim.population().forest().group(gid);
        if (g.members.empty()) continue;
        // A group still waiting to enter at the end of a short run has no
        // records to measure.
        if (logged_groups.count(gid) == 0) continue;
        const DispersionSeries series =
            dispersion_series(out.log, gid, dispersion_interval);
        for (const DispersionSample& sample : series.samples) {
            auto& [sum, n] = disp_acc[static_cast<int>(g.members.size())];
            sum += sample.area_cells;
            ++n;
        }
    }
    for (const auto& [size, acc] : disp_acc) {
        if (acc.second > 0) {
            s.mean_area_dispersion[size] = acc.first / static_cast<double>(acc.second);
        }
    }
    return out;
}

}  // namespace pedflow

#endif
