#ifndef PEDFLOW_BEHAVIOR_HPP
#define PEDFLOW_BEHAVIOR_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>

#include "pedflow/fields.hpp"
#include "pedflow/grid.hpp"
#include "pedflow/population.hpp"
#include "pedflow/random.hpp"

namespace pedflow {

struct UtilityWeights {
    double kappa_g = 60.0;   // goal attraction
    double kappa_ob = 30.0;  // wall repulsion
    double kappa_s = 20.0;   // separation from strangers
    double kappa_d = 10.0;   // directional inertia
    double kappa_ov = 80.0;  // overlap aversion
    double kappa_c = 30.0;   // simple-group cohesion
    double kappa_i = 10.0;   // structured-group cohesion

    void validate() const {
        for (double k : {kappa_g, kappa_ob, kappa_s, kappa_d, kappa_ov, kappa_c,
                         kappa_i}) {
            if (!(k >= 0.0 && k <= 100.0)) {
                throw ValidationError("utility weights must lie in [0, 100]");
            }
        }
    }
};

// The seven perception terms, each normalized into [-1, 1].
struct ComponentValues {
    double goal = 0.0;        // G: path-field gradient
    double obstacle = 0.0;    // Ob: wall proximity
    double separation = 0.0;  // S: nearby strangers
    double direction = 0.0;   // D: keeping the previous heading
    double overlap = 0.0;     // Ov: sharing the target cell
    double cohesion = 0.0;    // C: approach to the direct group's centroid
    double inter = 0.0;       // I: approach to the enclosing group's centroid
};

// Probability per action, aligned with kActionOrder; inadmissible actions
// carry exactly zero.
struct ActionDistribution {
    std::array<double, 9> p{};

    double of(Action a) const {
        for (std::size_t i = 0; i < kActionOrder.size(); ++i) {
            if (kActionOrder[i] == a) return p[i];
        }
        return 0.0;
    }
};

inline double disp_balance(double dispersion, double delta) {
    if (delta <= 0.0) throw ValidationError("dispersion scale must be > 0");
    return std::tanh(dispersion / delta);
}

enum class BalanceKind { Cohesion, Goal, Structured, Other };

// Trades goal attraction against cohesion as the group spreads out: a
// dispersed group pulls kappa_c toward full strength while the goal-seeking
// weights relax toward one third, and vice versa when compact.
inline double balance(double k, BalanceKind kind, double db) {
    switch (kind) {
        case BalanceKind::Cohesion:
            return k / 3.0 + (2.0 * k / 3.0) * db;
        case BalanceKind::Goal:
        case BalanceKind::Structured:
            return k / 3.0 + (2.0 * k / 3.0) * (1.0 - db);
        case BalanceKind::Other:
            break;
    }
    return k;
}

inline UtilityWeights effective_weights(const Pedestrian& agent,
                                        const UtilityWeights& base,
                                        const Population& pop,
                                        double delta = 2.5) {
    if (agent.group_id < 0) return base;
    UtilityWeights w = base;
    const double spread = dispersion_area(pop.member_cells(agent.group_id));
    const double db = disp_balance(spread, delta);
    w.kappa_c = balance(base.kappa_c, BalanceKind::Cohesion, db);
    w.kappa_g = balance(base.kappa_g, BalanceKind::Goal, db);
    w.kappa_i = balance(base.kappa_i, BalanceKind::Structured, db);
    return w;
}

// Candidate target per action (nullopt = inadmissible) plus the path-field
// range over the admissible neighborhood, which normalizes the goal term.
struct AdmissibleSet {
    std::array<std::optional<CellIndex>, 9> target{};
    double pf_min = 0.0;
    double pf_max = 0.0;
};

// A move is admissible when the cell exists (walls and non-wrapping edges
// excluded), is walkable, can still be reached from the path field, and has
// a free occupancy slot. Standing still is always admissible.
inline AdmissibleSet admissible_targets(const Grid& grid, const FieldLayer& path,
                                        const Pedestrian& agent) {
    AdmissibleSet out;
    bool seen = false;
    auto fold_pf = [&](CellIndex c) {
        const double pf = path.at(c);
        if (!std::isfinite(pf)) return;
        if (!seen) {
            out.pf_min = out.pf_max = pf;
            seen = true;
        } else {
            out.pf_min = std::min(out.pf_min, pf);
            out.pf_max = std::max(out.pf_max, pf);
        }
    };
    for (std::size_t i = 0; i < kActionOrder.size(); ++i) {
        const Action a = kActionOrder[i];
        if (a == Action::X) {
            out.target[i] = agent.pos;
            fold_pf(agent.pos);
            continue;
        }
        const auto cell = grid.neighbor(agent.pos, a);
        if (!cell || !grid.walkable(*cell)) continue;
        if (grid.occupancy(*cell) >= Grid::kMaxOccupancy) continue;
        if (!path.reachable(*cell)) continue;
        out.target[i] = *cell;
        fold_pf(*cell);
    }
    return out;
}

// Read-only state a single decision draws on.
struct DecisionInputs {
    const Grid* grid = nullptr;
    const Population* population = nullptr;
    const FieldLayer* path = nullptr;
    const FieldLayer* obstacle = nullptr;  // null disables the wall term
    double obstacle_max = 1.0;
    std::optional<Vec2> direct_centroid;
    std::optional<Vec2> largest_centroid;  // set only when it differs from direct
};

inline ComponentValues evaluate_components(const Pedestrian& agent, Action action,
                                           CellIndex target,
                                           const DecisionInputs& in,
                                           double pf_min, double pf_max) {
    const Grid& grid = *in.grid;
    ComponentValues out;

    const double pf = in.path->at(target);
    if (std::isfinite(pf) && pf_max > pf_min) {
        out.goal = (pf_max - pf) / (pf_max - pf_min);
    }

    if (in.obstacle != nullptr && in.obstacle_max > 0.0) {
        out.obstacle =
            std::clamp(-in.obstacle->at(target) / in.obstacle_max, -1.0, 0.0);
    }

    int strangers = 0;
    for (Action a : kActionOrder) {
        if (!is_move(a)) continue;
        const auto cell = grid.neighbor(target, a);
        if (!cell) continue;
        for (int occupant : grid.at(*cell).occupants) {
            if (occupant < 0 || occupant == agent.id) continue;
            if (agent.group_id >= 0 &&
                in.population->ped(occupant).group_id == agent.group_id) {
                continue;
            }
            ++strangers;
        }
    }
    out.separation = std::clamp(-strangers / 8.0, -1.0, 0.0);

    if (is_move(action) && is_move(agent.prev_direction)) {
        int diff = std::abs(compass_index(action) - compass_index(agent.prev_direction));
        diff = std::min(diff, 8 - diff);
        out.direction = diff == 0 ? 1.0 : (diff == 1 ? 0.5 : 0.0);
    }

    int sharing = 0;
    for (int occupant : grid.at(target).occupants) {
        if (occupant >= 0 && occupant != agent.id) ++sharing;
    }
    out.overlap = sharing == 0 ? 0.0 : -1.0;

    const double step_scale = kDiagonalStepM;  // one diagonal stride
    if (in.direct_centroid) {
        const Vec2 centre = *in.direct_centroid;
        const double now = (cell_center(agent.pos) - centre).norm();
        const double then = (cell_center(target) - centre).norm();
        out.cohesion = std::clamp((now - then) / step_scale, -1.0, 1.0);
    }
    if (in.largest_centroid) {
        const Vec2 centre = *in.largest_centroid;
        const double now = (cell_center(agent.pos) - centre).norm();
        const double then = (cell_center(target) - centre).norm();
        out.inter = std::clamp((now - then) / step_scale, -1.0, 1.0);
    }
    return out;
}

inline double compute_utility(const ComponentValues& v, const UtilityWeights& w,
                              bool diagonal) {
    const double sum = w.kappa_g * v.goal + w.kappa_ob * v.obstacle +
                       w.kappa_s * v.separation + w.kappa_d * v.direction +
                       w.kappa_ov * v.overlap + w.kappa_c * v.cohesion +
                       w.kappa_i * v.inter;
    return diagonal ? sum / std::sqrt(2.0) : sum;
}

// Softmax over the admissible actions, computed against the shifted maximum
// for numerical stability.
inline ActionDistribution action_probabilities(
    const std::array<bool, 9>& admissible, const std::array<double, 9>& utility) {
    ActionDistribution dist;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < 9; ++i) {
        if (admissible[i]) best = std::max(best, utility[i]);
    }
    if (!std::isfinite(best)) {
        throw DomainError("no admissible action");
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < 9; ++i) {
        if (!admissible[i]) continue;
        dist.p[i] = std::exp(utility[i] - best);
        norm += dist.p[i];
    }
    for (double& p : dist.p) p /= norm;
    return dist;
}

// Inverse-CDF sample over the fixed action order, one draw.
inline Action choose_action(const ActionDistribution& dist, RandomStream& rng) {
    const double u = rng.next_unit();
    double acc = 0.0;
    for (std::size_t i = 0; i < kActionOrder.size(); ++i) {
        acc += dist.p[i];
        if (u < acc) return kActionOrder[i];
    }
    return Action::X;  // guard against accumulated rounding
}

// One agent's full decision: admissibility, per-action utilities, and the
// resulting action distribution.
struct Decision {
    AdmissibleSet targets;
    std::array<double, 9> utility{};
    ActionDistribution distribution;
};

inline Decision evaluate_agent(const Pedestrian& agent, const DecisionInputs& in,
                               const UtilityWeights& effective) {
    Decision d;
    d.targets = admissible_targets(*in.grid, *in.path, agent);
    std::array<bool, 9> admissible{};
    for (std::size_t i = 0; i < kActionOrder.size(); ++i) {
        if (!d.targets.target[i]) continue;
        admissible[i] = true;
        const Action a = kActionOrder[i];
        const ComponentValues v = evaluate_components(
            agent, a, *d.targets.target[i], in, d.targets.pf_min, d.targets.pf_max);
        d.utility[i] = compute_utility(v, effective, is_diagonal(a));
    }
    d.distribution = action_probabilities(admissible, d.utility);
    return d;
}

}  // namespace pedflow

#endif
