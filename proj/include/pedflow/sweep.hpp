#ifndef PEDFLOW_SWEEP_HPP
#define PEDFLOW_SWEEP_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <vector>

#include "pedflow/engine.hpp"
#include "pedflow/metrics.hpp"
#include "pedflow/stats.hpp"

namespace pedflow {

struct SweepSpec {
    Scenario base;                       // population plan overridden per level
    std::vector<double> density_levels;  // ped/m^2, ascending
    int min_reps = 3;
    int max_reps = 8;
    double cv_threshold = 0.05;  // stop adding reps once flow CV drops below
    std::uint64_t seed_base = 1;
    int warmup_steps = 300;  // discarded before measuring
    int window_steps = 60;   // ~20 s measurement windows
    bool parallel = false;

    void validate() const {
        if (density_levels.empty()) {
            throw ValidationError("sweep needs at least one density level");
        }
        for (double d : density_levels) {
            if (d < 0.0) throw ValidationError("density levels must be >= 0");
        }
        if (min_reps < 1) throw ValidationError("sweep needs at least one repetition");
        if (max_reps < min_reps) {
            throw ValidationError("max repetitions must be >= min repetitions");
        }
        if (cv_threshold < 0.0) throw ValidationError("cv threshold must be >= 0");
        if (warmup_steps < 0) throw ValidationError("warmup must be >= 0 steps");
        if (warmup_steps >= base.steps) {
            throw ValidationError("warmup must leave steps to measure");
        }
        if (window_steps < 1) throw ValidationError("window must be >= 1 step");
    }
};

struct RepMeasure {
    double mean_density = 0.0;
    double mean_speed = 0.0;
    double mean_flow = 0.0;
    std::map<int, double> speed_by_size;
    std::map<int, double> dispersion_by_size;  // hull cells per member
};

struct LevelResult {
    double density_level = 0.0;  // requested ped/m^2
    int reps = 0;
    int failed_reps = 0;        // runs that threw; aggregation skips them
    double mean_density = 0.0;  // measured, post-warmup
    double mean_speed = 0.0;
    double mean_flow = 0.0;
    double flow_cv = 0.0;  // coefficient of variation across reps
    std::vector<double> rep_flows;
    std::map<int, double> speed_by_size;
    std::map<int, double> dispersion_by_size;
};

// Observer for finished runs (level index, rep index, full result). With a
// parallel sweep it is invoked from worker threads, one call per run; writing
// to per-run files needs no locking, shared state does.
using RunSink =
    std::function<void(std::size_t level_idx, int rep, const RunResult&)>;

struct SweepResult {
    std::vector<LevelResult> levels;
    double critical_density = 0.0;  // level whose mean flow peaks
    double peak_flow = 0.0;
};

// Post-warmup aggregate of one finished run.
inline RepMeasure measure_run(const TrajectoryLog& log, int warmup_steps,
                              int window_steps, int dispersion_interval = 15) {
    TrajectoryLog trimmed;
    trimmed.meta = log.meta;
    for (const TrajectoryRecord& r : log.records) {
        if (r.step >= warmup_steps) trimmed.records.push_back(r);
    }
    RepMeasure out;
    if (trimmed.records.empty()) return out;

    const auto points = fundamental_diagram(trimmed, CellRect::full(trimmed.meta),
                                            std::nullopt, window_steps);
    if (!points.empty()) {
        double d = 0.0, v = 0.0, q = 0.0;
        for (const FundamentalDiagramPoint& p : points) {
            d += p.density;
            v += p.velocity;
            q += p.flow;
        }
        const double n = static_cast<double>(points.size());
        out.mean_density = d / n;
        out.mean_speed = v / n;
        out.mean_flow = q / n;
    }

    for (const auto& [size, speeds] : speeds_by_group_size(trimmed)) {
        if (speeds.empty()) continue;
        out.speed_by_size[size] = mean(speeds);
    }

    std::map<int, int> seen_groups;  // group id -> size, from the records
    for (const TrajectoryRecord& r : trimmed.records) {
        if (r.group_id >= 0) seen_groups.emplace(r.group_id, 0);
    }
    std::map<int, std::pair<double, long>> acc;  // size -> (sum, n)
    for (auto& [gid, size] : seen_groups) {
        std::map<int, bool> members;
        for (const TrajectoryRecord& r : trimmed.records) {
            if (r.group_id == gid) members.emplace(r.agent_id, true);
        }
        size = static_cast<int>(members.size());
        const DispersionSeries series =
            dispersion_series(trimmed, gid, dispersion_interval);
        for (const DispersionSample& s : series.samples) {
            auto& [sum, n] = acc[size];
            sum += s.area_cells;
            ++n;
        }
    }
    for (const auto& [size, sums] : acc) {
        if (sums.second > 0) {
            out.dispersion_by_size[size] =
                sums.first / static_cast<double>(sums.second);
        }
    }
    return out;
}

namespace detail {

inline std::optional<RepMeasure> run_one_rep(const SweepSpec& spec, double level,
                                             std::uint64_t seed,
                                             std::size_t level_idx, int rep,
                                             const RunSink& sink) {
    try {
        Scenario sc = spec.base;
        sc.population.mode = GenerationMode::EnBloc;
        sc.population.total.reset();
        sc.population.density_ped_m2 = level;
        const RunResult rr = run_scenario(std::move(sc), seed);
        if (sink) sink(level_idx, rep, rr);
        return measure_run(rr.log, spec.warmup_steps, spec.window_steps);
    } catch (const Error&) {
        return std::nullopt;  // reported via failed_reps; others keep going
    }
}

inline double coefficient_of_variation(const std::vector<double>& values) {
    if (values.size() < 2) return std::numeric_limits<double>::infinity();
    const double m = mean(values);
    if (m == 0.0) return 0.0;
    return std::sqrt(sample_variance(values)) / std::fabs(m);
}

}  // namespace detail

// Runs every density level with adaptive repetitions: each level starts with
// min_reps runs and adds more (up to max_reps) until the flow estimate
// stabilises. Seeds depend only on (level index, rep index), so results do
// not change when adaptivity takes a different number of reps elsewhere.
inline SweepResult run_sweep(const SweepSpec& spec, const RunSink& sink = {}) {
    spec.validate();
    SweepResult out;
    for (std::size_t li = 0; li < spec.density_levels.size(); ++li) {
        const double level = spec.density_levels[li];
        std::vector<RepMeasure> reps;
        int attempts = 0;
        int failures = 0;
        const auto seed_for = [&](int rep) {
            return spec.seed_base +
                   static_cast<std::uint64_t>(li) *
                       static_cast<std::uint64_t>(spec.max_reps) +
                   static_cast<std::uint64_t>(rep);
        };
        const auto fold = [&](std::optional<RepMeasure> m) {
            if (m) {
                reps.push_back(std::move(*m));
            } else {
                ++failures;
            }
        };
        const auto run_batch = [&](int first, int count) {
            attempts += count;
            if (spec.parallel && count > 1) {
                std::vector<std::future<std::optional<RepMeasure>>> futures;
                for (int r = first; r < first + count; ++r) {
                    futures.push_back(std::async(std::launch::async,
                                                 detail::run_one_rep, spec, level,
                                                 seed_for(r), li, r, sink));
                }
                for (auto& f : futures) fold(f.get());
            } else {
                for (int r = first; r < first + count; ++r) {
                    fold(detail::run_one_rep(spec, level, seed_for(r), li, r, sink));
                }
            }
        };
        run_batch(0, spec.min_reps);
        auto flows = [&]() {
            std::vector<double> v;
            for (const RepMeasure& m : reps) v.push_back(m.mean_flow);
            return v;
        };
        while (attempts < spec.max_reps &&
               detail::coefficient_of_variation(flows()) > spec.cv_threshold) {
            run_batch(attempts, 1);
        }

        LevelResult lr;
        lr.density_level = level;
        lr.reps = static_cast<int>(reps.size());
        lr.failed_reps = failures;
        lr.rep_flows = flows();
        lr.flow_cv = detail::coefficient_of_variation(lr.rep_flows);
        std::map<int, std::pair<double, long>> speed_acc, disp_acc;
        for (const RepMeasure& m : reps) {
            lr.mean_density += m.mean_density;
            lr.mean_speed += m.mean_speed;
            lr.mean_flow += m.mean_flow;
            for (const auto& [size, v] : m.speed_by_size) {
                speed_acc[size].first += v;
                ++speed_acc[size].second;
            }
            for (const auto& [size, v] : m.dispersion_by_size) {
                disp_acc[size].first += v;
                ++disp_acc[size].second;
            }
        }
        const double n = std::max<double>(1.0, static_cast<double>(reps.size()));
        lr.mean_density /= n;
        lr.mean_speed /= n;
        lr.mean_flow /= n;
        for (const auto& [size, acc] : speed_acc) {
            lr.speed_by_size[size] = acc.first / static_cast<double>(acc.second);
        }
        for (const auto& [size, acc] : disp_acc) {
            lr.dispersion_by_size[size] = acc.first / static_cast<double>(acc.second);
        }
        out.levels.push_back(std::move(lr));
    }
    for (const LevelResult& lr : out.levels) {
        if (lr.mean_flow > out.peak_flow) {
            out.peak_flow = lr.mean_flow;
            out.critical_density = lr.density_level;
        }
    }
    return out;
}

inline void write_sweep(std::ostream& os, const SweepResult& result) {
    os << "level\treps\tdensity\tspeed\tflow\tflow_cv\n";
    for (const LevelResult& lr : result.levels) {
        os << lr.density_level << '\t' << lr.reps << '\t' << lr.mean_density
           << '\t' << lr.mean_speed << '\t' << lr.mean_flow << '\t' << lr.flow_cv
           << '\n';
    }
    os << "critical_density=" << result.critical_density << '\n';
    os << "peak_flow=" << result.peak_flow << '\n';
}

}  // namespace pedflow

#endif
