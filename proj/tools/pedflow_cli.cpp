// pedflow — floor-field crowd simulation runner and trajectory analyzer.
//
// Subcommands: run (single scenario), sweep (density series with repeated
// seeds), analyze (metric tables from a trajectory log), presets (bundled
// scenarios). Outputs are plain tab-separated tables. The default output
// directory comes from $PEDFLOW_OUT, falling back to the working directory.

#include <climits>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "pedflow/pedflow.hpp"

namespace fs = std::filesystem;
using namespace pedflow;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

fs::path default_out_dir() {
    if (const char* env = std::getenv("PEDFLOW_OUT"); env && *env) {
        return fs::path(env);
    }
    return fs::path(".");
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
    fs::create_directories(dir);
    std::ofstream os(dir / name);
    if (!os) throw Error("cannot write " + (dir / name).string());
    return os;
}

TrajectoryLog load_log(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open trajectory file '" + path + "'");
    return read_trajectory(is);
}

TrajectoryLog trim_warmup(const TrajectoryLog& log, int warmup) {
    if (warmup <= 0) return log;
    TrajectoryLog out;
    out.meta = log.meta;
    for (const TrajectoryRecord& r : log.records) {
        if (r.step >= warmup) out.records.push_back(r);
    }
    return out;
}

int cohort_of(const TrajectoryLog& log, int agent_id, const std::string& mode) {
    static std::map<int, int> group_size;  // lazily built per process
    if (group_size.empty()) {
        std::map<int, std::set<int>> members;
        for (const TrajectoryRecord& r : log.records) {
            if (r.group_id >= 0) members[r.group_id].insert(r.agent_id);
        }
        for (const auto& [gid, m] : members) {
            for (int id : m) group_size[id] = static_cast<int>(m.size());
        }
    }
    if (mode == "none") return 0;
    const auto it = group_size.find(agent_id);
    return it == group_size.end() ? 1 : it->second;
}

void emit_speeds(std::ostream& os, const TrajectoryLog& log,
                 const std::string& cohort_by) {
    std::map<int, std::vector<double>> cohorts;
    for (const auto& [id, recs] : log.by_agent()) {
        const auto v = agent_speed(recs, log.meta.interval_s);
        if (v) cohorts[cohort_of(log, id, cohort_by)].push_back(*v);
    }
    os << "# speeds (m/s) by cohort\n";
    os << "cohort\tn\tmean\tvariance\n";
    for (const auto& [size, v] : cohorts) {
        os << (size == 1 ? "individuals" : "size_" + std::to_string(size)) << '\t'
           << v.size() << '\t' << mean(v) << '\t'
           << (v.size() > 1 ? sample_variance(v) : 0.0) << '\n';
    }
    const auto label = [](int size) {
        return size == 1 ? std::string("individuals")
                         : "size_" + std::to_string(size);
    };
    os << "# pairwise two-tailed t-tests\n";
    os << "cohort_a\tcohort_b\tt\tdf\tp\n";
    for (auto a = cohorts.begin(); a != cohorts.end(); ++a) {
        for (auto b = std::next(a); b != cohorts.end(); ++b) {
            if (a->second.size() < 2 || b->second.size() < 2) continue;
            try {
                const TTestResult t = compare_means(a->second, b->second);
                os << label(a->first) << '\t' << label(b->first) << '\t' << t.t
                   << '\t' << t.df << '\t' << t.p << '\n';
            } catch (const DomainError&) {
                // degenerate cohort (zero variance both sides): no test
            }
        }
    }
}

void emit_diagram(std::ostream& os, const TrajectoryLog& log, int window) {
    os << "# fundamental diagram, window=" << window << " steps\n";
    os << "window_start\tdensity\tvelocity\tflow\tagents\n";
    for (const auto& p :
         fundamental_diagram(log, CellRect::full(log.meta), std::nullopt, window)) {
        os << p.window_start << '\t' << p.density << '\t' << p.velocity << '\t'
           << p.flow << '\t' << p.agents << '\n';
    }
}

void emit_los(std::ostream& os, const TrajectoryLog& log, int window) {
    const LOSTable table = LOSTable::walkway_default();
    os << "# level of service per window (flow in ped/min/m)\n";
    os << "window_start\tflow_ped_min_m\tgrade\n";
    for (const auto& p :
         fundamental_diagram(log, CellRect::full(log.meta), std::nullopt, window)) {
        const double per_min = p.flow * 60.0;
        os << p.window_start << '\t' << per_min << '\t'
           << level_of_service(per_min, table) << '\n';
    }
}

void emit_dispersion(std::ostream& os, const TrajectoryLog& log, int interval) {
    std::map<int, std::set<int>> members;
    for (const TrajectoryRecord& r : log.records) {
        if (r.group_id >= 0) members[r.group_id].insert(r.agent_id);
    }
    os << "# group dispersion, sampled every " << interval << " steps\n";
    os << "group\tsize\tsamples\tskipped\tmean_cells_per_member\tmean_m2_per_member\n";
    for (const auto& [gid, m] : members) {
        const DispersionSeries s = dispersion_series(log, gid, interval);
        double cells = 0.0;
        for (const auto& sample : s.samples) cells += sample.area_cells;
        const double n = s.samples.empty() ? 1.0 : double(s.samples.size());
        os << gid << '\t' << m.size() << '\t' << s.samples.size() << '\t'
           << s.skipped_steps.size() << '\t' << cells / n << '\t'
           << cells / n * kCellAreaM2 << '\n';
    }
}

void emit_arrangements(std::ostream& os, const TrajectoryLog& log, int interval) {
    os << "# arrangement classification per group sample\n";
    os << "group\tstep\tpattern\n";
    std::map<int, std::set<int>> members;
    std::map<std::pair<int, int>, CellIndex> at;
    int lo = INT_MAX, hi = INT_MIN;
    for (const TrajectoryRecord& r : log.records) {
        if (r.group_id < 0) continue;
        members[r.group_id].insert(r.agent_id);
        at[{r.step, r.agent_id}] = r.cell();
        lo = std::min(lo, r.step);
        hi = std::max(hi, r.step);
    }
    for (const auto& [gid, m] : members) {
        if (m.size() < 2 || m.size() > 5) continue;
        for (int s = lo + interval; s <= hi; s += interval) {
            std::vector<Vec2> now, before;
            for (int id : m) {
                const auto a = at.find({s, id});
                const auto b = at.find({s - interval, id});
                if (a == at.end() || b == at.end()) break;
                now.push_back(cell_center(a->second));
                before.push_back(cell_center(b->second));
            }
            if (now.size() != m.size()) continue;
            const Vec2 heading = group_centroid(now) - group_centroid(before);
            if (heading.norm() <= 1e-12) continue;
            os << gid << '\t' << s << '\t'
               << arrangement_name(classify_arrangement(now, heading)) << '\n';
        }
    }
}

void emit_positions(std::ostream& os, const TrajectoryLog& log, int interval) {
    os << "# member offsets from group centroid in heading coordinates (m)\n";
    os << "group\tagent\tstep\tlongitudinal\tlateral\n";
    for (const RelativePosition& p : relative_position_map(log, interval)) {
        os << p.group_id << '\t' << p.agent_id << '\t' << p.step << '\t'
           << p.longitudinal << '\t' << p.lateral << '\n';
    }
}

void emit_flows(std::ostream& os, const TrajectoryLog& log, int window,
                const std::string& section_arg) {
    Section section;
    section.axis = SectionAxis::Column;
    section.index = log.meta.cols / 2;
    if (!section_arg.empty()) {
        const auto colon = section_arg.find(':');
        const std::string axis = section_arg.substr(0, colon);
        if (colon == std::string::npos || (axis != "row" && axis != "col")) {
            throw ValidationError("section must be row:INDEX or col:INDEX");
        }
        section.axis = axis == "row" ? SectionAxis::Row : SectionAxis::Column;
        section.index = std::stoi(section_arg.substr(colon + 1));
    }
    os << "# crossings of the "
       << (section.axis == SectionAxis::Row ? "row" : "column") << ' '
       << section.index << " line per " << window << "-step window\n";
    os << "window_start\tincreasing\tdecreasing\n";
    for (const FlowCount& f : count_flows(log, section, window)) {
        os << f.window_start << '\t' << f.increasing << '\t' << f.decreasing
           << '\n';
    }
}

void emit_density(std::ostream& os, const TrajectoryLog& log, int interval) {
    os << "# whole-area density snapshots\n";
    os << "step\tdensity\n";
    for (const DensitySnapshot& s :
         density_snapshots(log, CellRect::full(log.meta), interval)) {
        os << s.step << '\t' << s.density << '\n';
    }
}

void write_run_outputs(const fs::path& dir, const RunResult& result,
                       const std::string& stem) {
    auto traj = open_out(dir, stem + "_trajectory.tsv");
    write_trajectory(traj, result.log);
    auto sum = open_out(dir, stem + "_summary.txt");
    write_summary(sum, result.summary);
}

int dispatch(int argc, char** argv) {
    CLI::App app{"floor-field crowd simulation and trajectory analysis"};
    app.require_subcommand(1);

    std::string scenario_ref;
    std::string out_dir = default_out_dir().string();
    std::uint64_t seed = 0;
    bool seed_set = false;
    int steps = 0;
    bool steps_set = false;

    auto* run = app.add_subcommand("run", "execute one scenario");
    run->add_option("--scenario", scenario_ref,
                    "preset name or scenario file path")
        ->required();
    run->add_option("--seed", seed, "override the scenario seed")
        ->each([&](const std::string&) { seed_set = true; });
    run->add_option("--steps", steps, "override the step count")
        ->each([&](const std::string&) { steps_set = true; });
    run->add_option("--out", out_dir, "output directory");

    std::string sweep_spec_path;
    std::string densities_arg = "0.25,0.5,0.75,1.0,1.25,1.5,1.75,2.0,2.25,2.5";
    int parallel = 1;
    int min_reps = 3, max_reps = 8;
    double cv_threshold = 0.05;
    int warmup = 300, window = 60;
    bool keep_logs = false;
    auto* sweep = app.add_subcommand("sweep", "density series over a scenario");
    sweep->add_option("--spec", sweep_spec_path, "sweep spec file (json)");
    sweep->add_option("--scenario", scenario_ref, "preset name or scenario file");
    sweep->add_option("--densities", densities_arg, "comma-separated ped/m^2");
    sweep->add_option("--seed", seed, "seed base")
        ->each([&](const std::string&) { seed_set = true; });
    sweep->add_option("--steps", steps, "override steps per run")
        ->each([&](const std::string&) { steps_set = true; });
    sweep->add_option("--parallel", parallel, "concurrent runs (1 = serial)");
    sweep->add_option("--min-reps", min_reps, "repetitions floor per level");
    sweep->add_option("--max-reps", max_reps, "repetitions cap per level");
    sweep->add_option("--cv", cv_threshold, "flow CV threshold for more reps");
    sweep->add_option("--warmup", warmup, "steps discarded before measuring");
    sweep->add_option("--window", window, "measurement window, steps");
    sweep->add_flag("--keep-logs", keep_logs, "write per-run trajectory files");
    sweep->add_option("--out", out_dir, "output directory");

    std::string log_path;
    std::string metrics_arg = "speeds,diagram";
    std::string cohort_by = "group_size";
    std::string section_arg;
    int analyze_warmup = 0;
    int interval = 15;
    auto* analyze = app.add_subcommand("analyze", "metric tables from a log");
    analyze->add_option("--log", log_path, "trajectory file")->required();
    analyze->add_option("--metrics", metrics_arg,
                        "comma list: speeds,diagram,los,dispersion,arrangements,"
                        "positions,flows,density");
    analyze->add_option("--cohort-by", cohort_by,
                        "speeds cohorts: group_size or none");
    analyze->add_option("--warmup", analyze_warmup, "drop records before step");
    analyze->add_option("--window", window, "window size, steps");
    analyze->add_option("--interval", interval, "sample interval, steps");
    analyze->add_option("--section", section_arg, "flow line, row:N or col:N");

    auto* presets = app.add_subcommand("presets", "list bundled scenarios");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (presets->parsed()) {
        for (const std::string& name : preset_names()) {
            const Scenario sc = preset_scenario(name);
            const Grid grid = build_scenario_grid(sc);
            std::cout << name << '\t' << sc.width_m << "x" << sc.length_m
                      << " m\t" << grid.rows() << "x" << grid.cols()
                      << " cells\n";
        }
        return kExitOk;
    }

    if (run->parsed()) {
        Scenario sc = resolve_scenario(scenario_ref);
        const RunResult result = run_scenario(
            std::move(sc), seed_set ? std::optional<std::uint64_t>(seed) : std::nullopt,
            steps_set ? std::optional<int>(steps) : std::nullopt);
        write_run_outputs(out_dir, result, result.summary.scenario.empty()
                                               ? "run"
                                               : result.summary.scenario);
        write_summary(std::cout, result.summary);
        return kExitOk;
    }

    if (sweep->parsed()) {
        SweepSpec spec;
        if (!sweep_spec_path.empty()) {
            std::ifstream is(sweep_spec_path);
            if (!is) {
                throw ValidationError("cannot open sweep spec '" + sweep_spec_path +
                                      "'");
            }
            nlohmann::json j = nlohmann::json::parse(is, nullptr, true, true);
            spec.base = resolve_scenario(j.at("scenario").get<std::string>());
            spec.density_levels = j.at("densities").get<std::vector<double>>();
            spec.min_reps = j.value("min_reps", spec.min_reps);
            spec.max_reps = j.value("max_reps", spec.max_reps);
            spec.cv_threshold = j.value("cv_threshold", spec.cv_threshold);
            spec.seed_base = j.value("seed_base", spec.base.seed);
            spec.warmup_steps = j.value("warmup_steps", spec.warmup_steps);
            spec.window_steps = j.value("window_steps", spec.window_steps);
        } else {
            if (scenario_ref.empty()) {
                std::cerr << "sweep needs --spec or --scenario\n";
                return kExitUsage;
            }
            spec.base = resolve_scenario(scenario_ref);
            spec.min_reps = min_reps;
            spec.max_reps = max_reps;
            spec.cv_threshold = cv_threshold;
            spec.warmup_steps = warmup;
            spec.window_steps = window;
            spec.seed_base = spec.base.seed;
            std::stringstream ss(densities_arg);
            std::string tok;
            spec.density_levels.clear();
            while (std::getline(ss, tok, ',')) {
                if (!tok.empty()) spec.density_levels.push_back(std::stod(tok));
            }
        }
        if (seed_set) spec.seed_base = seed;
        if (steps_set) spec.base.steps = steps;
        spec.parallel = parallel > 1;

        const fs::path dir(out_dir);
        RunSink sink;
        if (keep_logs) {
            sink = [&dir](std::size_t li, int rep, const RunResult& rr) {
                std::ostringstream name;
                name << "run_L" << li << "_R" << rep << "_trajectory.tsv";
                auto os = open_out(dir, name.str());
                write_trajectory(os, rr.log);
            };
        }
        const SweepResult result = run_sweep(spec, sink);

        auto table = open_out(dir, "sweep.tsv");
        std::set<int> sizes;
        for (const LevelResult& lr : result.levels) {
            for (const auto& [size, _] : lr.speed_by_size) sizes.insert(size);
        }
        table << "level\treps\tfailed\tdensity\tspeed\tflow\tflow_cv";
        for (int size : sizes) {
            table << '\t' << (size == 1 ? "v_individuals" : "v_size_" + std::to_string(size));
        }
        table << '\n';
        for (const LevelResult& lr : result.levels) {
            table << lr.density_level << '\t' << lr.reps << '\t' << lr.failed_reps
                  << '\t' << lr.mean_density << '\t' << lr.mean_speed << '\t'
                  << lr.mean_flow << '\t' << lr.flow_cv;
            for (int size : sizes) {
                const auto it = lr.speed_by_size.find(size);
                table << '\t';
                if (it != lr.speed_by_size.end()) table << it->second;
            }
            table << '\n';
        }
        table << "critical_density=" << result.critical_density << '\n';
        table << "peak_flow=" << result.peak_flow << '\n';

        auto disp = open_out(dir, "dispersion.tsv");
        std::set<int> disp_sizes;
        for (const LevelResult& lr : result.levels) {
            for (const auto& [size, _] : lr.dispersion_by_size) {
                disp_sizes.insert(size);
            }
        }
        disp << "level";
        for (int size : disp_sizes) disp << "\tsize_" << size;
        disp << '\n';
        for (const LevelResult& lr : result.levels) {
            disp << lr.density_level;
            for (int size : disp_sizes) {
                const auto it = lr.dispersion_by_size.find(size);
                disp << '\t';
                if (it != lr.dispersion_by_size.end()) disp << it->second;
            }
            disp << '\n';
        }

        write_sweep(std::cout, result);
        int failures = 0;
        for (const LevelResult& lr : result.levels) failures += lr.failed_reps;
        if (failures > 0) {
            std::cerr << "warning: " << failures
                      << " run(s) failed; aggregates cover the rest\n";
        }
        return kExitOk;
    }

    // analyze
    const TrajectoryLog full = load_log(log_path);
    const TrajectoryLog log = trim_warmup(full, analyze_warmup);
    if (log.records.empty()) {
        std::cerr << "warning: no records to analyze (empty or all before "
                     "--warmup); emitting empty tables\n";
    }
    std::stringstream ms(metrics_arg);
    std::string metric;
    while (std::getline(ms, metric, ',')) {
        if (metric.empty()) continue;
        if (metric == "speeds") {
            emit_speeds(std::cout, log, cohort_by);
        } else if (metric == "diagram") {
            emit_diagram(std::cout, log, window);
        } else if (metric == "los") {
            emit_los(std::cout, log, window);
        } else if (metric == "dispersion") {
            emit_dispersion(std::cout, log, interval);
        } else if (metric == "arrangements") {
            emit_arrangements(std::cout, log, interval);
        } else if (metric == "positions") {
            emit_positions(std::cout, log, interval);
        } else if (metric == "flows") {
            emit_flows(std::cout, log, window, section_arg);
        } else if (metric == "density") {
            emit_density(std::cout, log, interval);
        } else {
            std::cerr << "unknown metric '" << metric << "'\n";
            return kExitUsage;
        }
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}
