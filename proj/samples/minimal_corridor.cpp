// Smallest useful program: run one of the bundled corridor presets for a
// few hundred steps, print the run summary, then grade the corridor with
// the walkway level-of-service table.
//
//   ./minimal_corridor [density] [seed]

#include <cstdlib>
#include <iostream>

#include "pedflow/pedflow.hpp"

int main(int argc, char** argv) {
    using namespace pedflow;

    Scenario sc = preset_scenario("corridor_A");
    if (argc > 1) sc.population.density_ped_m2 = std::atof(argv[1]);
    if (argc > 2) sc.seed = std::strtoull(argv[2], nullptr, 10);
    sc.steps = 600;

    const RunResult run = run_scenario(sc);
    write_summary(std::cout, run.summary);

    // Flow through the corridor midline, graded per metre of width.
    const Section midline{SectionAxis::Column, run.log.meta.cols / 2};
    long crossings = 0;
    int windows = 0;
    for (const FlowCount& w : count_flows(run.log, midline, 60)) {
        crossings += w.increasing + w.decreasing;
        ++windows;
    }
    if (windows > 0) {
        const double width_m = run.log.meta.rows * kCellSizeM;
        const double minutes = windows * 60 * kStepSeconds / 60.0;
        const double flow = crossings / minutes / width_m;
        std::cout << "midline flow: " << flow << " ped/(min*m), grade "
                  << level_of_service(flow, LOSTable::walkway_default())
                  << "\n";
    }
    return 0;
}
