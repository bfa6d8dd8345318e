#ifndef PEDFLOW_PEDFLOW_HPP
#define PEDFLOW_PEDFLOW_HPP

#include "pedflow/core.hpp"
#include "pedflow/random.hpp"
#include "pedflow/markers.hpp"
#include "pedflow/grid.hpp"
#include "pedflow/fields.hpp"
#include "pedflow/population.hpp"
#include "pedflow/behavior.hpp"
#include "pedflow/trajectory.hpp"
#include "pedflow/stats.hpp"
#include "pedflow/metrics.hpp"
#include "pedflow/scenario.hpp"
#include "pedflow/engine.hpp"
#include "pedflow/sweep.hpp"

#endif
