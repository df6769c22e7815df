#pragma once

#include "frameloc/errors.hpp"
#include "frameloc/se3.hpp"
#include "frameloc/graph.hpp"
#include "frameloc/estimators.hpp"
#include "frameloc/simulation.hpp"
#include "frameloc/scenario_io.hpp"
#include "frameloc/runner.hpp"
