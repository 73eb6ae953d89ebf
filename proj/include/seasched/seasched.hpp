#pragma once

#include "seasched/baselines.hpp"
#include "seasched/channel.hpp"
#include "seasched/core.hpp"
#include "seasched/objective.hpp"
#include "seasched/ratelink.hpp"
#include "seasched/scenario.hpp"
#include "seasched/scheduler.hpp"
#include "seasched/solver.hpp"
