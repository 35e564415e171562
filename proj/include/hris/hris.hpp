#pragma once

#include "hris/error.hpp"
#include "hris/units.hpp"
#include "hris/rng.hpp"
#include "hris/channel.hpp"
#include "hris/sysmodel.hpp"
#include "hris/inner_problem.hpp"
#include "hris/inner_solver.hpp"
#include "hris/inner_oracle.hpp"
#include "hris/scheme.hpp"
#include "hris/nn.hpp"
#include "hris/agent.hpp"
#include "hris/env.hpp"
#include "hris/trainer.hpp"
#include "hris/config.hpp"
#include "hris/checkpoint.hpp"
#include "hris/csv.hpp"
#include "hris/harness.hpp"
