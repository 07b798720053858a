#pragma once

#include "pdppo/agents/agent.hpp"
#include "pdppo/agents/categorical.hpp"
#include "pdppo/agents/config.hpp"
#include "pdppo/agents/objectives.hpp"
#include "pdppo/env/bandit.hpp"
#include "pdppo/env/environment.hpp"
#include "pdppo/env/frozen_lake.hpp"
#include "pdppo/env/lot_sizing.hpp"
#include "pdppo/error.hpp"
#include "pdppo/harness/checkpoint.hpp"
#include "pdppo/harness/config.hpp"
#include "pdppo/harness/experiment.hpp"
#include "pdppo/harness/stats.hpp"
#include "pdppo/nn/mlp.hpp"
#include "pdppo/nn/optimizer.hpp"
#include "pdppo/random.hpp"
