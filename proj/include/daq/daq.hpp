#pragma once

#include "daq/agents.hpp"
#include "daq/analysis.hpp"
#include "daq/config.hpp"
#include "daq/core.hpp"
#include "daq/envs.hpp"
#include "daq/game.hpp"
#include "daq/harness.hpp"
