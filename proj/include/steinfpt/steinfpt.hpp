#pragma once

#include "steinfpt/config.hpp"
#include "steinfpt/convergence.hpp"
#include "steinfpt/errors.hpp"
#include "steinfpt/fpt_reset.hpp"
#include "steinfpt/io.hpp"
#include "steinfpt/model.hpp"
#include "steinfpt/network_spec.hpp"
#include "steinfpt/ou_sim.hpp"
#include "steinfpt/rng.hpp"
#include "steinfpt/stats.hpp"
#include "steinfpt/stein_sim.hpp"
