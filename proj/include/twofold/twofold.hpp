#pragma once

#include "twofold/core.hpp"
#include "twofold/hysteresis.hpp"
#include "twofold/noise_mc.hpp"
#include "twofold/noise_pde.hpp"
#include "twofold/ode.hpp"
#include "twofold/selftest.hpp"
#include "twofold/sweep.hpp"
#include "twofold/timedelay.hpp"
#include "twofold/version.hpp"
