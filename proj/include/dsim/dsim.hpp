#pragma once

// Umbrella header.

#include "dsim/types.hpp"
#include "dsim/random.hpp"
#include "dsim/region.hpp"
#include "dsim/region_io.hpp"
#include "dsim/geometry.hpp"
#include "dsim/dyadic.hpp"
#include "dsim/prefix_code.hpp"
#include "dsim/arithmetic.hpp"
#include "dsim/entropy.hpp"
#include "dsim/scaling.hpp"
#include "dsim/simulate.hpp"
#include "dsim/stats.hpp"
#include "dsim/protocol.hpp"
#include "dsim/experiments.hpp"
