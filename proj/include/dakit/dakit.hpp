#pragma once

// Umbrella header. Individual headers can also be included directly;
// cli.hpp is left out because it pulls in the CLI11 dependency.

#include "dakit/config.hpp"
#include "dakit/csv.hpp"
#include "dakit/errors.hpp"
#include "dakit/fusion.hpp"
#include "dakit/models.hpp"
#include "dakit/ode.hpp"
#include "dakit/piecewise.hpp"
#include "dakit/rng.hpp"
#include "dakit/runoff.hpp"
#include "dakit/twin.hpp"
#include "dakit/util.hpp"
#include "dakit/version.hpp"
