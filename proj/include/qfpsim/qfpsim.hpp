#pragma once

// Umbrella header for the full library.

#include "qfpsim/analysis.hpp"
#include "qfpsim/devices.hpp"
#include "qfpsim/engine.hpp"
#include "qfpsim/errors.hpp"
#include "qfpsim/io.hpp"
#include "qfpsim/netlist.hpp"
#include "qfpsim/version.hpp"
