#ifndef PAIRSCOPE_PAIRSCOPE_HPP
#define PAIRSCOPE_PAIRSCOPE_HPP

#include "commands.hpp"
#include "config.hpp"
#include "constants.hpp"
#include "error.hpp"
#include "firstlevel.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "ionosphere.hpp"
#include "phase.hpp"
#include "pipeline.hpp"
#include "report.hpp"
#include "rng.hpp"
#include "secondlevel.hpp"
#include "simulator.hpp"
#include "statistics.hpp"
#include "types.hpp"

#endif
