#pragma once

#include "thinlab/bounds.hpp"
#include "thinlab/engine.hpp"
#include "thinlab/error.hpp"
#include "thinlab/experiments.hpp"
#include "thinlab/oracle.hpp"
#include "thinlab/process.hpp"
#include "thinlab/rng.hpp"
#include "thinlab/strategy.hpp"
#include "thinlab/trace_io.hpp"
