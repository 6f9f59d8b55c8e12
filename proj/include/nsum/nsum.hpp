#pragma once

#include "nsum/data_model.hpp"
#include "nsum/error.hpp"
#include "nsum/estimators.hpp"
#include "nsum/io.hpp"
#include "nsum/netsim.hpp"
#include "nsum/parallel.hpp"
#include "nsum/rng.hpp"
#include "nsum/sampling.hpp"
#include "nsum/sensitivity.hpp"
#include "nsum/simharness.hpp"
#include "nsum/variance.hpp"
