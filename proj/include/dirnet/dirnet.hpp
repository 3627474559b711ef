#pragma once

#include "dirnet/analytic.hpp"
#include "dirnet/core_model.hpp"
#include "dirnet/errors.hpp"
#include "dirnet/experiments.hpp"
#include "dirnet/montecarlo.hpp"
#include "dirnet/specfun.hpp"
