#pragma once

#include "nray/analytic.hpp"
#include "nray/estimate.hpp"
#include "nray/model.hpp"
#include "nray/quadrature.hpp"
#include "nray/rng.hpp"
#include "nray/scenario.hpp"
#include "nray/simulate.hpp"
#include "nray/specfun.hpp"
