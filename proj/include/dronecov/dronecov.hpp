#pragma once

#include "dronecov/analytic_coverage.hpp"
#include "dronecov/channel_model.hpp"
#include "dronecov/config.hpp"
#include "dronecov/errors.hpp"
#include "dronecov/experiments.hpp"
#include "dronecov/monte_carlo.hpp"
#include "dronecov/quadrature.hpp"
#include "dronecov/rng.hpp"
