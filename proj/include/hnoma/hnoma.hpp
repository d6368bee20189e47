#pragma once

#include "hnoma/config.hpp"
#include "hnoma/core_model.hpp"
#include "hnoma/estimate.hpp"
#include "hnoma/numeric.hpp"
#include "hnoma/monte_carlo.hpp"
#include "hnoma/closed_form.hpp"
#include "hnoma/quadrature.hpp"
#include "hnoma/asymptotics.hpp"
#include "hnoma/harness.hpp"
