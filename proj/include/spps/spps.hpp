#pragma once

// Everything: grids and quadrature, formal powers, problem builders,
// Zakharov-Shabat systems, root finding, expressions and the config driver.

#include "spps/error.hpp"
#include "spps/grid.hpp"
#include "spps/expr.hpp"
#include "spps/series.hpp"
#include "spps/pencil.hpp"
#include "spps/problems.hpp"
#include "spps/zakharov_shabat.hpp"
#include "spps/roots.hpp"
#include "spps/driver.hpp"
