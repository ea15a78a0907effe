#pragma once

#include "phihilfer/errors.hpp"
#include "phihilfer/special_functions.hpp"
#include "phihilfer/expr.hpp"
#include "phihilfer/phi_kernel.hpp"
#include "phihilfer/frac_calc.hpp"
#include "phihilfer/solver.hpp"
#include "phihilfer/oracles.hpp"
#include "phihilfer/bounds.hpp"
#include "phihilfer/stability.hpp"
#include "phihilfer/config.hpp"
