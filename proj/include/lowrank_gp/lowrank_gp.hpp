#pragma once

#include "lowrank_gp/bessel.hpp"
#include "lowrank_gp/cholesky.hpp"
#include "lowrank_gp/complexity.hpp"
#include "lowrank_gp/csv.hpp"
#include "lowrank_gp/errors.hpp"
#include "lowrank_gp/gpcore.hpp"
#include "lowrank_gp/harness.hpp"
#include "lowrank_gp/kernel.hpp"
#include "lowrank_gp/knots.hpp"
#include "lowrank_gp/nelder_mead.hpp"
#include "lowrank_gp/parallel.hpp"
#include "lowrank_gp/predict.hpp"
#include "lowrank_gp/rng.hpp"
