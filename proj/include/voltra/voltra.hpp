#pragma once

// Umbrella header: the whole library in dependency order.

#include "voltra/time_mesh.hpp"
#include "voltra/trajectory.hpp"
#include "voltra/control_policy.hpp"
#include "voltra/problem.hpp"
#include "voltra/forward_solver.hpp"
#include "voltra/paths.hpp"
#include "voltra/kernel_grid.hpp"
#include "voltra/linear_system.hpp"
#include "voltra/variational.hpp"
#include "voltra/adjoint.hpp"
#include "voltra/impulsive_ode.hpp"
#include "voltra/optimize.hpp"
#include "voltra/problems.hpp"
#include "voltra/verify.hpp"
#include "voltra/io.hpp"
