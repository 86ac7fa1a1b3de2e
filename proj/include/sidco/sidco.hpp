#pragma once

// Everything in one include.

#include "sidco/error.hpp"
#include "sidco/numerics.hpp"
#include "sidco/random.hpp"
#include "sidco/frame.hpp"
#include "sidco/subproblem.hpp"
#include "sidco/driver.hpp"
#include "sidco/sparse.hpp"
#include "sidco/io.hpp"
#include "sidco/cli.hpp"
