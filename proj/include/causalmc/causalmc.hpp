#pragma once

// Umbrella header.

#include "causalmc/partial_tensor.hpp"
#include "causalmc/scm.hpp"
#include "causalmc/estimators.hpp"
#include "causalmc/patterns.hpp"
#include "causalmc/distributions.hpp"
#include "causalmc/hypothesis_tests.hpp"
#include "causalmc/io.hpp"
#include "causalmc/harness.hpp"
