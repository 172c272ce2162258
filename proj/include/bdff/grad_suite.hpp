#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bdff/grad_check.hpp"

namespace bdff::nn {

// Finite-difference sweep over every layer primitive plus each network
// constructor at reduced width on small inputs. Composite graphs check a
// deterministic subset of elements per block; primitives check all.
std::vector<std::pair<std::string, GradCheckReport>> run_grad_suite(
    double tolerance = 1e-3, int64_t composite_elems_per_block = 4);

}  // namespace bdff::nn
