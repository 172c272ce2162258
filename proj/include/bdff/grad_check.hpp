#pragma once

#include <map>
#include <string>
#include <vector>

#include "bdff/graph.hpp"

namespace bdff::nn {

struct GradCheckBlock {
  std::string name;
  double max_rel_err = 0.0;
  double analytic_at_worst = 0.0;
  double fd_at_worst = 0.0;
  int64_t worst_index = -1;
};

struct GradCheckReport {
  std::vector<GradCheckBlock> blocks;
  double tolerance = 1e-3;

  double max_rel_err() const;
  bool pass() const;
  std::vector<std::string> failures() const;
  std::string table() const;  // aligned text, one row per parameter block
};

// Compares analytic parameter gradients against central finite differences
// of the scalar objective sum_taps <tap, R_tap> with fixed random R. Runs
// the graph in Check mode (batch statistics, frozen running stats), double
// precision only. max_elems_per_block > 0 checks a deterministic evenly
// spaced subset of each block (for large composite graphs); 0 checks all.
GradCheckReport grad_check(GraphRuntime<double>& runtime,
                           const std::map<std::string, Tensor64>& inputs, double tolerance,
                           uint64_t seed = 7, double fd_step = 1e-5,
                           int64_t max_elems_per_block = 0);

}  // namespace bdff::nn
