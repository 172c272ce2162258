#include "bdff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "bdff/rng.hpp"

namespace bdff::nn {

double GradCheckReport::max_rel_err() const {
  double m = 0.0;
  for (const auto& b : blocks) m = std::max(m, b.max_rel_err);
  return m;
}

bool GradCheckReport::pass() const {
  for (const auto& b : blocks) {
    if (!(b.max_rel_err < tolerance)) return false;
  }
  return true;
}

std::vector<std::string> GradCheckReport::failures() const {
  std::vector<std::string> out;
  for (const auto& b : blocks) {
    if (!(b.max_rel_err < tolerance)) out.push_back(b.name);
  }
  return out;
}

std::string GradCheckReport::table() const {
  size_t width = 16;
  for (const auto& b : blocks) width = std::max(width, b.name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width) + 2) << "parameter block"
     << std::setw(14) << "max rel err" << "status\n";
  for (const auto& b : blocks) {
    os << std::left << std::setw(static_cast<int>(width) + 2) << b.name << std::setw(14)
       << std::scientific << std::setprecision(3) << b.max_rel_err
       << (b.max_rel_err < tolerance ? "ok" : "FAIL") << "\n";
  }
  return os.str();
}

GradCheckReport grad_check(GraphRuntime<double>& runtime,
                           const std::map<std::string, Tensor64>& inputs, double tolerance,
                           uint64_t seed, double fd_step, int64_t max_elems_per_block) {
  GradCheckReport report;
  report.tolerance = tolerance;

  // Fixed random projection per tap makes the objective a scalar.
  RandomStream rng(seed, "grad_check");
  runtime.forward(inputs, Mode::Check);
  std::map<std::string, Tensor64> projections;
  for (const auto& tap : runtime.graph().taps) {
    const Tensor64& act = runtime.activation(tap);
    Tensor64 r(act.shape);
    for (auto& v : r.values) v = rng.uniform(-1.0, 1.0);
    projections[tap] = std::move(r);
  }
  if (projections.empty()) throw UsageError("grad_check: graph declares no supervision taps");

  auto objective = [&]() {
    runtime.forward(inputs, Mode::Check);
    double s = 0.0;
    for (const auto& [tap, r] : projections) {
      const Tensor64& act = runtime.activation(tap);
      for (int64_t i = 0; i < act.numel(); ++i) s += act.values[i] * r.values[i];
    }
    return s;
  };

  runtime.zero_grad();
  runtime.forward(inputs, Mode::Check);
  runtime.backward(projections);

  for (const auto& name : runtime.param_names()) {
    Tensor64& p = runtime.param(name);
    GradCheckBlock block;
    block.name = name;
    std::vector<int64_t> indices;
    if (max_elems_per_block > 0 && p.numel() > max_elems_per_block) {
      for (int64_t k = 0; k < max_elems_per_block; ++k) {
        indices.push_back(k * p.numel() / max_elems_per_block);
      }
    } else {
      indices.resize(p.numel());
      for (int64_t k = 0; k < p.numel(); ++k) indices[k] = k;
    }
    for (int64_t i : indices) {
      const double saved = p.values[i];
      p.values[i] = saved + fd_step;
      const double up = objective();
      p.values[i] = saved - fd_step;
      const double down = objective();
      p.values[i] = saved;
      const double fd = (up - down) / (2.0 * fd_step);
      const double an = p.grad[i];
      // absolute floor keeps exact-zero gradients (e.g. a conv bias feeding
      // batch norm) from amplifying finite-difference noise
      const double rel = std::fabs(an - fd) / std::max({std::fabs(an), std::fabs(fd), 1e-4});
      if (rel > block.max_rel_err) {
        block.max_rel_err = rel;
        block.analytic_at_worst = an;
        block.fd_at_worst = fd;
        block.worst_index = i;
      }
    }
    report.blocks.push_back(std::move(block));
  }
  return report;
}

}  // namespace bdff::nn
