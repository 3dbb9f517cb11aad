#pragma once

#include <string>

#include "mnflow/common.hpp"

namespace mnflow {

// Time-stamped state sequence produced by an integrator, a fixed-point
// iteration or an analytic solution.
struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  std::string meta;

  const Vec& terminal() const { return states.back(); }
  int size() const { return static_cast<int>(states.size()); }

  void push(double t, const Vec& y) {
    if (!all_finite(y)) throw NonFinite("trajectory: non-finite state at t=" + std::to_string(t));
    times.push_back(t);
    states.push_back(y);
  }
};

}  // namespace mnflow
