#ifndef IBFLOW_SCHEDULE_HPP
#define IBFLOW_SCHEDULE_HPP

#include <algorithm>
#include <cstddef>

#include "ibflow/error.hpp"

namespace ibflow {

/// Linear-decay tradeoff weight: alpha(t) = max(floor, alpha0 - t * delta).
struct AlphaSchedule {
  double alpha0 = 1.0;
  double delta = 1e-3;
  double floor = 0.0;
};

inline void validate(const AlphaSchedule& s) {
  if (s.alpha0 < 0.0 || s.alpha0 > 1.0)
    throw Error("alpha schedule: alpha0 outside [0, 1]");
  if (s.delta < 0.0) throw Error("alpha schedule: negative delta");
  if (s.floor > s.alpha0) throw Error("alpha schedule: floor above alpha0");
}

inline double alpha_at(const AlphaSchedule& s, std::size_t t) {
  return std::max(s.floor, s.alpha0 - static_cast<double>(t) * s.delta);
}

}  // namespace ibflow

#endif  // IBFLOW_SCHEDULE_HPP
