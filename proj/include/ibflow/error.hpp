#ifndef IBFLOW_ERROR_HPP
#define IBFLOW_ERROR_HPP

#include <stdexcept>
#include <string>

namespace ibflow {

/// Runtime failure in a numerical routine or input validation.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ibflow

#endif  // IBFLOW_ERROR_HPP
