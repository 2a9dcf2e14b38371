#pragma once

#include <string>

#include "homopt/errors.hpp"

namespace homopt {

enum class Problem { Pendulum, Spacecraft };

inline std::string to_string(Problem p) {
  return p == Problem::Pendulum ? "pendulum" : "spacecraft";
}

inline Problem problem_from_string(const std::string& name) {
  if (name == "pendulum") return Problem::Pendulum;
  if (name == "spacecraft") return Problem::Spacecraft;
  throw SchemaMismatch("unknown problem id: " + name);
}

inline int state_dim(Problem p) { return p == Problem::Pendulum ? 4 : 7; }
inline int control_dim(Problem p) { return p == Problem::Pendulum ? 1 : 3; }
inline int decision_dim(Problem p) { return p == Problem::Pendulum ? 5 : 9; }

}  // namespace homopt
