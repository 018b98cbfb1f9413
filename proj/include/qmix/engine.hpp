#pragma once

#include <string>

#include "qmix/error.hpp"

namespace qmix {

enum class Engine { Classical, Quantum };

inline const char* to_string(Engine e) { return e == Engine::Classical ? "classical" : "quantum"; }

inline Engine parse_engine(const std::string& s) {
  if (s == "classical") return Engine::Classical;
  if (s == "quantum") return Engine::Quantum;
  throw Error(ErrorCode::InvalidArgument, "unknown engine '" + s + "'");
}

}  // namespace qmix
