#pragma once

#include <cstdio>
#include <string>

namespace qmix {

// Nine significant digits; used for every number written to CSV or JSON so
// reruns produce identical bytes.
inline std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace qmix
