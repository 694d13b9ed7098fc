#pragma once

#include <cstdio>
#include <string>

namespace akspace {

// Fixed-format numeric printing so CSV output is byte-stable run to run.
inline std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline std::string fmt_f(double v, int prec) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

}  // namespace akspace
