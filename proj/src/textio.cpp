#include "eot/textio.hpp"

#include <cstdio>

namespace eot {

std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace eot
