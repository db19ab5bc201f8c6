#pragma once

#include <string>

namespace eot {

/// Full-precision decimal rendering (17 significant digits); parsing the
/// result with strtod recovers the exact double.
[[nodiscard]] std::string fmt_full(double v);

}  // namespace eot
