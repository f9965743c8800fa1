#pragma once

namespace rvwb {
inline constexpr const char* kVersion = "0.1.0";
}
