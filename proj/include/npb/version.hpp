#pragma once

namespace npb {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace npb
