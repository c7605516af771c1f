#pragma once

namespace dakit {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace dakit
