#pragma once

namespace procast {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace procast
