#pragma once

namespace sq {

inline constexpr const char* kVersion = "0.1.0";

} // namespace sq
