#pragma once

namespace pharl {

inline constexpr const char* kToolName = "pharl";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace pharl
