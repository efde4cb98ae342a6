#pragma once

namespace recollide {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace recollide
