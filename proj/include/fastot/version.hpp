#pragma once

#include <string_view>

namespace fastot {

inline constexpr std::string_view kVersion = "0.1.0";

}  // namespace fastot
