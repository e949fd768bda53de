#pragma once

#include <string_view>

namespace semhash {

inline constexpr std::string_view kVersion = "semhash 0.1.0";

}  // namespace semhash
