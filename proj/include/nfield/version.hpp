#pragma once

namespace nfield {

inline constexpr const char kToolVersion[] = "0.1.0";

}  // namespace nfield
