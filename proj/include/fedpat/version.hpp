#pragma once

namespace fedpat {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fedpat
