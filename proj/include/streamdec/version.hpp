#pragma once

namespace streamdec {

inline constexpr const char* kEngineVersion = "0.1.0";

}  // namespace streamdec
