#pragma once

#ifndef MAXSENS_VERSION_STRING
#define MAXSENS_VERSION_STRING "0.0.0"
#endif

namespace maxsens {

inline constexpr const char* kVersion = MAXSENS_VERSION_STRING;

}  // namespace maxsens
