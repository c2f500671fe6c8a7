#pragma once

namespace survkit {

inline constexpr int kVersionMajor = 0;
inline constexpr int kVersionMinor = 1;
inline constexpr int kVersionPatch = 0;
inline constexpr const char* kVersionString = "0.1.0";

// Bumped when the JSON layout of a serialized model changes incompatibly.
inline constexpr int kModelFormatVersion = 1;

}  // namespace survkit
