#pragma once

namespace uwq {

inline constexpr const char* kVersion = "0.1.0";

// Version of the machine-readable report schema emitted by the experiment
// runner. Bump when report field names or layout change.
inline constexpr int kReportSchemaVersion = 1;

}  // namespace uwq
