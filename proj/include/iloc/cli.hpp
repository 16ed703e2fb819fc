// Command-line front end binding the pipeline:
//   simulate -> extract -> train -> localise -> evaluate / report
// Every command drops a run manifest next to its outputs so a run can be
// reproduced bit for bit from the recorded seed and input digests.
#pragma once

namespace iloc::cli {

inline constexpr const char* kToolVersion = "iloc 0.1.0";

// Parses and dispatches; domain failures exit nonzero with a one-line JSON
// error object on stderr.
int run(int argc, const char* const* argv);

}  // namespace iloc::cli
