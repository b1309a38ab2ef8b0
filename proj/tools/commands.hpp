#pragma once

namespace adacat::cli {

/// Exit codes: 0 success, 1 verification failure, 2 bad flags or input, 3 aborted training.
int run(int argc, char** argv);

}  // namespace adacat::cli
