#ifndef PAFMS_TOOLS_CLI_H
#define PAFMS_TOOLS_CLI_H

#include "pafms/cohort.h"

#include <iosfwd>
#include <string>
#include <vector>

namespace pafms::cli
{

enum ExitCode
{
    ok = 0,
    usage = 1,
    data = 2,
    numerical = 3,
};

/// One equivalence assertion of `check`.
struct CheckResult {
    std::string name;
    bool passed = false;
    bool skipped = false;
    double max_deviation = 0.0;
    std::string note;
};

/// Runs every equivalence between estimators that must hold exactly on the
/// given cohort. Discrete checks are skipped for censored or non-integer data.
std::vector<CheckResult> run_checks(const Cohort& cohort, double tolerance = 1e-12);

/// Entry point of the `paf_msm` binary. Output goes to `out`, diagnostics and
/// errors to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace pafms::cli

#endif
