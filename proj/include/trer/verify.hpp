#pragma once

#include <string>
#include <vector>

namespace trer {

// Test-only fault injection, used to prove the suites can fail.
struct VerifyHooks {
    bool flip_gradient_sign = false; // corrupts the analytic model gradient
};

struct SuiteResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Self-contained release-gate checks: gradient oracle, loss oracle, knn
// oracle, numeric invariants, permutation guarantees, file round-trips and
// the query-expansion reference. Each suite appears exactly once.
std::vector<SuiteResult> run_verify_suites(const VerifyHooks& hooks = {});

} // namespace trer
