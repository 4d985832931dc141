#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace csd {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Fast invariant sweep over every module (the `csd check` entry point).
std::vector<CheckResult> run_self_check(std::uint64_t seed = 0);

}  // namespace csd
