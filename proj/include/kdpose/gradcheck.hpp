#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace kdpose {

/// Outcome of the central-finite-difference suite (float64, step 1e-5,
/// relative tolerance 1e-4). Covers every differentiable op and the full
/// combined objective through the default student network.
struct GradcheckResult {
    int instances = 0;   // random problem instances exercised
    int checks = 0;      // individual gradient coordinates compared
    int failures = 0;
    double max_rel_err = 0;
    std::vector<std::string> failed; // "suite[instance] param[i]" labels

    bool passed() const { return failures == 0 && checks > 0; }
};

GradcheckResult run_gradcheck(std::uint64_t seed, std::ostream* log = nullptr);

std::string gradcheck_summary(const GradcheckResult& result);

} // namespace kdpose
