#pragma once

// One named finite-difference check per differentiable primitive, each run
// over `trials` seeded random instances at 64-bit precision. Shared by the
// gradcheck CLI command and the acceptance suite.

#include <cstdint>
#include <string>
#include <vector>

namespace spikenas {

struct GradCheckCase {
    std::string name;
    double tolerance = 0;
    double max_rel_err = 0;
    bool pass = false;
};

std::vector<GradCheckCase> run_gradcheck_suite(int trials, std::uint64_t seed);

}  // namespace spikenas
