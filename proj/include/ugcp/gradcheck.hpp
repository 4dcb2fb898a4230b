#pragma once

#include <string>
#include <vector>

namespace ugcp {

struct GradCheckItem {
    std::string name;
    double rel_err = 0.0;
    bool pass = false;
};

struct GradCheckReport {
    std::vector<GradCheckItem> items;
    double tolerance = 1e-5;
    bool all_pass = false;
    GradCheckItem worst;
};

// Central finite-difference verification (h = 1e-5) of every tape primitive
// and of the three full pipelines with cascaded propagation at K = 4,
// measured as directional-derivative agreement. Kink neighborhoods are
// avoided by construction of the probe points. `inject_fault` corrupts one
// analytic gradient on purpose so the harness can prove it catches bad
// backward rules.
GradCheckReport run_gradient_checks(double tolerance = 1e-5, bool inject_fault = false);

}  // namespace ugcp
