#pragma once

#include "drsafe/dual_sip.hpp"

#include <algorithm>
#include <random>
#include <vector>

namespace testing_support {

/// Continuous piecewise-linear payoff on [lo, hi] with `breakpoints` interior
/// kinks and node values uniform in [0, 1]. With `grid_cells > 0` the kinks are
/// drawn from the nodes of a uniform grid with that many cells (the way value
/// function interpolants arise); otherwise their locations are uniform.
inline drsafe::sip::Payoff random_payoff(std::mt19937_64& rng, double lo, double hi,
                                         int breakpoints, int grid_cells = 0) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> xs = {lo, hi};
    for (int k = 0; k < breakpoints; ++k) {
        if (grid_cells > 0) {
            std::uniform_int_distribution<int> node(1, grid_cells - 1);
            xs.push_back(lo + (hi - lo) * (static_cast<double>(node(rng)) / grid_cells));
        } else {
            xs.push_back(lo + (hi - lo) * unit(rng));
        }
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::vector<double> ys(xs.size());
    for (double& y : ys) y = unit(rng);
    std::vector<drsafe::sip::Segment> segs;
    for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
        const double slope = (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]);
        segs.push_back({xs[k], xs[k + 1], slope, ys[k] - slope * xs[k]});
    }
    return drsafe::sip::Payoff::piecewise_linear(std::move(segs));
}

} // namespace testing_support
