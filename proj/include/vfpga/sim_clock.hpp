// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vfpga/errors.hpp"

namespace vfpga {

/// Monotone simulated clock, microsecond resolution. All benchmark costs are
/// charged here; wall time never enters the simulation.
class SimClock {
public:
    double now_us() const noexcept { return now_us_; }

    void advance_us(double us) {
        if (us < 0.0)
            throw Error(Errc::InvalidArgument, "clock cannot move backwards");
        now_us_ += us;
    }

    void advance_to_us(double t) {
        if (t < now_us_)
            throw Error(Errc::InvalidArgument, "clock cannot move backwards");
        now_us_ = t;
    }

private:
    double now_us_ = 0.0;
};

} // namespace vfpga
