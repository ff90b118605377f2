#pragma once

#include <cmath>

namespace oppbench::detail {

/// Neumaier compensated accumulator. Keeps reductions order-independent to
/// well below 1e-12 for the magnitudes seen here.
class CompensatedSum {
public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }

    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

} // namespace oppbench::detail
