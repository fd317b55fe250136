#pragma once

#include <cmath>
#include <utility>
#include <vector>

namespace adresp {

/// Correctly rounded floating-point summation (Shewchuk's non-overlapping
/// partials, as in Python's math.fsum). The result does not depend on the
/// order of the addends, and the sum of a sequence concatenated with itself
/// is exactly twice the sum of the sequence. Inputs must be finite.
class ExactSum {
 public:
  void add(double x) {
    std::size_t kept = 0;
    for (std::size_t j = 0; j < partials_.size(); ++j) {
      double y = partials_[j];
      if (std::abs(x) < std::abs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials_[kept++] = lo;
      x = hi;
    }
    partials_.resize(kept);
    partials_.push_back(x);
  }

  ExactSum& operator+=(double x) {
    add(x);
    return *this;
  }

  double value() const {
    std::size_t n = partials_.size();
    if (n == 0) return 0.0;
    double hi = partials_[--n];
    double lo = 0.0;
    while (n > 0) {
      const double x = hi;
      const double y = partials_[--n];
      hi = x + y;
      lo = y - (hi - x);
      if (lo != 0.0) break;
    }
    // Round-half-even correction when the remaining partials push past a tie.
    if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) ||
                  (lo > 0.0 && partials_[n - 1] > 0.0))) {
      const double y = lo * 2.0;
      const double x = hi + y;
      if (y == x - hi) hi = x;
    }
    return hi;
  }

 private:
  std::vector<double> partials_;
};

}  // namespace adresp
