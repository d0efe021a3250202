#pragma once

#include <cmath>

namespace cylspectra::detail {

// q^{(p-2)/2} for q >= 0, with exact shortcuts for the common exponents.
class PowerHalf {
 public:
  explicit PowerHalf(double p) : p_(p), e_(0.5 * (p - 2.0)) {}
  double reduced(double q) const {
    if (p_ == 2.0) return 1.0;
    if (p_ == 3.0) return std::sqrt(q);
    if (p_ == 4.0) return q;
    return std::pow(q, e_);
  }

 private:
  double p_;
  double e_;
};

// |v|^{p-2}.
class PowerAbs {
 public:
  explicit PowerAbs(double p) : p_(p), e_(p - 2.0) {}
  double reduced(double v) const {
    if (p_ == 2.0) return 1.0;
    if (p_ == 3.0) return std::abs(v);
    if (p_ == 4.0) return v * v;
    return std::pow(std::abs(v), e_);
  }

 private:
  double p_;
  double e_;
};

}  // namespace cylspectra::detail
