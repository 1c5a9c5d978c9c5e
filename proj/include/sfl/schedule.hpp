#pragma once

#include <algorithm>
#include <cmath>

#include "sfl/matrix.hpp"

namespace sfl {

// Focusing-rate schedule F(e) = min(1 - gamma^e, nu) with
// gamma = (1 - nu)^(1/E_max). F(0) = 0 and F(E_max) = nu.
struct FocusSchedule {
  double nu = 0.0;
  int e_max = 1;
  double gamma = 1.0;

  static FocusSchedule make(double nu, int e_max) {
    require(nu >= 0.0 && nu <= 1.0, "FocusSchedule: nu out of [0,1]");
    require(e_max >= 1, "FocusSchedule: E_max must be >= 1");
    FocusSchedule s;
    s.nu = nu;
    s.e_max = e_max;
    s.gamma = nu < 1.0 ? std::pow(1.0 - nu, 1.0 / static_cast<double>(e_max)) : 0.0;
    return s;
  }

  double focusing_rate(int epoch) const {
    require(epoch >= 0, "focusing_rate: negative epoch");
    return std::min(1.0 - std::pow(gamma, static_cast<double>(epoch)), nu);
  }

  std::size_t k_for_batch(int epoch, std::size_t batch) const {
    return static_cast<std::size_t>(std::floor(static_cast<double>(batch) * focusing_rate(epoch)));
  }
};

}  // namespace sfl
