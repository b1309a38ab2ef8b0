#pragma once

#include <cmath>
#include <vector>

#include "doctest.h"

#define CHECK_NEAR(a, b, tol) CHECK(std::abs(static_cast<double>(a) - static_cast<double>(b)) <= (tol))
#define REQUIRE_NEAR(a, b, tol) REQUIRE(std::abs(static_cast<double>(a) - static_cast<double>(b)) <= (tol))

namespace adacat::test {

inline std::vector<double> vec(std::initializer_list<double> v) { return v; }

}  // namespace adacat::test
