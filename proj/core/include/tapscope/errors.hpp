#pragma once

#include <stdexcept>
#include <string>

namespace tapscope {

// Parameter combination outside the regime where an object exists
// (e.g. FMM fixed point with lambda <= 1). CLI maps this to exit code 2.
class RegimeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside a function's domain: |m_i| too close to 1, alpha_v >= 1,
// non-finite integrand, bad dimensions.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A numerical invariant that should hold by construction did not.
class InvariantError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace tapscope
