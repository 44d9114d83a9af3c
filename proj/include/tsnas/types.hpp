// Copyright 2026 The TSNAS Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/rational.hpp>

namespace tsnas {

/// Arbitrary-precision integer used for cardinalities, FLOPs and parameter
/// counts.
using BigInt = boost::multiprecision::cpp_int;

/// Exact rational used for channel and expansion grids.
using Rational = boost::rational<std::int64_t>;

inline std::string to_string(const BigInt& v) { return v.str(); }

inline std::string to_string(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

inline double to_double(const BigInt& v) { return v.convert_to<double>(); }

inline double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) /
         static_cast<double>(r.denominator());
}

// Error hierarchy. The CLI maps these onto exit codes.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments or configuration supplied by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A value outside its domain, a malformed document, or a shape mismatch.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A FLOPs target that no architecture in the reachable set can meet.
class InfeasibleError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace tsnas
