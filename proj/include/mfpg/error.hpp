// Copyright 2026 The mfpg Authors
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

#include <stdexcept>
#include <string>

namespace mfpg {

// Every failure raised by the library derives from Error so callers (the CLI
// in particular) can map categories onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes that do not agree (matrix sizes, vector lengths, block layouts).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A matrix required to be symmetric is not, beyond tolerance.
class SymmetryError : public Error {
 public:
  using Error::Error;
};

// Policy does not stabilize the plant (spectral radius of A+BK too large).
class StabilityError : public Error {
 public:
  using Error::Error;
};

// Iterative solver did not reach its tolerance within the iteration cap.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Riccati iteration failed: (A, B) not stabilizable or numerically hopeless.
class StabilizabilityError : public ConvergenceError {
 public:
  using ConvergenceError::ConvergenceError;
};

// Input outside the domain of a formula (nonpositive constants, indefinite
// covariances, probability levels out of range).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Caller-supplied arguments inconsistent with the operation's precondition.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Regression data not rich enough to identify the parameter.
class InformativityError : public Error {
 public:
  InformativityError(const std::string& what, double smallest_singular_value)
      : Error(what), smallest_singular_value_(smallest_singular_value) {}

  double smallest_singular_value() const { return smallest_singular_value_; }

 private:
  double smallest_singular_value_;
};

// An estimate is too inaccurate for the requested update (e.g. the inner
// matrix of a Gauss-Newton step is not positive definite).
class AccuracyError : public Error {
 public:
  using Error::Error;
};

// Malformed text input. line is 1-based; 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Well-formed input whose contents violate the expected schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Configuration file or flags rejected.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace mfpg
