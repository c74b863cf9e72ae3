// Copyright 2026 The filterlab Authors
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

namespace filterlab {

// Malformed input: bad dimensions, non-PD covariances, disconnected graphs,
// unparsable configuration. The CLI maps these to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical procedure failed on well-formed input. CLI exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Iteration budget exhausted before the requested tolerance was reached.
class ConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// The uniform observability hypothesis of a periodic pair does not hold.
class ObservabilityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// A file could not be opened, read or written. CLI exit code 1.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace filterlab
