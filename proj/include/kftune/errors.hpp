// Copyright 2026 The kftune Authors
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

#ifndef KFTUNE_ERRORS_HPP_
#define KFTUNE_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kftune {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Wrong vector or matrix sizes handed to a model or filter routine.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Non-finite state or runaway covariance at a given time index.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

class SingularMatrixError : public Error {
 public:
  SingularMatrixError(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DatasetError : public Error {
 public:
  using Error::Error;
};

}  // namespace kftune

#endif  // KFTUNE_ERRORS_HPP_
