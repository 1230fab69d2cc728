// Copyright 2026 The TSBD Lab Authors. All Rights Reserved.
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

#ifndef TSBD_ERRORS_HPP_
#define TSBD_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace tsbd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or network shapes do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An argument lies outside the domain the operation is defined on.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A binary artifact (checkpoint, dataset, tensor file) is malformed.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Loss or gradients became non-finite during an optimization loop.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Experiment configuration could not be parsed or validated.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A required input artifact does not exist.
class MissingArtifactError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage failed; carries the stage name for reporting.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace tsbd

#endif  // TSBD_ERRORS_HPP_
