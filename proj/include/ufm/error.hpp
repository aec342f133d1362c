/*
   Copyright 2026 The ufmkit Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace ufm {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

/// Bad argument: shape mismatch, out-of-range parameter, empty input.
class ArgumentError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "argument"; }
};

/// A kernel family produced a non-finite value at some node.
class ModelError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "model"; }
};

/// A mapping produced a non-finite intermediate.
class NumericalBlowupError : public Error {
 public:
  NumericalBlowupError(const std::string& what, int time_node)
      : Error(what), time_node_(time_node) {}
  const char* kind() const noexcept override { return "numerical-blowup"; }
  int time_node() const noexcept { return time_node_; }

 private:
  int time_node_;
};

/// Field values violate a precondition of an analysis (e.g. negative mass).
class ValidityError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "validity"; }
};

/// Scenario file could not be parsed or validated.
/// Carries the offending field (a JSON pointer) and the line, when known (0 otherwise).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what, std::string field = "", int line = 0)
      : Error(what), field_(std::move(field)), line_(line) {}
  const char* kind() const noexcept override { return "config"; }
  const std::string& field() const noexcept { return field_; }
  int line() const noexcept { return line_; }

 private:
  std::string field_;
  int line_;
};

}  // namespace ufm
