// Copyright 2026 The hsdssa Authors.
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

namespace hsdssa {

// Base for every error raised by the library. The CLI maps the subclasses
// onto exit codes, so keep the hierarchy flat.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor extents disagree with an operation's contract.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A model or block configuration violates its invariants.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Caller-supplied data is outside an operation's domain.
class InputError : public Error {
 public:
  using Error::Error;
};

// Text input could not be parsed; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Binary container is malformed (bad magic, truncated payload).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Non-finite value produced where a finite one is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Misuse of an API precondition that is not about shapes or data.
class ContractError : public Error {
 public:
  using Error::Error;
};

// A primitive has no reverse-mode rule.
class UnsupportedPrimitive : public Error {
 public:
  using Error::Error;
};

}  // namespace hsdssa
