/* Copyright 2026 The VRDial Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef VRDIAL_ERROR_HPP_
#define VRDIAL_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace vrdial {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text. `line` is 1-based, or 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A checkpoint whose version or configuration does not match expectations.
class ConfigMismatch : public Error {
 public:
  using Error::Error;
};

// Shape or width mismatch between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace vrdial

#endif  // VRDIAL_ERROR_HPP_
