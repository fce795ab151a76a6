/*
 * Copyright 2026 The zrforge Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace zrforge {

// Input data is malformed, inconsistent or insufficient. Maps to CLI exit 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Binary container is not what it claims to be (bad magic, truncation...).
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class CoverageError : public DataError {
 public:
  CoverageError(std::vector<std::size_t> missing, const std::string& what)
      : DataError(what), missing_(std::move(missing)) {}
  const std::vector<std::size_t>& missing() const { return missing_; }

 private:
  std::vector<std::size_t> missing_;
};

// Tensor shapes do not line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Training diverged (NaN/Inf loss). Maps to CLI exit 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace zrforge
