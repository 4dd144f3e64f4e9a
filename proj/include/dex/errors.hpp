/*
 * Copyright 2026 The DeX Engine Authors.
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

#ifndef DEX_ERRORS_HPP
#define DEX_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace dex {

// Two error families. Validation errors are caused by bad input (exit code 1
// in the CLI), runtime errors by something failing while doing the work
// (exit code 2).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual bool is_validation() const { return true; }
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class RuntimeError : public Error {
 public:
  using Error::Error;
  bool is_validation() const override { return false; }
};

class TagError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DimensionError : public ValidationError {
 public:
  DimensionError(std::size_t expected, std::size_t actual, const std::string& where = "")
      : ValidationError("dimension mismatch" + (where.empty() ? "" : " in " + where) +
                        ": expected " + std::to_string(expected) + ", got " +
                        std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}
  std::size_t expected() const { return expected_; }
  std::size_t actual() const { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

// Raised while reading a manifest or any line-delimited input. `record` is the
// zero-based record index (the header line is not counted), or npos for the
// header itself.
class ParseError : public ValidationError {
 public:
  static constexpr std::size_t kHeader = static_cast<std::size_t>(-1);

  ParseError(std::size_t record, std::string field, const std::string& message)
      : ValidationError(format(record, field, message)), record_(record), field_(std::move(field)) {}

  std::size_t record() const { return record_; }
  const std::string& field() const { return field_; }

 private:
  static std::string format(std::size_t record, const std::string& field,
                            const std::string& message) {
    std::string where = record == kHeader ? "header" : "record " + std::to_string(record);
    if (!field.empty()) where += ", field '" + field + "'";
    return where + ": " + message;
  }

  std::size_t record_;
  std::string field_;
};

class MissingRecordError : public ValidationError {
 public:
  explicit MissingRecordError(const std::string& id)
      : ValidationError("missing record: '" + id + "'") {}
};

class MissingEmbeddingError : public ValidationError {
 public:
  explicit MissingEmbeddingError(const std::string& text)
      : ValidationError("missing text embedding for '" + text + "'") {}
};

class DegenerateDirectionError : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

class DegenerateVectorError : public RuntimeError {
 public:
  using RuntimeError::RuntimeError;
};

class TrainingError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DivergenceError : public RuntimeError {
 public:
  DivergenceError(const std::string& stage, const std::string& unit, long step)
      : RuntimeError("non-finite loss during " + stage + " at " + unit + " " + std::to_string(step)),
        step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

class TransportError : public RuntimeError {
 public:
  TransportError(const std::string& message, int attempts)
      : RuntimeError(message + " (after " + std::to_string(attempts) + " attempts)"),
        attempts_(attempts) {}
  int attempts() const { return attempts_; }

 private:
  int attempts_;
};

}  // namespace dex

#endif  // DEX_ERRORS_HPP
