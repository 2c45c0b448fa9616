// Copyright 2026 The scriptline Authors. All Rights Reserved.
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

namespace scriptline {

/// Base class of every error raised by the toolkit. The CLI maps each
/// subclass onto a process exit code (see exit_code()).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Bad input data: unknown glyphs, malformed transcriptions, etc.
class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public DataError {
 public:
  using DataError::DataError;
};

/// Vector/matrix dimensions that do not agree.
class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

/// File content that does not parse as the expected format.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

/// Unreadable or unwritable files.
class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

}  // namespace scriptline
