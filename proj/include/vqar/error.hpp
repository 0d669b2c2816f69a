// Copyright 2026 The vqar Authors. All Rights Reserved.
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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vqar {

// Base of every error this library throws. Callers that only care about
// "something was wrong with my input" can catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed JSON or an unparsable token. `offset` is a byte offset into the
// raw input when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what), offset_(offset) {}
  explicit ParseError(const std::string& what) : Error(what) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_ = 0;
};

// Well-formed input that violates the data model (e.g. non-alternating
// conversations, duplicate ids).
class SchemaError : public Error {
 public:
  SchemaError(const std::string& what, std::string record_id)
      : Error(what), record_id_(std::move(record_id)) {}

  const std::string& record_id() const noexcept { return record_id_; }

 private:
  std::string record_id_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

// Numerical precondition violated, e.g. KL support mismatch.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace vqar
