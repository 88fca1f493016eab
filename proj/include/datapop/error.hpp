// Copyright 2026 The DataPop Authors.
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

namespace datapop {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed document; the message names the offending field.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Document parsed but violates an invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Operation applied to something that does not exist or is out of range.
class DomainError : public Error {
 public:
  using Error::Error;
};

// No gap is left to ask about in a category.
class CategoryComplete : public DomainError {
 public:
  using DomainError::DomainError;
};

// Neither gaps nor probes remain in a category.
class CategoryExhausted : public DomainError {
 public:
  using DomainError::DomainError;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

class NormalizationError : public Error {
 public:
  using Error::Error;
};

// Aggregation over a record set with no usable answers.
class EmptyTableError : public Error {
 public:
  using Error::Error;
};

// Operation invoked in the wrong session state.
class StateError : public Error {
 public:
  using Error::Error;
};

class ConflictError : public Error {
 public:
  using Error::Error;
};

class ClassificationError : public Error {
 public:
  using Error::Error;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

class EncodeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace datapop
