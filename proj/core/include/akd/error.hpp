// Copyright 2026 The akd Authors
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

namespace akd {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Incompatible tensor shapes (e.g. matmul inner dimensions disagree).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An API precondition was violated (non-scalar backward, missing gradient,
/// empty dataset, mixed tapes, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A single-use object was used twice (a tape can run backward only once).
class LifecycleError : public Error {
 public:
  using Error::Error;
};

/// A forward computation produced NaN or Inf. Never propagated.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// masked_softmax was asked to normalize over zero unmasked positions.
class EmptyAttentionError : public Error {
 public:
  using Error::Error;
};

/// A gradient was written into a frozen parameter.
class FreezeViolation : public Error {
 public:
  using Error::Error;
};

/// A gradient reached a parameter that is guarded against updates from the
/// current backward pass (teacher adapters during a student update).
class StopGradientViolation : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration (unknown preset, missing adapter,
/// missing teacher checkpoint, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A data or checkpoint file could not be parsed. Messages carry the
/// offending line or parameter path.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Teacher and student sequences disagree in length where frame-by-frame
/// alignment is required.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// FAR/FRR requested on a score set that is missing one of the two classes.
class UndefinedRateError : public Error {
 public:
  using Error::Error;
};

}  // namespace akd
