// Copyright 2026 The gsp Authors. All Rights Reserved.
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

namespace gsp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not fit an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values (widths, heads, sigma, rates, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed files: tensors, keypoints, manifests, checkpoints, configs.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Values outside an accepted numeric range.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Misuse of the differentiation machinery (non-scalar loss, foreign tape, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failures, always carrying the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Training stopped because the loss became non-finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace gsp
