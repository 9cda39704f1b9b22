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

#include <string>
#include <vector>

#include "gsp/tensor.hpp"

namespace gsp {

/// A named model tensor. Handles share storage with the owning module.
template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> value;
  bool trainable = true;  // false for running statistics
  bool decay = true;      // weight decay applies (false for biases and norm affine params)
};

template <typename T>
using TensorList = std::vector<NamedTensor<T>>;

template <typename T>
TensorList<T> trainable_only(const TensorList<T>& all) {
  TensorList<T> out;
  for (const auto& t : all) {
    if (t.trainable) out.push_back(t);
  }
  return out;
}

}  // namespace gsp
