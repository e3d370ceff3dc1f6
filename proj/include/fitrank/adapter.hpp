// Copyright 2026 The fitrank Authors
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

#include <filesystem>

#include "fitrank/common.hpp"
#include "fitrank/jsonl.hpp"

namespace fitrank {

/// Trainable square projection shared by resumes and jobs, plus the softmax
/// temperature. A document embedding x maps to W x / |W x|.
struct AdapterParams {
  Matrix W;
  double temperature = 0.05;
  std::uint64_t seed = 0;

  static AdapterParams identity(Index dim, double temperature = 0.05, std::uint64_t seed = 0) {
    return {Matrix::Identity(dim, dim), temperature, seed};
  }

  Index dim() const { return W.rows(); }

  /// Throws ValidationError unless W is square, finite and T > 0.
  void validate() const;
};

/// Checkpoint with optional free-form metadata ("train_config", "provenance").
struct AdapterCheckpoint {
  AdapterParams adapter;
  json train_config = json::object();
  json provenance = json::object();
};

json adapter_to_json(const AdapterCheckpoint& ckpt);
AdapterCheckpoint adapter_from_json(const json& j);
void save_adapter(const AdapterCheckpoint& ckpt, const std::filesystem::path& path);
AdapterCheckpoint load_adapter(const std::filesystem::path& path);

}  // namespace fitrank
