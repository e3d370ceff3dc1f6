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

#include "fitrank/adapter.hpp"

namespace fitrank {

void AdapterParams::validate() const {
  if (W.rows() != W.cols() || W.rows() == 0) throw ValidationError("adapter W must be square");
  if (!W.allFinite()) throw ValidationError("adapter W has non-finite entries");
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw ValidationError("temperature must be > 0");
}

json adapter_to_json(const AdapterCheckpoint& ckpt) {
  const auto& a = ckpt.adapter;
  json rows = json::array();
  for (Index i = 0; i < a.W.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < a.W.cols(); ++j) row.push_back(a.W(i, j));
    rows.push_back(std::move(row));
  }
  return json{{"dim", a.dim()},
              {"temperature", a.temperature},
              {"seed", a.seed},
              {"W", std::move(rows)},
              {"train_config", ckpt.train_config},
              {"provenance", ckpt.provenance}};
}

AdapterCheckpoint adapter_from_json(const json& j) {
  AdapterCheckpoint c;
  const auto dim = j.at("dim").get<Index>();
  c.adapter.temperature = j.at("temperature").get<double>();
  c.adapter.seed = j.value("seed", std::uint64_t{0});
  const auto& rows = j.at("W");
  if (static_cast<Index>(rows.size()) != dim) throw ValidationError("W row count != dim");
  c.adapter.W.resize(dim, dim);
  for (Index r = 0; r < dim; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    if (static_cast<Index>(row.size()) != dim) throw ValidationError("W column count != dim");
    for (Index col = 0; col < dim; ++col) c.adapter.W(r, col) = row[static_cast<std::size_t>(col)].get<double>();
  }
  c.train_config = j.value("train_config", json::object());
  c.provenance = j.value("provenance", json::object());
  c.adapter.validate();
  return c;
}

void save_adapter(const AdapterCheckpoint& ckpt, const std::filesystem::path& path) {
  write_json_file(path, adapter_to_json(ckpt));
}

AdapterCheckpoint load_adapter(const std::filesystem::path& path) {
  return adapter_from_json(read_json_file(path));
}

}  // namespace fitrank
