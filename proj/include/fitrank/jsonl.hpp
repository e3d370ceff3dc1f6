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
#include <fstream>
#include <functional>
#include <string>

#include <nlohmann/json.hpp>

#include "fitrank/common.hpp"

namespace fitrank {

using json = nlohmann::json;

/// Calls `fn(object, line_number)` for every non-blank line of a JSONL file.
/// Parse failures and exceptions thrown by `fn` are rethrown as
/// ValidationError prefixed with "<path>:<line>: ".
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const json&, std::size_t)>& fn);

/// Opens `path` for writing, creating parent directories.
std::ofstream open_for_write(const std::filesystem::path& path);

/// Writes `j` compactly followed by '\n'.
void write_jsonl_line(std::ostream& out, const json& j);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

/// SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace fitrank
