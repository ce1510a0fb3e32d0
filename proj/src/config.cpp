// Copyright 2026 The ldistill Authors
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

#include "ldistill/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ldistill {

Config Config::FromString(const std::string& text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kConfig, std::string("config: ") + e.what());
  }
  Require(root.is_object(), ErrorCode::kConfig, "config: top level must be an object");
  return Config(std::move(root));
}

Config Config::FromFile(const std::string& path) {
  std::ifstream in(path);
  Require(in.good(), ErrorCode::kIo, "config: cannot open " + path);
  std::stringstream text;
  text << in.rdbuf();
  try {
    return FromString(text.str());
  } catch (const Error& e) {
    Fail(e.code(), path + ": " + e.what());
  }
}

const nlohmann::json* Config::Find(const std::string& key) const {
  const nlohmann::json* node = &root_;
  size_t begin = 0;
  while (begin <= key.size()) {
    const size_t dot = key.find('.', begin);
    const std::string part =
        key.substr(begin, dot == std::string::npos ? std::string::npos : dot - begin);
    if (!node->is_object()) return nullptr;
    const auto it = node->find(part);
    if (it == node->end()) return nullptr;
    node = &*it;
    if (dot == std::string::npos) break;
    begin = dot + 1;
  }
  return node->is_null() ? nullptr : node;
}

bool Config::Has(const std::string& key) const { return Find(key) != nullptr; }

std::string CacheDir() {
  const char* dir = std::getenv("LDISTILL_CACHE_DIR");
  return dir != nullptr && *dir != '\0' ? dir : ".";
}

std::string CachePath(const std::string& path) {
  const std::filesystem::path p(path);
  if (path.empty() || p.is_absolute()) return path;
  const std::string dir = CacheDir();
  if (dir == ".") return path;
  std::filesystem::create_directories(dir);
  return (std::filesystem::path(dir) / p).string();
}

}  // namespace ldistill
