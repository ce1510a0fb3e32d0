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

// Nested JSON run configuration with flag > config > default precedence.

#ifndef LDISTILL_CONFIG_HPP_
#define LDISTILL_CONFIG_HPP_

#include <optional>
#include <string>

#include <json.hpp>

#include "ldistill/error.hpp"

namespace ldistill {

class Config {
 public:
  Config() : root_(nlohmann::json::object()) {}
  static Config FromFile(const std::string& path);
  static Config FromString(const std::string& text);

  // Dotted keys address nested objects: "dc.iterations".
  bool Has(const std::string& key) const;
  const nlohmann::json* Find(const std::string& key) const;

  template <typename T>
  T Get(const std::string& key, const T& fallback) const {
    const nlohmann::json* node = Find(key);
    if (node == nullptr) return fallback;
    try {
      return node->get<T>();
    } catch (const nlohmann::json::exception&) {
      Fail(ErrorCode::kConfig, "config: key '" + key + "' has the wrong type");
    }
  }

  const nlohmann::json& root() const { return root_; }

 private:
  explicit Config(nlohmann::json root) : root_(std::move(root)) {}
  nlohmann::json root_;
};

template <typename T>
T Resolve(const std::optional<T>& flag, const Config& config,
          const std::string& key, const T& fallback) {
  if (flag) return *flag;
  return config.Get<T>(key, fallback);
}

// $LDISTILL_CACHE_DIR, or "." when unset.
std::string CacheDir();

// Relative paths resolve under CacheDir(); absolute paths pass through.
std::string CachePath(const std::string& path);

}  // namespace ldistill

#endif  // LDISTILL_CONFIG_HPP_
