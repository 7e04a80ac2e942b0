#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "kmshrink/serialize.hpp"

namespace kmshrink {

// Config files are flat `key = value` lines; values are JSON scalars or
// arrays/objects on one line. '#' starts a comment.
//
//   command = "lambda-sweep"
//   kernel = {"family": "rbf", "bandwidth": "median"}
//   trials = 30
//   seed = 42
inline Json parse_config_text(const std::string& text) {
  Json out = Json::object();
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto not_space = line.find_first_not_of(" \t\r");
    if (not_space == std::string::npos) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value");
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": empty key or value");
    Json parsed = Json::parse(value, nullptr, false);
    if (parsed.is_discarded())
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": value is not valid JSON: " + value);
    out[key] = std::move(parsed);
  }
  return out;
}

inline Json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

// file values overridden by flag values (flag wins).
inline Json merge_config(Json file, const Json& overrides) {
  for (const auto& [key, value] : overrides.items()) file[key] = value;
  return file;
}

}  // namespace kmshrink
