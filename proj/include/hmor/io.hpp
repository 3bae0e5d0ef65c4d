#pragma once

// File plumbing shared by the runtime and the command-line tool: atomic
// writes, content hashes and run manifests.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace hmor {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

nlohmann::json read_json(const std::filesystem::path& path);
// Two-space indentation and a trailing newline.
void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& j);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// Record of one tool invocation: arguments, input and output hashes, seed and
// thread cap. Written as JSON next to the outputs.
class Manifest {
public:
  explicit Manifest(std::vector<std::string> argv);

  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  void set(const std::string& key, nlohmann::json value);

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& path) const;

private:
  nlohmann::json j_;
};

inline constexpr std::string_view kToolVersion = "0.3.0";

}  // namespace hmor
