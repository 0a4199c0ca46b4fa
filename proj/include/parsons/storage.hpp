#pragma once

#include <filesystem>
#include <optional>
#include <string>

namespace parsons {

/// Writes to a sibling temp file then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::optional<std::string> read_file(const std::filesystem::path& path);

}  // namespace parsons
