#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace carotid {

/// Whole-file read; throws IoFailure.
std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over the target, so readers
/// never observe a partial file. Throws IoFailure.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace carotid
