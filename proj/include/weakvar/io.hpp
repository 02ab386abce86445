#pragma once

#include <filesystem>
#include <string>

namespace weakvar::io {

/// Shortest round-trip-safe fixed format: 17 significant digits, "nan"/"inf"/"-inf" for non-finite values.
std::string format_double(double v);

/// Writes content to a temporary sibling file and renames it over path.
void write_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace weakvar::io
