#pragma once

#include <string>

namespace hamassim::io {

/// Writes to a sibling temp file, then renames over path.
void write_file_atomic(const std::string& path, const std::string& contents);

/// Throws MissingArtifact when the file does not exist.
std::string read_file(const std::string& path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace hamassim::io
