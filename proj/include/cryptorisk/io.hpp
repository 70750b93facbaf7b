#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cryptorisk::io {

/// Writes to a temporary sibling, then renames over the target, so readers
/// never observe a partial file. Creates missing parent directories.
void write_atomic(const std::filesystem::path& path, std::string_view content);

/// Whole-file read; DomainError when the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Regular files directly inside dir whose name ends with suffix, sorted by
/// name. A path naming a single file is returned as-is. DomainError when the
/// path does not exist.
std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir, std::string_view suffix);

/// File name with `suffix` removed ("a.tuples.jsonl", ".tuples.jsonl" -> "a").
std::string stem_of(const std::filesystem::path& path, std::string_view suffix);

}  // namespace cryptorisk::io
