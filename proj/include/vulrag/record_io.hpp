#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace vulrag {

using json = nlohmann::json;

/// Line-delimited JSON files. Artifact files start with a header record
/// ({"header": {...}}) carrying the resolved config and tool version.

struct JsonlFile {
    std::optional<json> header;
    std::vector<json> records;
};

json make_header(const json& config);

/// Reads a jsonl file; a leading {"header": ...} record is split out.
/// Malformed lines raise std::runtime_error naming the line number.
JsonlFile read_jsonl(const std::filesystem::path& path);

/// Writes header (if non-null) then one compact record per line.
void write_jsonl(const std::filesystem::path& path, const std::optional<json>& header,
                 const std::vector<json>& records);

/// Appends one record to an existing file (creates it when absent).
void append_jsonl(const std::filesystem::path& path, const json& record);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace vulrag
