#include "vulrag/record_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "vulrag/version.hpp"

namespace vulrag {

json make_header(const json& config) {
    return json{{"header", {{"tool", "vulrag"}, {"version", kVersion}, {"config", config}}}};
}

JsonlFile read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    JsonlFile out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " +
                                     e.what());
        }
        if (lineno == 1 && j.is_object() && j.contains("header")) {
            out.header = j;
        } else {
            out.records.push_back(std::move(j));
        }
    }
    return out;
}

void write_jsonl(const std::filesystem::path& path, const std::optional<json>& header,
                 const std::vector<json>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    if (header) out << header->dump() << "\n";
    for (const auto& r : records) out << r.dump() << "\n";
}

void append_jsonl(const std::filesystem::path& path, const json& record) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << record.dump() << "\n";
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

}  // namespace vulrag
