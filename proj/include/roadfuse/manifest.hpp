// Capture manifest: which point-cloud file belongs to which frame time.
// Kept separate from the pipeline header because it pulls in the JSON
// library.
#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "roadfuse/csv.hpp"

namespace roadfuse {

/// One manifest row: when frame `file` was captured. Paths are stored as
/// written (normally relative to the manifest's own directory).
struct ManifestEntry {
    double t = 0.0;
    std::string file;
};

inline void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
    nlohmann::json doc = nlohmann::json::array();
    for (const ManifestEntry& e : entries) doc.push_back({{"t", e.t}, {"file", e.file}});
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << doc.dump(2) << '\n';
}

inline std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw csv::ParseError("cannot open " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw csv::ParseError(path + ": " + e.what());
    }
    if (!doc.is_array()) throw csv::ParseError(path + ": manifest must be a JSON array");
    std::vector<ManifestEntry> entries;
    entries.reserve(doc.size());
    for (const auto& item : doc) {
        if (!item.is_object() || !item.contains("t") || !item.contains("file") ||
            !item["t"].is_number() || !item["file"].is_string())
            throw csv::ParseError(path + ": each entry needs numeric 't' and string 'file'");
        entries.push_back({item["t"].get<double>(), item["file"].get<std::string>()});
    }
    return entries;
}

}  // namespace roadfuse
