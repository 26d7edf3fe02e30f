#pragma once

#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "safeplan/errors.hpp"
#include "safeplan/text.hpp"

namespace safeplan {

using json = nlohmann::json;

/// Calls fn(line_no, parsed_object) for every non-blank line of a JSONL file.
/// Line numbers are 1-based. Parse failures surface as MalformedRecord.
inline void for_each_jsonl(const std::string& path,
                           const std::function<void(int, const json&)>& fn) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open file: " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw MalformedRecord(line_no, std::string("invalid JSON: ") + e.what());
        }
        if (!j.is_object()) throw MalformedRecord(line_no, "expected a JSON object");
        fn(line_no, j);
    }
}

inline void write_jsonl(const std::string& path, const std::vector<json>& rows) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open file for writing: " + path);
    for (const auto& row : rows) out << row.dump() << "\n";
}

/// Rejects keys outside the allowed set; reports the first offender.
inline void require_only_keys(const json& j, int line_no,
                              std::initializer_list<const char*> allowed) {
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* k : allowed)
            if (item.key() == k) { ok = true; break; }
        if (!ok) throw MalformedRecord(line_no, "unknown key '" + item.key() + "'");
    }
}

inline const json& require_key(const json& j, int line_no, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw MalformedRecord(line_no, std::string("missing key '") + key + "'");
    return *it;
}

inline std::string require_string(const json& j, int line_no, const char* key) {
    const json& v = require_key(j, line_no, key);
    if (!v.is_string()) throw MalformedRecord(line_no, std::string("key '") + key + "' must be a string");
    return v.get<std::string>();
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open file: " + path);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return content;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open file for writing: " + path);
    out << content;
}

} // namespace safeplan
