#pragma once

#include <fstream>
#include <functional>
#include <string>

#include <json.hpp>

#include "mrag/error.hpp"

namespace mrag {

using json = nlohmann::ordered_json;

// Calls fn(line_number, parsed) for every non-blank line. Line numbers are
// 1-based so parse errors can be reported against the source file.
inline void for_each_jsonl(const std::string& path,
                           const std::function<void(size_t, const json&)>& fn) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open file: " + path);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const std::exception& e) {
            throw Error(path + ":" + std::to_string(line_no) +
                        ": malformed record: " + e.what());
        }
        if (!rec.is_object())
            throw Error(path + ":" + std::to_string(line_no) +
                        ": malformed record: expected a JSON object");
        fn(line_no, rec);
    }
}

class JsonlWriter {
public:
    explicit JsonlWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw Error("cannot open file for writing: " + path);
        path_ = path;
    }

    void write(const json& rec) {
        out_ << rec.dump() << '\n';
        if (!out_) throw Error("write failed: " + path_);
    }

private:
    std::ofstream out_;
    std::string path_;
};

} // namespace mrag
