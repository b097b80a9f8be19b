#include "crag/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "crag/error.hpp"

namespace crag {

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, const nlohmann::json&)>& fn) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open file: " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded()) {
            throw Error(path.string() + ":" + std::to_string(line_no) + ": malformed JSON line");
        }
        fn(line_no, obj);
    }
    if (in.bad()) throw Error("I/O error while reading " + path.string());
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
    std::vector<nlohmann::json> out;
    for_each_jsonl(path, [&](std::size_t, const nlohmann::json& obj) { out.push_back(obj); });
    return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open file for writing: " + path.string());
    for (const auto& rec : records) {
        out << rec.dump() << '\n';
    }
    if (!out) throw Error("I/O error while writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw Error("I/O error while reading " + path.string());
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open file for writing: " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("I/O error while writing " + path.string());
}

}  // namespace crag
