#include "mgfn/records.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace mgfn {

namespace {

[[noreturn]] void fail(std::size_t line_no, const std::string& what) {
    throw ParseError("log parse error at line " + std::to_string(line_no) + ": " + what);
}

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return fields;
}

}  // namespace

std::vector<InteractionRecord> parse_log(std::istream& in) {
    std::vector<InteractionRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_tabs(line);
        if (fields.size() != 5)
            fail(line_no, "expected 5 tab-separated fields, got " + std::to_string(fields.size()));
        if (fields[0].empty()) fail(line_no, "empty user_id");
        if (fields[1].empty()) fail(line_no, "empty item_id");
        if (fields[2].empty()) fail(line_no, "empty scenario_id");

        InteractionRecord r;
        r.user_id = std::string(fields[0]);
        r.item_id = std::string(fields[1]);
        r.scenario_id = std::string(fields[2]);

        auto ts = fields[3];
        auto [p, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), r.timestamp);
        if (ec != std::errc() || p != ts.data() + ts.size())
            fail(line_no, "invalid timestamp '" + std::string(ts) + "'");

        try {
            std::size_t used = 0;
            r.completion_rate = std::stod(std::string(fields[4]), &used);
            if (used != fields[4].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            fail(line_no, "invalid completion_rate '" + std::string(fields[4]) + "'");
        }
        if (!std::isfinite(r.completion_rate) || r.completion_rate < 0.0)
            fail(line_no, "completion_rate must be finite and >= 0");

        records.push_back(std::move(r));
    }
    return records;
}

std::vector<InteractionRecord> parse_log_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open log file: " + path);
    return parse_log(in);
}

void write_log(std::ostream& out, const std::vector<InteractionRecord>& records) {
    char buf[64];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof(buf), "%lld\t%.9g", static_cast<long long>(r.timestamp),
                      r.completion_rate);
        out << r.user_id << '\t' << r.item_id << '\t' << r.scenario_id << '\t' << buf << '\n';
    }
}

}  // namespace mgfn
