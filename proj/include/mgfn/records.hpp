#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgfn {

// One user-item watch event. Matches the interaction-log TSV line:
//   user_id \t item_id \t scenario_id \t timestamp \t completion_rate
struct InteractionRecord {
    std::string user_id;
    std::string item_id;
    std::string scenario_id;
    std::int64_t timestamp = 0;  // epoch seconds
    double completion_rate = 0.0;

    bool operator==(const InteractionRecord&) const = default;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Reads the interaction-log TSV. Blank lines and '#'-prefixed preamble lines
// are skipped; any other malformed line aborts with its line number and the
// offending field.
std::vector<InteractionRecord> parse_log(std::istream& in);
std::vector<InteractionRecord> parse_log_file(const std::string& path);

void write_log(std::ostream& out, const std::vector<InteractionRecord>& records);

}  // namespace mgfn
