#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fslink::csv {

struct Options {
    char delimiter = ',';
    bool header = true;
};

// Parses one RFC-4180-style record (handles quoted fields, escaped quotes
// and embedded delimiters). Returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& out, char delimiter);

// Reads a whole file into rows. Throws std::runtime_error on I/O failure.
std::vector<std::vector<std::string>> read_file(const std::string& path, char delimiter);

std::string escape_field(const std::string& field, char delimiter);

void write_record(std::ostream& out, const std::vector<std::string>& fields, char delimiter);

// Shortest decimal form that round-trips a double.
std::string format_double(double v);

}  // namespace fslink::csv
