#include "fslink/csv.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace fslink::csv {

bool read_record(std::istream& in, std::vector<std::string>& out, char delimiter) {
    out.clear();
    int c = in.get();
    if (c == EOF) return false;

    std::string field;
    bool quoted = false;
    bool any = false;
    while (true) {
        if (quoted) {
            if (c == EOF) {
                throw std::runtime_error("csv: unterminated quoted field");
            } else if (c == '"') {
                int peek = in.get();
                if (peek == '"') {
                    field.push_back('"');
                } else {
                    quoted = false;
                    if (peek != EOF) in.unget();
                }
            } else {
                field.push_back(static_cast<char>(c));
            }
        } else {
            if (c == EOF || c == '\n') {
                if (!field.empty() && field.back() == '\r') field.pop_back();
                out.push_back(field);
                return true;
            } else if (c == static_cast<unsigned char>(delimiter)) {
                out.push_back(field);
                field.clear();
            } else if (c == '"' && field.empty() && !any) {
                quoted = true;
            } else {
                field.push_back(static_cast<char>(c));
            }
        }
        any = !field.empty();
        c = in.get();
    }
}

std::vector<std::vector<std::string>> read_file(const std::string& path, char delimiter) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> rec;
    while (read_record(in, rec, delimiter)) rows.push_back(rec);
    return rows;
}

std::string escape_field(const std::string& field, char delimiter) {
    bool needs = false;
    for (char ch : field) {
        if (ch == delimiter || ch == '"' || ch == '\n' || ch == '\r') {
            needs = true;
            break;
        }
    }
    if (!needs) return field;
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out += "\"\"";
        else out.push_back(ch);
    }
    out += "\"";
    return out;
}

void write_record(std::ostream& out, const std::vector<std::string>& fields, char delimiter) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.put(delimiter);
        out << escape_field(fields[i], delimiter);
    }
    out.put('\n');
}

std::string format_double(double v) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(buf, "%lf", &back);
        if (back == v) break;
    }
    return buf;
}

}  // namespace fslink::csv
