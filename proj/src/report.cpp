#include "tailq/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tailq/errors.hpp"

namespace tailq {

std::string format_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void CsvBuilder::comment(std::string_view key, std::string_view value) {
    out_ += "# ";
    out_ += key;
    out_ += " = ";
    out_ += value;
    out_ += '\n';
}

void CsvBuilder::comment(std::string_view key, double value) {
    comment(key, format_g(value));
}

void CsvBuilder::header(const std::vector<std::string>& cols) {
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (i) out_ += ',';
        out_ += cols[i];
    }
    out_ += '\n';
}

void CsvBuilder::begin_row() {
    row_open_ = true;
    row_has_cells_ = false;
}

void CsvBuilder::cell(double v) { cell(std::string_view(format_g(v))); }

void CsvBuilder::cell(std::uint64_t v) { cell(std::string_view(std::to_string(v))); }

void CsvBuilder::cell(int v) { cell(std::string_view(std::to_string(v))); }

void CsvBuilder::cell(std::string_view v) {
    if (row_has_cells_) out_ += ',';
    out_ += v;
    row_has_cells_ = true;
}

void CsvBuilder::end_row() {
    out_ += '\n';
    row_open_ = false;
}

void write_file(const std::string& path, const std::string& content) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(p.parent_path(), ec);
    }
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open for writing: " + path);
    f << content;
    f.flush();
    if (!f) throw Error("write failed: " + path);
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace tailq
