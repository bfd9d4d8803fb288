#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Small text-output helpers shared by the experiment runners: one numeric
// format for everything that lands in a file, and a CSV assembler whose
// leading "# key = value" comments make each file self-describing.

namespace tailq {

// Round-trippable short decimal form used in every output file.
std::string format_g(double v);

class CsvBuilder {
public:
    void comment(std::string_view key, std::string_view value);
    void comment(std::string_view key, double value);
    void header(const std::vector<std::string>& cols);
    void begin_row();
    void cell(double v);
    void cell(std::uint64_t v);
    void cell(int v);
    void cell(std::string_view v);
    void end_row();
    const std::string& str() const { return out_; }

private:
    std::string out_;
    bool row_open_ = false;
    bool row_has_cells_ = false;
};

// Writes content to path, creating parent directories as needed.
void write_file(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace tailq
