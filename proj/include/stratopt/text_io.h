#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace stratopt {

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);
/// Fixed-point text with the given number of decimals (table output).
std::string format_fixed(double value, int decimals);

double parse_double(std::string_view text);
std::int64_t parse_int(std::string_view text);

std::vector<std::string_view> split_csv_line(std::string_view line);

/// Simple CSV writer; fields are not quoted, callers keep them comma-free.
class CsvWriter {
  public:
    explicit CsvWriter(std::vector<std::string> header);
    void row(std::vector<std::string> fields);
    [[nodiscard]] std::string str() const;
    void save(const std::filesystem::path &path) const;

  private:
    std::size_t width_;
    std::string text_;
};

std::string read_text_file(const std::filesystem::path &path);
void write_text_file(const std::filesystem::path &path, std::string_view contents);

/// Reads a CSV file into rows of fields; the first row is the header.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    [[nodiscard]] std::size_t column(std::string_view name) const;
};
CsvTable read_csv(const std::filesystem::path &path);

} // namespace stratopt
