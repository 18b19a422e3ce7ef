#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace securent::text {

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::vector<std::string> lines(std::string_view s);

// `key=value` lines; blank lines and `#` comments skipped. Later keys win.
std::map<std::string, std::string> parse_key_values(std::string_view content);

double parse_double(std::string_view s);
long long parse_int(std::string_view s);
unsigned long long parse_u64(std::string_view s);
std::vector<double> parse_double_list(std::string_view s);

// Shortest round-trip decimal form.
std::string format_double(double v);
// `%.9g`, used by measurement CSVs.
std::string format_g9(double v);

std::string join(std::span<const std::string> parts, std::string_view sep);

std::string read_file(const std::filesystem::path& path);  // FileError on failure
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace securent::text
