#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace hgp {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Shortest round-trippable decimal form.
std::string format_double(double v);

// Throws ConfigError mentioning `field` when `text` is not a finite number.
double parse_double(const std::string& text, const std::string& field);

// Parses "key = value" lines; '#' starts a comment, blank lines are skipped.
KeyValues parse_key_values(const std::string& text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace hgp
