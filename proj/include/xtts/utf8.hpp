#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace xtts::utf8 {

// Throws Error(Data) on malformed input.
std::vector<char32_t> decode(std::string_view text);

std::string encode(char32_t cp);
std::string encode(const std::vector<char32_t>& cps);

bool is_space(char32_t cp);
bool is_cjk(char32_t cp);
// ASCII/Latin-1/Latin Extended letters and ASCII digits.
bool is_latin_alnum(char32_t cp);

}  // namespace xtts::utf8
