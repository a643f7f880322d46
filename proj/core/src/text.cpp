#include "vulnscout/text.hpp"

#include <cctype>

namespace vulnscout {

namespace {

bool is_word(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

bool is_space(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

} // namespace

std::size_t approx_token_count(std::string_view text) {
    std::size_t count = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (is_space(c)) {
            ++i;
        } else if (is_word(c)) {
            ++count;
            while (i < text.size() && is_word(text[i])) ++i;
        } else {
            ++count;
            ++i;
        }
    }
    return count;
}

std::vector<std::string_view> split_code_tokens(std::string_view text) {
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (is_space(c)) {
            ++i;
            continue;
        }
        std::size_t start = i;
        if (is_word(c)) {
            while (i < text.size() && is_word(text[i])) ++i;
        } else {
            ++i;
        }
        tokens.push_back(text.substr(start, i - start));
    }
    return tokens;
}

std::string truncate_to_tokens(std::string_view text, std::size_t max_tokens) {
    std::size_t count = 0;
    std::size_t i = 0;
    while (i < text.size() && count < max_tokens) {
        char c = text[i];
        if (is_space(c)) {
            ++i;
        } else if (is_word(c)) {
            ++count;
            while (i < text.size() && is_word(text[i])) ++i;
        } else {
            ++count;
            ++i;
        }
    }
    return std::string(text.substr(0, i));
}

std::string to_lower(std::string_view text) {
    std::string out(text);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool contains_ci(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return true;
    if (haystack.size() < needle.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
        std::size_t j = 0;
        while (j < needle.size() &&
               std::tolower(static_cast<unsigned char>(haystack[i + j])) ==
                   std::tolower(static_cast<unsigned char>(needle[j]))) {
            ++j;
        }
        if (j == needle.size()) return true;
    }
    return false;
}

std::uint64_t fnv1a(std::string_view bytes) {
    return fnv1a_mix(1469598103934665603ULL, bytes);
}

std::uint64_t fnv1a_mix(std::uint64_t seed, std::string_view bytes) {
    std::uint64_t h = seed;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xF];
        value >>= 4;
    }
    return out;
}

std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == sep) {
            parts.emplace_back(text.substr(start, i - start));
            start = i + 1;
        }
    }
    return parts;
}

std::string trim(std::string_view text) {
    std::size_t b = 0;
    std::size_t e = text.size();
    while (b < e && is_space(text[b])) ++b;
    while (e > b && is_space(text[e - 1])) --e;
    return std::string(text.substr(b, e - b));
}

} // namespace vulnscout
