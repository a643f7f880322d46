#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vulnscout {

// Approximate tokenizer used for all length budgets: maximal runs of
// [A-Za-z0-9_] count as one token, every other non-space character counts
// as one token on its own.
std::size_t approx_token_count(std::string_view text);

// Same segmentation as approx_token_count, materialized. Whitespace never
// produces a token, so two texts differing only in layout tokenize equally.
std::vector<std::string_view> split_code_tokens(std::string_view text);

// Truncate text to at most max_tokens approximate tokens, cutting at a
// token boundary.
std::string truncate_to_tokens(std::string_view text, std::size_t max_tokens);

std::string to_lower(std::string_view text);

bool contains_ci(std::string_view haystack, std::string_view needle);

// FNV-1a over the raw bytes; used for request fingerprints and seed mixing.
std::uint64_t fnv1a(std::string_view bytes);
std::uint64_t fnv1a_mix(std::uint64_t seed, std::string_view bytes);

std::string hex64(std::uint64_t value);

std::vector<std::string> split(std::string_view text, char sep);
std::string trim(std::string_view text);

} // namespace vulnscout
