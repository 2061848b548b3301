#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>

namespace threathive {

// Lowercase, collapse whitespace runs to a single space, trim.
std::string canonicalize_label(std::string_view text);

// All contiguous k-byte substrings of the canonical form. A canonical string
// shorter than k yields {whole string}; an empty one yields {}.
std::set<std::string> shingles(std::string_view text, std::size_t k = 3);

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

// |S_a ∩ S_b| / |S_a ∪ S_b| over 3-gram shingles. Both empty -> 1.0,
// exactly one empty -> 0.0.
double jaccard(std::string_view a, std::string_view b, std::size_t k = 3);

}  // namespace threathive
