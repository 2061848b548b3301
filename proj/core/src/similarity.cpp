#include "threathive/similarity.hpp"

#include <algorithm>
#include <cctype>
#include <iterator>

#include "threathive/error.hpp"

namespace threathive {

std::string canonicalize_label(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::set<std::string> shingles(std::string_view text, std::size_t k) {
  if (k == 0) fail(ErrorKind::Precondition, "shingle size must be >= 1", "k");
  const std::string canon = canonicalize_label(text);
  std::set<std::string> out;
  if (canon.empty()) return out;
  if (canon.size() < k) {
    out.insert(canon);
    return out;
  }
  for (std::size_t i = 0; i + k <= canon.size(); ++i) out.insert(canon.substr(i, k));
  return out;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  std::size_t inter = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++inter;
      ++ia;
      ++ib;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double jaccard(std::string_view a, std::string_view b, std::size_t k) {
  return jaccard(shingles(a, k), shingles(b, k));
}

}  // namespace threathive
