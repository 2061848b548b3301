#include "threathive/repair.hpp"

#include <cctype>

namespace threathive {

using nlohmann::json;

const FieldSpec* RecordSchema::anchor() const {
  for (const auto& f : fields) {
    if (f.mandatory) return &f;
  }
  return nullptr;
}

bool RecordSchema::satisfied_by(const json& record) const {
  if (!record.is_object()) return false;
  for (const auto& f : fields) {
    if (!f.mandatory) continue;
    auto it = record.find(f.name);
    if (it == record.end() || it->is_null()) return false;
  }
  return true;
}

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::optional<json> strict_parse(std::string_view text) {
  if (text.empty()) return std::nullopt;
  json j = json::parse(text.begin(), text.end(), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) return std::nullopt;
  return j;
}

std::size_t skip_space(std::string_view s, std::size_t i) {
  while (i < s.size() && is_space(s[i])) ++i;
  return i;
}

bool plausible_container_start(std::string_view s, std::size_t i) {
  const std::size_t j = skip_space(s, i + 1);
  if (j >= s.size()) return true;  // truncated right after the opener
  const char next = s[j];
  if (s[i] == '{') return next == '"' || next == '}';
  return next == '{' || next == '[' || next == '"' || next == ']' || next == '-' ||
         std::isdigit(static_cast<unsigned char>(next)) || next == 't' || next == 'f' || next == 'n';
}

const char* const kRecordContainers[] = {"threats", "records", "entries", "items", "results", "entities", "plans"};

std::vector<json> records_of(const json& doc) {
  std::vector<json> out;
  auto take_objects = [&out](const json& arr) {
    for (const auto& el : arr) {
      if (el.is_object()) out.push_back(el);
    }
  };
  if (doc.is_array()) {
    take_objects(doc);
  } else if (doc.is_object()) {
    for (const char* key : kRecordContainers) {
      auto it = doc.find(key);
      if (it != doc.end() && it->is_array()) {
        take_objects(*it);
        return out;
      }
    }
    out.push_back(doc);
  }
  return out;
}

RepairResult finish(std::vector<json> candidates, RepairStage stage, std::string text, const RecordSchema& schema) {
  RepairResult r;
  r.stage = stage;
  r.text = std::move(text);
  for (auto& c : candidates) {
    if (schema.satisfied_by(c) || (schema.anchor() == nullptr && c.is_object())) {
      r.records.push_back(std::move(c));
    } else {
      ++r.dropped;
    }
  }
  return r;
}

// Index one past the end of the value token starting at `pos`, or npos if
// the token is incomplete (unterminated string, unbalanced container).
std::size_t value_end(std::string_view s, std::size_t pos) {
  if (pos >= s.size()) return std::string_view::npos;
  const char c = s[pos];
  if (c == '"') {
    bool esc = false;
    for (std::size_t i = pos + 1; i < s.size(); ++i) {
      if (esc) {
        esc = false;
      } else if (s[i] == '\\') {
        esc = true;
      } else if (s[i] == '"') {
        return i + 1;
      }
    }
    return std::string_view::npos;
  }
  if (c == '{' || c == '[') {
    std::vector<char> stack;
    bool in_str = false, esc = false;
    for (std::size_t i = pos; i < s.size(); ++i) {
      const char ch = s[i];
      if (in_str) {
        if (esc) {
          esc = false;
        } else if (ch == '\\') {
          esc = true;
        } else if (ch == '"') {
          in_str = false;
        }
        continue;
      }
      if (ch == '"') {
        in_str = true;
      } else if (ch == '{' || ch == '[') {
        stack.push_back(ch);
      } else if (ch == '}' || ch == ']') {
        if (stack.empty() || stack.back() != (ch == '}' ? '{' : '[')) return std::string_view::npos;
        stack.pop_back();
        if (stack.empty()) return i + 1;
      }
    }
    return std::string_view::npos;
  }
  std::size_t i = pos;
  while (i < s.size() && s[i] != ',' && s[i] != '}' && s[i] != ']' && !is_space(s[i])) ++i;
  // A bare scalar running into end-of-text may itself be truncated ("tru").
  if (i == s.size()) return std::string_view::npos;
  return i;
}

// Position of `"name"` followed by ':' at or after `from`; returns the index
// of the value start.
std::size_t find_key(std::string_view s, std::string_view name, std::size_t from) {
  const std::string needle = "\"" + std::string(name) + "\"";
  std::size_t at = s.find(needle, from);
  while (at != std::string_view::npos) {
    std::size_t j = skip_space(s, at + needle.size());
    if (j < s.size() && s[j] == ':') return skip_space(s, j + 1);
    at = s.find(needle, at + 1);
  }
  return std::string_view::npos;
}

std::optional<json> extract_fields(std::string_view span, const RecordSchema& schema) {
  json rec = json::object();
  std::size_t cursor = 0;
  for (const auto& f : schema.fields) {
    std::size_t vpos = find_key(span, f.name, cursor);
    if (vpos == std::string_view::npos) vpos = find_key(span, f.name, 0);
    if (vpos == std::string_view::npos) continue;
    const std::size_t end = value_end(span, vpos);
    if (end == std::string_view::npos) continue;
    if (auto v = strict_parse(span.substr(vpos, end - vpos))) {
      rec[f.name] = std::move(*v);
      cursor = end;
    }
  }
  if (rec.empty()) return std::nullopt;
  return rec;
}

// Anchored recovery: the object enclosing each occurrence of the first
// mandatory key starts a record; records that never close before the next
// anchor are truncated.
std::vector<json> extract_anchored(std::string_view text, const RecordSchema& schema) {
  const FieldSpec* anchor = schema.anchor();
  const std::string needle = "\"" + anchor->name + "\"";

  std::vector<std::size_t> starts;
  std::vector<std::pair<char, std::size_t>> stack;
  bool in_str = false, esc = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_str) {
      if (esc) {
        esc = false;
      } else if (c == '\\') {
        esc = true;
      } else if (c == '"') {
        in_str = false;
      }
      continue;
    }
    if (c == '"') {
      if (!stack.empty() && stack.back().first == '{' && text.substr(i, needle.size()) == needle) {
        const std::size_t colon = skip_space(text, i + needle.size());
        const std::size_t open = stack.back().second;
        if (colon < text.size() && text[colon] == ':' && (starts.empty() || starts.back() != open)) {
          starts.push_back(open);
        }
      }
      in_str = true;
    } else if (c == '{' || c == '[') {
      stack.push_back({c, i});
    } else if ((c == '}' || c == ']') && !stack.empty()) {
      stack.pop_back();
    }
  }

  std::vector<json> out;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    const std::size_t begin = starts[k];
    const std::size_t limit = k + 1 < starts.size() ? starts[k + 1] : text.size();
    std::string_view segment = text.substr(begin, limit - begin);
    if (segment.empty() || segment.front() != '{') continue;
    const std::size_t end = value_end(segment, 0);
    if (end == std::string_view::npos) continue;  // truncated record: dropped, never patched
    std::string_view span = segment.substr(0, end);
    if (auto whole = strict_parse(span); whole && whole->is_object()) {
      out.push_back(std::move(*whole));
    } else if (auto partial = extract_fields(span, schema)) {
      out.push_back(std::move(*partial));
    }
  }
  return out;
}

// Schema-free recovery: complete objects that sit directly in an array (or
// at top level) and parse on their own.
std::vector<json> extract_spans(std::string_view text) {
  std::vector<json> out;
  struct Open {
    char kind;
    std::size_t pos;
  };
  std::vector<Open> stack;
  bool in_str = false, esc = false;
  std::size_t record_depth = std::string_view::npos;  // stack size at which the open record lives
  std::size_t record_start = 0;

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_str) {
      if (esc) {
        esc = false;
      } else if (c == '\\') {
        esc = true;
      } else if (c == '"') {
        in_str = false;
      }
      continue;
    }
    if (c == '"') {
      in_str = true;
    } else if (c == '{' || c == '[') {
      if (c == '{' && record_depth == std::string_view::npos && (stack.empty() || stack.back().kind == '[')) {
        record_depth = stack.size();
        record_start = i;
      }
      stack.push_back({c, i});
    } else if (c == '}' || c == ']') {
      if (stack.empty() || stack.back().kind != (c == '}' ? '{' : '[')) continue;
      stack.pop_back();
      if (c == '}' && record_depth == stack.size()) {
        if (auto rec = strict_parse(text.substr(record_start, i + 1 - record_start)); rec && rec->is_object()) {
          out.push_back(std::move(*rec));
        }
        record_depth = std::string_view::npos;
      }
    }
  }
  return out;
}

}  // namespace

std::string_view locate_payload(std::string_view raw) {
  std::string_view s = raw;
  if (auto fence = s.find("```"); fence != std::string_view::npos) {
    std::size_t body = s.find('\n', fence);
    body = body == std::string_view::npos ? s.size() : body + 1;
    std::string_view rest = s.substr(body);
    if (auto close = rest.find("```"); close != std::string_view::npos) rest = rest.substr(0, close);
    s = rest;
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((s[i] == '[' || s[i] == '{') && plausible_container_start(s, i)) {
      s = s.substr(i);
      break;
    }
  }
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::optional<std::string> missing_closers(std::string_view text) {
  std::vector<char> stack;
  bool in_str = false, esc = false;
  for (char c : text) {
    if (in_str) {
      if (esc) {
        esc = false;
      } else if (c == '\\') {
        esc = true;
      } else if (c == '"') {
        in_str = false;
      }
      continue;
    }
    if (c == '"') {
      in_str = true;
    } else if (c == '{' || c == '[') {
      stack.push_back(c);
    } else if (c == '}' || c == ']') {
      if (stack.empty() || stack.back() != (c == '}' ? '{' : '[')) return std::nullopt;
      stack.pop_back();
    }
  }
  if (in_str) return std::nullopt;
  std::string closers;
  for (auto it = stack.rbegin(); it != stack.rend(); ++it) closers.push_back(*it == '{' ? '}' : ']');
  return closers;
}

RepairResult repair_output(std::string_view raw, const RecordSchema& schema) {
  try {
    // Stage 1: strict parse, first of the raw text, then of the located payload.
    if (auto doc = strict_parse(raw)) return finish(records_of(*doc), RepairStage::Strict, std::string(raw), schema);
    const std::string_view payload = locate_payload(raw);
    if (payload.size() != raw.size()) {
      if (auto doc = strict_parse(payload)) {
        return finish(records_of(*doc), RepairStage::Strict, std::string(payload), schema);
      }
    }

    // Stage 2: append the closers a character stack says are missing.
    if (auto closers = missing_closers(payload); closers && !closers->empty()) {
      std::string repaired = std::string(payload) + *closers;
      if (auto doc = strict_parse(repaired)) {
        return finish(records_of(*doc), RepairStage::BracketBalance, std::move(repaired), schema);
      }
    }

    // Stage 3: per-record recovery.
    std::vector<json> recovered =
        schema.anchor() != nullptr ? extract_anchored(payload, schema) : extract_spans(payload);
    if (recovered.empty() && schema.anchor() != nullptr) recovered = extract_spans(payload);
    return finish(std::move(recovered), RepairStage::FieldExtraction, std::string(payload), schema);
  } catch (...) {
    RepairResult empty;
    empty.stage = RepairStage::FieldExtraction;
    return empty;
  }
}

}  // namespace threathive
