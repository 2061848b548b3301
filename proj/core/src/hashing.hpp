#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

namespace threathive::detail {

std::string sha256_hex(std::string_view data);

// Hash of a field tuple; each field is length-prefixed so ("ab","c") and
// ("a","bc") never collide.
std::string fields_digest(std::initializer_list<std::string_view> fields);

}  // namespace threathive::detail
