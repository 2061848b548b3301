#include "hashing.hpp"

#include <array>
#include <cstdio>

#include <openssl/evp.h>

#include "threathive/error.hpp"

namespace threathive::detail {

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorKind::Config, "SHA-256 digest failed", "openssl");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0x0f]);
  }
  return out;
}

std::string fields_digest(std::initializer_list<std::string_view> fields) {
  std::string buf;
  for (auto f : fields) {
    buf += std::to_string(f.size());
    buf.push_back(':');
    buf.append(f);
    buf.push_back('\n');
  }
  return sha256_hex(buf);
}

}  // namespace threathive::detail
