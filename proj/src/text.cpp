#include "gpert/text.hpp"

#include <stdexcept>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

namespace gpert::text {

namespace {

template <typename F>
void for_each_code_point(std::string_view s, F&& f) {
  const auto* p = reinterpret_cast<const uint8_t*>(s.data());
  const auto len = static_cast<int32_t>(s.size());
  int32_t i = 0;
  while (i < len) {
    UChar32 c;
    U8_NEXT(p, i, len, c);
    if (c < 0) c = 0xFFFD;
    f(c);
  }
}

void append_utf8(std::string& out, UChar32 c) {
  uint8_t buf[U8_MAX_LENGTH];
  int32_t n = 0;
  UBool err = false;
  U8_APPEND(buf, n, U8_MAX_LENGTH, c, err);
  if (err) {
    // U+FFFD always encodes.
    U8_APPEND(buf, n, U8_MAX_LENGTH, 0xFFFD, err);
  }
  out.append(reinterpret_cast<const char*>(buf), static_cast<size_t>(n));
}

bool is_space(UChar32 c) { return u_isUWhiteSpace(c); }

bool is_punct(UChar32 c) { return u_ispunct(c); }

}  // namespace

std::string nfc(std::string_view s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalizer unavailable");
  icu::UnicodeString src = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  icu::UnicodeString dst = norm->normalize(src, status);
  if (U_FAILURE(status)) throw std::runtime_error("NFC normalization failed");
  std::string out;
  dst.toUTF8String(out);
  return out;
}

std::string casefold(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for_each_code_point(s, [&](UChar32 c) { append_utf8(out, u_foldCase(c, U_FOLD_CASE_DEFAULT)); });
  return out;
}

std::string comparison_key(std::string_view s) { return casefold(nfc(s)); }

bool equal_casefold(std::string_view a, std::string_view b) {
  return comparison_key(a) == comparison_key(b);
}

std::string trim(std::string_view s) {
  std::vector<std::pair<UChar32, bool>> cps;
  for_each_code_point(s, [&](UChar32 c) { cps.emplace_back(c, is_space(c)); });
  size_t b = 0, e = cps.size();
  while (b < e && cps[b].second) ++b;
  while (e > b && cps[e - 1].second) --e;
  std::string out;
  for (size_t i = b; i < e; ++i) append_utf8(out, cps[i].first);
  return out;
}

bool is_blank(std::string_view s) {
  bool blank = true;
  for_each_code_point(s, [&](UChar32 c) { blank = blank && is_space(c); });
  return blank;
}

std::vector<std::string> tokens(std::string_view s) {
  const std::string normalized = nfc(s);
  std::vector<std::string> out;
  std::string cur;
  for_each_code_point(normalized, [&](UChar32 c) {
    if (is_space(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      append_utf8(cur, c);
    }
  });
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> metric_tokens(std::string_view s) {
  const std::string folded = casefold(nfc(s));
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for_each_code_point(folded, [&](UChar32 c) {
    if (is_space(c)) {
      flush();
    } else if (is_punct(c)) {
      flush();
      std::string p;
      append_utf8(p, c);
      out.push_back(std::move(p));
    } else {
      append_utf8(cur, c);
    }
  });
  flush();
  return out;
}

}  // namespace gpert::text
