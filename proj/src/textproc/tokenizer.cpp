#include "kpgen/textproc/tokenizer.hpp"

namespace kpgen {

namespace {

enum class CharClass { kSpace, kDigit, kWord, kPunct };

CharClass classify(unsigned char c) {
  if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
    return CharClass::kSpace;
  }
  if (c >= '0' && c <= '9') return CharClass::kDigit;
  if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80) return CharClass::kWord;
  if (c < 0x20 || c == 0x7f) return CharClass::kSpace;
  return CharClass::kPunct;
}

}  // namespace

bool is_special_token(std::string_view token) {
  return token == kPadToken || token == kBosToken || token == kEosToken || token == kUnkToken ||
         token == kDigitToken;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    switch (classify(c)) {
      case CharClass::kSpace:
        ++i;
        break;
      case CharClass::kDigit:
        while (i < text.size() && classify(static_cast<unsigned char>(text[i])) == CharClass::kDigit) ++i;
        tokens.emplace_back(kDigitToken);
        break;
      case CharClass::kPunct:
        tokens.emplace_back(1, static_cast<char>(c));
        ++i;
        break;
      case CharClass::kWord: {
        std::string word;
        while (i < text.size()) {
          auto w = static_cast<unsigned char>(text[i]);
          if (classify(w) != CharClass::kWord) break;
          word.push_back(w >= 'A' && w <= 'Z' ? static_cast<char>(w - 'A' + 'a') : static_cast<char>(w));
          ++i;
        }
        tokens.push_back(std::move(word));
        break;
      }
    }
  }
  return tokens;
}

std::string join_tokens(const std::vector<std::string>& tokens, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

}  // namespace kpgen
