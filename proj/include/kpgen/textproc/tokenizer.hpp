#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace kpgen {

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kBosToken = "<bos>";
inline constexpr std::string_view kEosToken = "<eos>";
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kDigitToken = "<digit>";

bool is_special_token(std::string_view token);

/// Lowercases ASCII, splits on whitespace and punctuation (each punctuation
/// character becomes its own token) and maps every maximal run of decimal
/// digits to <digit>. Letters adjacent to a digit run are split off, so
/// "2nd" -> [<digit>, nd]. Bytes >= 0x80 are kept as word characters.
std::vector<std::string> tokenize(std::string_view text);

std::string join_tokens(const std::vector<std::string>& tokens, std::string_view sep = " ");

}  // namespace kpgen
