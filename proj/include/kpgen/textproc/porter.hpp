#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kpgen {

/// Classic Porter (1980) suffix stripping. Only tokens made entirely of
/// lowercase ASCII letters are stemmed; anything else (special tokens,
/// punctuation, non-ASCII words) is returned unchanged.
std::string porter_stem(std::string_view word);

std::vector<std::string> stem_phrase(std::span<const std::string> tokens);

}  // namespace kpgen
