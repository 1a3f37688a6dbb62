#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace vulrag {

/// Ordered lowercase terms: no stop words, no empty terms.
struct TokenStream {
    std::vector<std::string> tokens;
};

/// Porter suffix-stripping stemmer. Input must be lowercase ASCII letters.
std::string porter_stem(std::string_view word);

bool is_stop_word(std::string_view lowercase_word);

/// Tokenization pipeline: identifier-aware splitting (snake_case and
/// camelCase sub-tokens plus the original compound), lowercasing, stop-word
/// removal, then stemming of purely alphabetic terms. Deterministic.
TokenStream preprocess(std::string_view text);

}  // namespace vulrag
