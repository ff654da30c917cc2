// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace dentra::text {

enum class Language { en, zh, other };

std::string to_string(Language lang);
Language language_from_string(std::string_view s);

// Decodes one code point starting at `pos` and advances it. Invalid bytes decode as U+FFFD.
char32_t next_code_point(std::string_view s, std::size_t& pos);

bool is_han(char32_t cp);
// Han plus CJK punctuation, kana, hangul and fullwidth forms: each counts as one token.
bool is_cjk(char32_t cp);

// Token measure used for every budget in the runtime: whitespace-separated
// runs of non-CJK text count one each, every CJK character counts one.
std::size_t count_tokens(std::string_view s);

// Longest prefix of `s` whose token count is <= budget, cut on a token boundary.
std::string truncate_tokens(std::string_view s, std::size_t budget);

// Script-ratio heuristic: >= 30% Han among letters is zh, mostly Latin is en.
Language detect_language(std::string_view s);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split_words(std::string_view s);

// Splits after sentence terminators (. ! ? and their CJK forms), keeping them attached.
std::vector<std::string> split_sentences(std::string_view s);

// True if the trimmed text ends with sentence-final punctuation, allowing
// trailing closing quotes or brackets.
bool ends_with_terminator(std::string_view s);

// Concatenates two fragments of one sentence; CJK boundaries join without a space.
std::string join_fragments(std::string_view left, std::string_view right);

}  // namespace dentra::text
