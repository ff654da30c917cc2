// SPDX-License-Identifier: Apache-2.0
#include "dentra/text.hpp"

#include <algorithm>
#include <cctype>

namespace dentra::text {

std::string to_string(Language lang) {
    switch (lang) {
        case Language::en: return "en";
        case Language::zh: return "zh";
        case Language::other: return "other";
    }
    return "other";
}

Language language_from_string(std::string_view s) {
    if (s == "en") return Language::en;
    if (s == "zh") return Language::zh;
    return Language::other;
}

char32_t next_code_point(std::string_view s, std::size_t& pos) {
    auto byte = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
    const unsigned char lead = byte(pos);
    int extra = 0;
    char32_t cp = 0;
    if (lead < 0x80) {
        ++pos;
        return lead;
    } else if ((lead & 0xE0) == 0xC0) {
        extra = 1;
        cp = lead & 0x1F;
    } else if ((lead & 0xF0) == 0xE0) {
        extra = 2;
        cp = lead & 0x0F;
    } else if ((lead & 0xF8) == 0xF0) {
        extra = 3;
        cp = lead & 0x07;
    } else {
        ++pos;
        return U'�';
    }
    if (pos + extra >= s.size()) {
        pos = s.size();
        return U'�';
    }
    for (int i = 1; i <= extra; ++i) {
        const unsigned char c = byte(pos + i);
        if ((c & 0xC0) != 0x80) {
            pos += i;
            return U'�';
        }
        cp = (cp << 6) | (c & 0x3F);
    }
    pos += extra + 1;
    return cp;
}

bool is_han(char32_t cp) {
    return (cp >= 0x4E00 && cp <= 0x9FFF) || (cp >= 0x3400 && cp <= 0x4DBF) ||
           (cp >= 0xF900 && cp <= 0xFAFF) || (cp >= 0x20000 && cp <= 0x2FA1F);
}

bool is_cjk(char32_t cp) {
    return is_han(cp) || (cp >= 0x3000 && cp <= 0x30FF) ||  // CJK punctuation, kana
           (cp >= 0xAC00 && cp <= 0xD7AF) ||                 // hangul
           (cp >= 0xFF00 && cp <= 0xFFEF);                   // fullwidth forms
}

namespace {

bool is_space(char32_t cp) {
    return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\f' ||
           cp == U'\v' || cp == 0x00A0;
}

}  // namespace

std::size_t count_tokens(std::string_view s) {
    std::size_t tokens = 0;
    bool in_word = false;
    for (std::size_t pos = 0; pos < s.size();) {
        const char32_t cp = next_code_point(s, pos);
        if (is_cjk(cp)) {
            ++tokens;
            in_word = false;
        } else if (is_space(cp)) {
            in_word = false;
        } else if (!in_word) {
            ++tokens;
            in_word = true;
        }
    }
    return tokens;
}

std::string truncate_tokens(std::string_view s, std::size_t budget) {
    std::size_t tokens = 0;
    bool in_word = false;
    for (std::size_t pos = 0; pos < s.size();) {
        const std::size_t start = pos;
        const char32_t cp = next_code_point(s, pos);
        if (is_cjk(cp)) {
            if (tokens + 1 > budget) return std::string(s.substr(0, start));
            ++tokens;
            in_word = false;
        } else if (is_space(cp)) {
            in_word = false;
        } else {
            if (!in_word) {
                if (tokens + 1 > budget) return std::string(s.substr(0, start));
                ++tokens;
                in_word = true;
            }
        }
    }
    return std::string(s);
}

Language detect_language(std::string_view s) {
    std::size_t han = 0;
    std::size_t latin = 0;
    std::size_t letters = 0;
    for (std::size_t pos = 0; pos < s.size();) {
        const char32_t cp = next_code_point(s, pos);
        if (is_han(cp)) {
            ++han;
            ++letters;
        } else if ((cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z')) {
            ++latin;
            ++letters;
        } else if (cp >= 0xC0 && !is_cjk(cp) && cp != 0xFFFD && !(cp >= 0x2000 && cp <= 0x2BFF)) {
            ++letters;
        }
    }
    if (letters == 0) return Language::other;
    if (han * 10 >= letters * 3) return Language::zh;
    if (latin * 2 > letters) return Language::en;
    return Language::other;
}

std::string trim(std::string_view s) {
    auto begin = s.find_first_not_of(" \t\r\n\f\v");
    if (begin == std::string_view::npos) return {};
    auto end = s.find_last_not_of(" \t\r\n\f\v");
    return std::string(s.substr(begin, end - begin + 1));
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::vector<std::string> split_words(std::string_view s) {
    std::vector<std::string> words;
    std::string current;
    for (std::size_t pos = 0; pos < s.size();) {
        const std::size_t start = pos;
        const char32_t cp = next_code_point(s, pos);
        if (is_cjk(cp)) {
            if (!current.empty()) words.push_back(std::move(current));
            current.clear();
            words.emplace_back(s.substr(start, pos - start));
        } else if (is_space(cp)) {
            if (!current.empty()) words.push_back(std::move(current));
            current.clear();
        } else {
            current.append(s.substr(start, pos - start));
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

namespace {

bool is_terminator(char32_t cp) {
    return cp == U'.' || cp == U'!' || cp == U'?' || cp == U'。' || cp == U'！' ||
           cp == U'？' || cp == U'…';
}

bool is_closer(char32_t cp) {
    return cp == U'"' || cp == U'\'' || cp == U')' || cp == U']' || cp == U'”' ||
           cp == U'’' || cp == U'）' || cp == U'」' || cp == U'』';
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view s) {
    std::vector<std::string> out;
    std::string current;
    std::size_t pos = 0;
    while (pos < s.size()) {
        const std::size_t start = pos;
        const char32_t cp = next_code_point(s, pos);
        current.append(s.substr(start, pos - start));
        if (!is_terminator(cp)) continue;
        // absorb runs of terminators and closers
        while (pos < s.size()) {
            std::size_t peek = pos;
            const char32_t next = next_code_point(s, peek);
            if (!is_terminator(next) && !is_closer(next)) break;
            current.append(s.substr(pos, peek - pos));
            pos = peek;
        }
        // a Latin terminator only ends a sentence before whitespace or end of text
        if (cp < 0x80 && pos < s.size()) {
            std::size_t peek = pos;
            const char32_t next = next_code_point(s, peek);
            if (!is_space(next)) continue;
        }
        auto sentence = trim(current);
        if (!sentence.empty()) out.push_back(std::move(sentence));
        current.clear();
    }
    auto tail = trim(current);
    if (!tail.empty()) out.push_back(std::move(tail));
    return out;
}

bool ends_with_terminator(std::string_view s) {
    const std::string t = trim(s);
    std::vector<char32_t> cps;
    for (std::size_t pos = 0; pos < t.size();) cps.push_back(next_code_point(t, pos));
    while (!cps.empty() && is_closer(cps.back())) cps.pop_back();
    return !cps.empty() && is_terminator(cps.back());
}

std::string join_fragments(std::string_view left, std::string_view right) {
    std::string l = trim(left);
    std::string r = trim(right);
    if (l.empty()) return r;
    if (r.empty()) return l;
    char32_t last = 0;
    for (std::size_t pos = 0; pos < l.size();) last = next_code_point(l, pos);
    std::size_t pos = 0;
    const char32_t first = next_code_point(r, pos);
    if (is_cjk(last) || is_cjk(first)) return l + r;
    return l + " " + r;
}

}  // namespace dentra::text
