#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace emer {

// Reads a model reply that should contain a list of lists of strings, e.g.
// the answer to the grouping prompt. Tolerates JSON, Python-style single
// quotes, unquoted items, fenced code blocks, surrounding prose, full-width
// CJK punctuation and one-list-per-line replies. Throws ParseFailure (with
// the raw reply attached) when no list-of-lists structure can be recovered.
std::vector<std::vector<std::string>> parse_list_of_lists(std::string_view reply);

// Reads a flat label list: a bracketed list or a comma/semicolon/newline
// separated enumeration. Returns items trimmed and unquoted but not
// normalized. Throws ParseFailure on unbalanced brackets or quotes.
std::vector<std::string> parse_label_list(std::string_view reply);

}  // namespace emer
