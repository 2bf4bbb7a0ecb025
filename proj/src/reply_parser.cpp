#include "emer/reply_parser.h"

#include <array>
#include <utility>

#include "emer/errors.h"

namespace emer {
namespace {

struct Node {
  bool is_list = false;
  std::string text;
  std::vector<Node> items;
};

// Full-width and typographic punctuation that models commonly emit in place
// of the ASCII list syntax.
constexpr std::array<std::pair<std::string_view, std::string_view>, 14> kPunctuation{{
    {"\xEF\xBC\xBB", "["},  // ［
    {"\xEF\xBC\xBD", "]"},  // ］
    {"\xE3\x80\x90", "["},  // 【
    {"\xE3\x80\x91", "]"},  // 】
    {"\xEF\xBC\x88", "("},  // （
    {"\xEF\xBC\x89", ")"},  // ）
    {"\xEF\xBC\x8C", ","},  // ，
    {"\xE3\x80\x81", ","},  // 、
    {"\xEF\xBC\x9B", ";"},  // ；
    {"\xE2\x80\x9C", "\""},  // “
    {"\xE2\x80\x9D", "\""},  // ”
    {"\xE3\x80\x8C", "\""},  // 「
    {"\xE3\x80\x8D", "\""},  // 」
    {"\xE2\x80\x98", "'"},  // ‘
}};

std::string ascii_punctuation(std::string_view in) {
  std::string out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size();) {
    bool replaced = false;
    for (const auto& [from, to] : kPunctuation) {
      if (in.substr(i, from.size()) == from) {
        out += to;
        i += from.size();
        replaced = true;
        break;
      }
    }
    if (!replaced && in.substr(i, 3) == "\xE2\x80\x99") {  // ’
      out += '\'';
      i += 3;
      replaced = true;
    }
    if (!replaced) out += in[i++];
  }
  return out;
}

std::string strip_code_fences(std::string_view in) {
  std::string out;
  std::size_t start = 0;
  while (start <= in.size()) {
    std::size_t end = in.find('\n', start);
    if (end == std::string_view::npos) end = in.size();
    std::string_view line = in.substr(start, end - start);
    std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string_view::npos || line.substr(first, 3) != "```") {
      out.append(line);
      out.push_back('\n');
    }
    start = end + 1;
  }
  return out;
}

std::string trim(std::string_view s) {
  const char* ws = " \t\r\n";
  std::size_t b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  std::size_t e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

void append_utf8(std::string& out, unsigned cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

class ListParser {
 public:
  ListParser(std::string_view text, std::string_view raw) : s_(text), raw_(raw) {}

  // Positions at the next top-level '['; false when none remain.
  bool seek_list() {
    pos_ = s_.find('[', pos_);
    return pos_ != std::string_view::npos;
  }

  Node parse_list() {
    char open = s_[pos_++];
    char close = open == '[' ? ']' : ')';
    Node node;
    node.is_list = true;
    while (true) {
      skip(" \t\r\n");
      if (pos_ >= s_.size()) fail("unbalanced '" + std::string(1, open) + "'");
      char c = s_[pos_];
      if (c == close) {
        ++pos_;
        return node;
      }
      if (c == ',' || c == ';') {  // empty slot or trailing separator
        ++pos_;
        continue;
      }
      if (c == ']' || c == ')') fail("mismatched closing '" + std::string(1, c) + "'");
      Node item = parse_value();
      if (item.is_list || !item.text.empty()) node.items.push_back(std::move(item));
      skip(" \t\r");
      if (pos_ < s_.size() && (s_[pos_] == ',' || s_[pos_] == ';' || s_[pos_] == '\n')) {
        ++pos_;
      }
    }
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw ParseFailure("unparseable list reply: " + why, std::string(raw_));
  }

 private:
  void skip(std::string_view chars) {
    while (pos_ < s_.size() && chars.find(s_[pos_]) != std::string_view::npos) ++pos_;
  }

  Node parse_value() {
    char c = s_[pos_];
    if (c == '[' || c == '(') return parse_list();
    if (c == '"' || c == '\'') return parse_quoted();
    Node node;
    std::size_t start = pos_;
    while (pos_ < s_.size()) {
      char d = s_[pos_];
      if (d == ',' || d == ';' || d == '\n' || d == '[' || d == ']' || d == '(' ||
          d == ')') {
        break;
      }
      ++pos_;
    }
    node.text = trim(s_.substr(start, pos_ - start));
    return node;
  }

  Node parse_quoted() {
    char quote = s_[pos_++];
    Node node;
    while (true) {
      if (pos_ >= s_.size()) fail("unterminated quote");
      char c = s_[pos_++];
      if (c == quote) break;
      if (c == '\\' && pos_ < s_.size()) {
        char e = s_[pos_++];
        switch (e) {
          case 'n': node.text.push_back('\n'); break;
          case 't': node.text.push_back('\t'); break;
          case 'u':
            if (pos_ + 4 <= s_.size()) {
              unsigned cp = std::stoul(std::string(s_.substr(pos_, 4)), nullptr, 16);
              append_utf8(node.text, cp);
              pos_ += 4;
              break;
            }
            fail("truncated \\u escape");
          default: node.text.push_back(e);
        }
        continue;
      }
      node.text.push_back(c);
    }
    node.text = trim(node.text);
    return node;
  }

  std::string_view s_;
  std::string_view raw_;
  std::size_t pos_ = 0;
};

bool has_list_items(const Node& node) {
  for (const auto& item : node.items) {
    if (item.is_list) return true;
  }
  return false;
}

void flatten_into(const Node& node, std::vector<std::string>& out) {
  for (const auto& item : node.items) {
    if (item.is_list) {
      flatten_into(item, out);
    } else if (!item.text.empty()) {
      out.push_back(item.text);
    }
  }
}

}  // namespace

std::vector<std::vector<std::string>> parse_list_of_lists(std::string_view reply) {
  std::string text = strip_code_fences(ascii_punctuation(reply));
  ListParser parser(text, reply);

  std::vector<Node> tops;
  while (parser.seek_list()) {
    tops.push_back(parser.parse_list());
    if (has_list_items(tops.front())) break;  // trailing prose is ignored
  }
  if (tops.empty()) parser.fail("no '[' found");

  std::vector<std::vector<std::string>> groups;
  auto add_group = [&groups](const Node& node) {
    std::vector<std::string> group;
    if (node.is_list) {
      flatten_into(node, group);
    } else if (!node.text.empty()) {
      group.push_back(node.text);
    }
    if (!group.empty()) groups.push_back(std::move(group));
  };

  if (has_list_items(tops.front())) {
    const Node* outer = &tops.front();
    // [[[a, b], [c]]]: one redundant wrapper.
    while (outer->items.size() == 1 && outer->items.front().is_list &&
           has_list_items(outer->items.front())) {
      outer = &outer->items.front();
    }
    for (const auto& item : outer->items) add_group(item);
  } else if (tops.size() >= 2) {
    for (const auto& top : tops) add_group(top);
  } else {
    parser.fail("a single flat list is not a list of lists");
  }

  if (groups.empty()) parser.fail("no labels in reply");
  return groups;
}

std::vector<std::string> parse_label_list(std::string_view reply) {
  std::string text = strip_code_fences(ascii_punctuation(reply));
  std::vector<std::string> labels;
  ListParser parser(text, reply);
  if (parser.seek_list()) {
    flatten_into(parser.parse_list(), labels);
    return labels;
  }

  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find_first_of(",;\n", start);
    if (end == std::string::npos) end = text.size();
    std::string item = trim(std::string_view(text).substr(start, end - start));
    if (auto colon = item.rfind(':'); colon != std::string::npos) {
      item = trim(std::string_view(item).substr(colon + 1));
    }
    if (item.starts_with("- ") || item.starts_with("* ")) item = trim(item.substr(2));
    while (!item.empty() && (item.back() == '.' || item.back() == '!')) item.pop_back();
    if (item.size() >= 2 && (item.front() == '"' || item.front() == '\'')) {
      if (item.back() != item.front()) parser.fail("unterminated quote");
      item = trim(item.substr(1, item.size() - 2));
    } else if (!item.empty() && (item.front() == '"' || item.front() == '\'')) {
      parser.fail("unterminated quote");
    }
    if (item.find(']') != std::string::npos) {
      parser.fail("unbalanced bracket");
    }
    if (!item.empty()) labels.push_back(std::move(item));
    start = end + 1;
  }
  return labels;
}

}  // namespace emer
