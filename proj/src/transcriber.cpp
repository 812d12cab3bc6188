#include "schemaprobe/transcriber.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <optional>

namespace schemaprobe {

namespace {

constexpr bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

struct Range {
  std::size_t begin;
  std::size_t end;
};

Range trim(std::string_view text, Range r) {
  while (r.begin < r.end && is_space(text[r.begin])) ++r.begin;
  while (r.end > r.begin && is_space(text[r.end - 1])) --r.end;
  return r;
}

void append_utf8(std::string& out, std::uint32_t cp) {
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

std::optional<std::uint32_t> hex4(std::string_view s) {
  if (s.size() < 4) return std::nullopt;
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    char c = s[static_cast<std::size_t>(i)];
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<std::uint32_t>(c - '0');
    else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint32_t>(c - 'a' + 10);
    else if (c >= 'A' && c <= 'F') v |= static_cast<std::uint32_t>(c - 'A' + 10);
    else return std::nullopt;
  }
  return v;
}

std::string decode_entities(std::string_view s) {
  static constexpr std::array<std::pair<std::string_view, char>, 5> kEntities{{
      {"&lt;", '<'}, {"&gt;", '>'}, {"&quot;", '"'}, {"&apos;", '\''}, {"&amp;", '&'}}};
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '&') {
      auto it = std::find_if(kEntities.begin(), kEntities.end(),
                             [&](const auto& e) { return s.substr(i, e.first.size()) == e.first; });
      if (it != kEntities.end()) {
        out.push_back(it->second);
        i += it->first.size();
        continue;
      }
    }
    out.push_back(s[i++]);
  }
  return out;
}

bool is_abbreviation(std::string_view token) {
  static constexpr std::array<std::string_view, 14> kAbbrev{
      "e.g", "i.e", "etc", "vs", "mr", "mrs", "ms", "dr", "prof", "fig", "no", "st", "approx", "cf"};
  while (!token.empty() && token.front() == '(') token.remove_prefix(1);
  if (token.size() > 6) return false;
  std::string low(token);
  std::transform(low.begin(), low.end(), low.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return std::find(kAbbrev.begin(), kAbbrev.end(), low) != kAbbrev.end();
}

bool is_tag_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
}

class Transcriber {
 public:
  explicit Transcriber(std::string_view text) : text_(text) {}

  std::vector<Fragment> run() {
    split_lines();
    std::size_t i = 0;
    while (i < lines_.size()) {
      if (is_fence(i)) {
        std::size_t j = i + 1;
        while (j < lines_.size() && !is_fence(j)) ++j;
        if (j > i + 1) code({lines_[i + 1].begin, lines_[j - 1].end});
        i = j < lines_.size() ? j + 1 : j;
      } else if (is_definition(i)) {
        std::size_t j = i + 1;
        while (j < lines_.size() && continues_definition(j)) ++j;
        code({lines_[i].begin, lines_[j - 1].end});
        i = j;
      } else {
        std::size_t j = i + 1;
        while (j < lines_.size() && !is_fence(j) && !is_definition(j)) ++j;
        prose({lines_[i].begin, lines_[j - 1].end});
        i = j;
      }
    }
    return std::move(out_);
  }

 private:
  std::string_view line(std::size_t i) const {
    return text_.substr(lines_[i].begin, lines_[i].end - lines_[i].begin);
  }

  void split_lines() {
    std::size_t start = 0;
    for (;;) {
      auto nl = text_.find('\n', start);
      if (nl == std::string_view::npos) {
        lines_.push_back({start, text_.size()});
        return;
      }
      lines_.push_back({start, nl});
      start = nl + 1;
    }
  }

  bool is_fence(std::size_t i) const {
    auto r = trim(text_, lines_[i]);
    return text_.substr(r.begin, std::min<std::size_t>(3, r.end - r.begin)) == "```";
  }

  bool is_definition(std::size_t i) const {
    auto l = line(i);
    std::size_t prefix = l.starts_with("class ") ? 6 : l.starts_with("def ") ? 4 : 0;
    if (prefix == 0) return false;
    auto r = trim(text_, lines_[i]);
    std::size_t len = r.end - lines_[i].begin;
    return len > prefix + 1 && text_[r.end - 1] == ':';
  }

  bool continues_definition(std::size_t i) const {
    auto l = line(i);
    auto r = trim(text_, lines_[i]);
    return r.begin == r.end || l.front() == ' ' || l.front() == '\t';
  }

  void emit(std::string text, FragmentKind kind, Range r, bool unterminated = false) {
    if (text.empty()) return;
    out_.push_back({std::move(text), kind, {r.begin, r.end}, unterminated});
  }

  // --- code regions -------------------------------------------------------

  void code(Range r) {
    std::size_t i = r.begin;
    while (i < r.end) {
      const char c = text_[i];
      if (c == '#' || (c == '/' && i + 1 < r.end && text_[i + 1] == '/')) {
        i = comment(i + (c == '#' ? 1 : 2), r.end);
      } else if (c == '"' || c == '\'') {
        i = quoted(i, r.end);
      } else {
        ++i;
      }
    }
  }

  std::size_t comment(std::size_t from, std::size_t limit) {
    auto nl = text_.find('\n', from);
    std::size_t stop = nl == std::string_view::npos ? limit : std::min(nl, limit);
    auto r = trim(text_, {from, stop});
    emit(std::string(text_.substr(r.begin, r.end - r.begin)), FragmentKind::CodeComment, r);
    return stop;
  }

  std::size_t quoted(std::size_t open, std::size_t limit) {
    const char q = text_[open];
    const bool triple = open + 2 < limit && text_[open + 1] == q && text_[open + 2] == q;
    const std::size_t width = triple ? 3 : 1;
    const std::size_t body = open + width;
    std::size_t i = body;
    while (i < limit) {
      if (text_[i] == '\\') {
        i += 2;
        continue;
      }
      if (text_[i] == q && (!triple || (i + 2 < limit && text_[i + 1] == q && text_[i + 2] == q))) {
        emit(unescape_literal(text_.substr(body, i - body)), FragmentKind::StringLiteral, {body, i});
        return i + width;
      }
      ++i;
    }
    emit(unescape_literal(text_.substr(body, limit - body)), FragmentKind::StringLiteral,
         {std::min(body, limit), limit}, true);
    return limit;
  }

  // --- prose runs ----------------------------------------------------------

  void prose(Range r) {
    std::size_t seg = r.begin;
    std::size_t i = r.begin;
    while (i < r.end) {
      std::optional<std::size_t> close;
      bool json = false;
      if (text_[i] == '{') {
        close = json_span_end(i, r.end);
        json = true;
      } else if (text_[i] == '<') {
        close = markup_span_end(i, r.end);
      }
      if (!close) {
        ++i;
        continue;
      }
      sentences({seg, i});
      if (json) json_values({i, *close});
      else text_nodes({i, *close});
      seg = i = *close;
    }
    sentences({seg, r.end});
  }

  std::optional<std::size_t> json_span_end(std::size_t open, std::size_t limit) const {
    std::size_t k = open + 1;
    while (k < limit && is_space(text_[k])) ++k;
    if (k == limit || (text_[k] != '"' && text_[k] != '}')) return std::nullopt;
    int depth = 0;
    for (k = open; k < limit; ++k) {
      switch (text_[k]) {
        case '"':
          for (++k; k < limit && text_[k] != '"'; ++k) {
            if (text_[k] == '\\') ++k;
          }
          break;
        case '{': ++depth; break;
        case '}':
          if (--depth == 0) return k + 1;
          break;
        default: break;
      }
    }
    return std::nullopt;
  }

  // '>' closing the tag that starts at `lt`, if any.
  std::optional<std::size_t> tag_end(std::size_t lt, std::size_t limit) const {
    auto gt = text_.find('>', lt);
    if (gt == std::string_view::npos || gt >= limit) return std::nullopt;
    return gt;
  }

  std::optional<std::size_t> markup_span_end(std::size_t lt, std::size_t limit) const {
    if (lt + 1 >= limit || !std::isalpha(static_cast<unsigned char>(text_[lt + 1]))) return std::nullopt;
    std::size_t n = lt + 1;
    while (n < limit && is_tag_name_char(text_[n])) ++n;
    const std::string_view name = text_.substr(lt + 1, n - lt - 1);
    auto gt = tag_end(n, limit);
    if (!gt || text_[*gt - 1] == '/') return std::nullopt;

    const std::string closing = "</" + std::string(name) + ">";
    int depth = 1;
    for (std::size_t k = *gt + 1; k < limit; ++k) {
      if (text_[k] != '<') continue;
      if (k + closing.size() <= limit && text_.substr(k, closing.size()) == closing) {
        if (--depth == 0) return k + closing.size();
        continue;
      }
      std::size_t after = k + 1 + name.size();
      if (after < limit && text_.substr(k + 1, name.size()) == name &&
          (text_[after] == '>' || text_[after] == '/' || is_space(text_[after]))) {
        if (auto g = tag_end(k, limit); g && text_[*g - 1] != '/') ++depth;
      }
    }
    return std::nullopt;
  }

  void json_values(Range r) {
    std::size_t i = r.begin;
    while (i < r.end) {
      if (text_[i] != '"') {
        ++i;
        continue;
      }
      std::size_t body = i + 1;
      std::size_t k = body;
      while (k < r.end && text_[k] != '"') k += text_[k] == '\\' ? 2 : 1;
      std::size_t next = k + 1;
      while (next < r.end && is_space(text_[next])) ++next;
      if (!(next < r.end && text_[next] == ':')) {
        emit(unescape_literal(text_.substr(body, k - body)), FragmentKind::StringLiteral, {body, k});
      }
      i = k + 1;
    }
  }

  void text_nodes(Range r) {
    std::size_t i = r.begin;
    while (i < r.end) {
      if (text_[i] == '<') {
        auto gt = tag_end(i, r.end);
        i = gt ? *gt + 1 : r.end;
        continue;
      }
      auto lt = text_.find('<', i);
      std::size_t stop = lt == std::string_view::npos ? r.end : std::min(lt, r.end);
      auto t = trim(text_, {i, stop});
      emit(decode_entities(text_.substr(t.begin, t.end - t.begin)), FragmentKind::StringLiteral, t);
      i = stop;
    }
  }

  bool ends_sentence(std::size_t k, Range seg) const {
    const char c = text_[k];
    if (c != '.' && c != '!' && c != '?') return false;
    if (k + 1 < seg.end && !is_space(text_[k + 1])) return false;
    if (c != '.') return true;
    std::size_t w = k;
    while (w > seg.begin && !is_space(text_[w - 1])) --w;
    return !is_abbreviation(text_.substr(w, k - w));
  }

  // True when the newline at `k` is followed by a whitespace-only line.
  bool blank_line_after(std::size_t k, Range seg) const {
    std::size_t m = k + 1;
    while (m < seg.end && (text_[m] == ' ' || text_[m] == '\t' || text_[m] == '\r')) ++m;
    return m < seg.end && text_[m] == '\n';
  }

  void sentences(Range seg) {
    std::vector<Fragment> pieces;
    auto cut = [&](std::size_t from, std::size_t to) {
      auto r = trim(text_, {from, to});
      if (r.begin == r.end) return;
      std::string collapsed;
      bool pending_space = false;
      for (std::size_t k = r.begin; k < r.end; ++k) {
        if (is_space(text_[k])) {
          pending_space = true;
          continue;
        }
        if (pending_space) collapsed.push_back(' ');
        pending_space = false;
        collapsed.push_back(text_[k]);
      }
      pieces.push_back({std::move(collapsed), FragmentKind::Sentence, {r.begin, r.end}, false});
    };

    std::size_t start = seg.begin;
    for (std::size_t k = seg.begin; k < seg.end; ++k) {
      if (text_[k] == '\n' && blank_line_after(k, seg)) {
        cut(start, k);
        start = k;
      } else if (ends_sentence(k, seg)) {
        cut(start, k + 1);
        start = k + 1;
      }
    }
    cut(start, seg.end);

    // Short pieces join the following sentence; a short tail joins the
    // preceding one.
    std::optional<Fragment> pending;
    std::vector<Fragment> merged;
    for (std::size_t p = 0; p < pieces.size(); ++p) {
      Fragment f = std::move(pieces[p]);
      if (pending) {
        f.text = pending->text + " " + f.text;
        f.span.begin = pending->span.begin;
        pending.reset();
      }
      const bool last = p + 1 == pieces.size();
      if (f.text.size() >= 3) {
        merged.push_back(std::move(f));
      } else if (!last) {
        pending = std::move(f);
      } else if (!merged.empty()) {
        merged.back().text += " " + f.text;
        merged.back().span.end = f.span.end;
      } else {
        merged.push_back(std::move(f));
      }
    }
    for (auto& f : merged) out_.push_back(std::move(f));
  }

  std::string_view text_;
  std::vector<Range> lines_;
  std::vector<Fragment> out_;
};

}  // namespace

std::string_view to_string(FragmentKind kind) {
  switch (kind) {
    case FragmentKind::Sentence: return "sentence";
    case FragmentKind::StringLiteral: return "string-literal";
    case FragmentKind::CodeComment: return "code-comment";
  }
  return "sentence";
}

std::string unescape_literal(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != '\\' || i + 1 >= raw.size()) {
      out.push_back(raw[i]);
      continue;
    }
    const char n = raw[i + 1];
    switch (n) {
      case 'n': out.push_back('\n'); ++i; break;
      case 't': out.push_back('\t'); ++i; break;
      case 'r': out.push_back('\r'); ++i; break;
      case '\\':
      case '"':
      case '\'':
      case '/': out.push_back(n); ++i; break;
      case 'u':
        if (auto cp = hex4(raw.substr(i + 2))) {
          append_utf8(out, *cp);
          i += 5;
          break;
        }
        [[fallthrough]];
      default: out.push_back('\\');
    }
  }
  return out;
}

std::vector<Fragment> transcribe_literals(std::string_view prompt) {
  return Transcriber(prompt).run();
}

}  // namespace schemaprobe
