// Reference extractor for the transcriber oracle tests. Deliberately slow and
// literal-minded: classify lines, label bytes, then cut fragments.

#include "literal_oracle.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <string>

namespace oracle {

using schemaprobe::Fragment;
using schemaprobe::FragmentKind;
using schemaprobe::SourceSpan;

namespace {

bool is_ws(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v';
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

struct Line {
  std::size_t b;
  std::size_t e;
};

enum class LineKind { FenceMarker, Code, Prose };

std::string_view ltrim(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && is_ws(s[i])) ++i;
  return s.substr(i);
}

std::string_view rtrim(std::string_view s) {
  std::size_t n = s.size();
  while (n > 0 && is_ws(s[n - 1])) --n;
  return s.substr(0, n);
}

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

bool is_definition(std::string_view line) {
  for (std::string_view prefix : {std::string_view("class "), std::string_view("def ")}) {
    if (!starts_with(line, prefix)) continue;
    auto r = rtrim(line);
    if (r.size() > prefix.size() + 1 && r.back() == ':') return true;
  }
  return false;
}

bool is_blank(std::string_view line) { return ltrim(line).empty(); }

void put_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

std::string decode(std::string_view raw) {
  std::string out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != '\\' || i + 1 == raw.size()) {
      out += raw[i];
      continue;
    }
    char n = raw[i + 1];
    if (n == 'n') { out += '\n'; ++i; }
    else if (n == 't') { out += '\t'; ++i; }
    else if (n == 'r') { out += '\r'; ++i; }
    else if (n == '\\' || n == '"' || n == '\'' || n == '/') { out += n; ++i; }
    else if (n == 'u' && i + 5 < raw.size() + 0 &&
             std::all_of(raw.begin() + static_cast<long>(i) + 2, raw.begin() + static_cast<long>(i) + 6,
                         [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); })) {
      put_utf8(out, static_cast<std::uint32_t>(std::stoul(std::string(raw.substr(i + 2, 4)), nullptr, 16)));
      i += 5;
    } else {
      out += '\\';
    }
  }
  return out;
}

// Code region: every byte is visited once by a tiny state machine.
void extract_code(std::string_view t, std::size_t b, std::size_t e, std::vector<Fragment>& out) {
  std::size_t i = b;
  while (i < e) {
    char c = t[i];
    bool hash = c == '#';
    bool slashes = c == '/' && i + 1 < e && t[i + 1] == '/';
    if (hash || slashes) {
      std::size_t start = i + (hash ? 1 : 2);
      std::size_t stop = start;
      while (stop < e && t[stop] != '\n') ++stop;
      std::size_t tb = start, te = stop;
      while (tb < te && is_ws(t[tb])) ++tb;
      while (te > tb && is_ws(t[te - 1])) --te;
      if (te > tb) out.push_back({std::string(t.substr(tb, te - tb)), FragmentKind::CodeComment, {tb, te}, false});
      i = stop;
      continue;
    }
    if (c == '"' || c == '\'') {
      std::size_t qlen = (i + 2 < e && t[i + 1] == c && t[i + 2] == c) ? 3 : 1;
      std::string delim(qlen, c);
      std::size_t cb = i + qlen;
      std::size_t k = cb;
      bool closed = false;
      while (k < e) {
        if (t[k] == '\\') { k += 2; continue; }
        if (t.substr(k, qlen) == delim && k + qlen <= e) { closed = true; break; }
        ++k;
      }
      std::size_t ce = std::min(k, e);
      if (ce > cb) {
        auto text = decode(t.substr(cb, ce - cb));
        if (!text.empty()) out.push_back({text, FragmentKind::StringLiteral, {cb, ce}, !closed});
      }
      i = closed ? ce + qlen : e;
      continue;
    }
    ++i;
  }
}

// Returns one-past the closing brace, or 0 when the braces never balance.
std::size_t json_close(std::string_view t, std::size_t i, std::size_t e) {
  std::size_t j = i + 1;
  while (j < e && is_ws(t[j])) ++j;
  if (j >= e || (t[j] != '"' && t[j] != '}')) return 0;
  int depth = 0;
  bool in_str = false;
  for (std::size_t k = i; k < e; ++k) {
    if (in_str) {
      if (t[k] == '\\') ++k;
      else if (t[k] == '"') in_str = false;
      continue;
    }
    if (t[k] == '"') in_str = true;
    else if (t[k] == '{') ++depth;
    else if (t[k] == '}' && --depth == 0) return k + 1;
  }
  return 0;
}

bool name_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_'; }

std::size_t markup_close(std::string_view t, std::size_t i, std::size_t e) {
  if (i + 1 >= e || !std::isalpha(static_cast<unsigned char>(t[i + 1]))) return 0;
  std::size_t n = i + 1;
  while (n < e && name_char(t[n])) ++n;
  std::string name(t.substr(i + 1, n - i - 1));
  auto gt = t.find('>', n);
  if (gt == std::string_view::npos || gt >= e) return 0;
  if (t[gt - 1] == '/') return 0;
  std::string open = "<" + name;
  std::string close = "</" + name + ">";
  int depth = 1;
  for (std::size_t k = gt + 1; k < e; ++k) {
    if (t.substr(k, close.size()) == close && k + close.size() <= e) {
      if (--depth == 0) return k + close.size();
      continue;
    }
    if (t.substr(k, open.size()) == open && k + open.size() < e) {
      char after = t[k + open.size()];
      if (after == '>' || after == '/' || is_ws(after)) {
        auto g = t.find('>', k);
        if (g != std::string_view::npos && g < e && t[g - 1] != '/') ++depth;
      }
    }
  }
  return 0;
}

void extract_json(std::string_view t, std::size_t b, std::size_t e, std::vector<Fragment>& out) {
  for (std::size_t k = b; k < e; ++k) {
    if (t[k] != '"') continue;
    std::size_t q = k + 1;
    while (q < e && t[q] != '"') q += (t[q] == '\\') ? 2 : 1;
    std::size_t after = q + 1;
    while (after < e && is_ws(t[after])) ++after;
    bool key = after < e && t[after] == ':';
    if (!key && q > k + 1) {
      auto text = decode(t.substr(k + 1, q - k - 1));
      if (!text.empty()) out.push_back({text, FragmentKind::StringLiteral, {k + 1, q}, false});
    }
    k = q;
  }
}

std::string entities(std::string s) {
  const std::pair<const char*, const char*> table[] = {
      {"&lt;", "<"}, {"&gt;", ">"}, {"&quot;", "\""}, {"&apos;", "'"}, {"&amp;", "&"}};
  std::string out;
  for (std::size_t i = 0; i < s.size();) {
    bool hit = false;
    for (auto [from, to] : table) {
      std::string_view f(from);
      if (std::string_view(s).substr(i, f.size()) == f) {
        out += to;
        i += f.size();
        hit = true;
        break;
      }
    }
    if (!hit) out += s[i++];
  }
  return out;
}

void extract_markup(std::string_view t, std::size_t b, std::size_t e, std::vector<Fragment>& out) {
  std::size_t k = b;
  while (k < e) {
    if (t[k] == '<') {
      auto g = t.find('>', k);
      k = (g == std::string_view::npos || g >= e) ? e : g + 1;
      continue;
    }
    std::size_t stop = k;
    while (stop < e && t[stop] != '<') ++stop;
    std::size_t tb = k, te = stop;
    while (tb < te && is_ws(t[tb])) ++tb;
    while (te > tb && is_ws(t[te - 1])) --te;
    if (te > tb) out.push_back({entities(std::string(t.substr(tb, te - tb))), FragmentKind::StringLiteral, {tb, te}, false});
    k = stop;
  }
}

bool abbreviation_before(std::string_view t, std::size_t s, std::size_t k) {
  static const char* kAbbrev[] = {"e.g", "i.e", "etc", "vs", "mr", "mrs", "ms", "dr",
                                  "prof", "fig", "no", "st", "approx", "cf"};
  std::size_t a = k;
  while (a > s && !is_ws(t[a - 1])) --a;
  std::string tok(t.substr(a, k - a));
  while (!tok.empty() && tok.front() == '(') tok.erase(tok.begin());
  tok = lower(tok);
  return std::find(std::begin(kAbbrev), std::end(kAbbrev), tok) != std::end(kAbbrev);
}

void extract_sentences(std::string_view t, std::size_t s, std::size_t e, std::vector<Fragment>& out) {
  std::vector<std::size_t> cuts{s};
  for (std::size_t k = s; k < e; ++k) {
    char c = t[k];
    if ((c == '.' || c == '!' || c == '?') && (k + 1 == e || is_ws(t[k + 1])) &&
        !(c == '.' && abbreviation_before(t, s, k))) {
      cuts.push_back(k + 1);
    }
    if (c == '\n') {
      std::size_t m = k + 1;
      while (m < e && (t[m] == ' ' || t[m] == '\t' || t[m] == '\r')) ++m;
      if (m < e && t[m] == '\n') cuts.push_back(k);
    }
  }
  cuts.push_back(e);
  std::sort(cuts.begin(), cuts.end());

  std::vector<Fragment> pieces;
  for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
    std::size_t b = cuts[p], f = cuts[p + 1];
    while (b < f && is_ws(t[b])) ++b;
    while (f > b && is_ws(t[f - 1])) --f;
    if (f <= b) continue;
    std::string text;
    bool gap = false;
    for (std::size_t q = b; q < f; ++q) {
      if (is_ws(t[q])) { gap = true; continue; }
      if (gap) text += ' ';
      gap = false;
      text += t[q];
    }
    pieces.push_back({text, FragmentKind::Sentence, {b, f}, false});
  }

  std::vector<Fragment> merged;
  std::optional<Fragment> carry;
  for (std::size_t p = 0; p < pieces.size(); ++p) {
    Fragment cur = pieces[p];
    if (carry) {
      cur.text = carry->text + " " + cur.text;
      cur.span.begin = carry->span.begin;
      carry.reset();
    }
    bool last = p + 1 == pieces.size();
    if (cur.text.size() < 3 && !last) {
      carry = cur;
    } else if (cur.text.size() < 3 && last && !merged.empty()) {
      merged.back().text += " " + cur.text;
      merged.back().span.end = cur.span.end;
    } else {
      merged.push_back(cur);
    }
  }
  out.insert(out.end(), merged.begin(), merged.end());
}

void extract_prose(std::string_view t, std::size_t b, std::size_t e, std::vector<Fragment>& out) {
  // 'p' prose, 'j' json, 'm' markup
  std::string label(e - b, 'p');
  for (std::size_t i = b; i < e; ++i) {
    if (label[i - b] != 'p') continue;
    std::size_t end = 0;
    char kind = 0;
    if (t[i] == '{') { end = json_close(t, i, e); kind = 'j'; }
    else if (t[i] == '<') { end = markup_close(t, i, e); kind = 'm'; }
    if (end) {
      std::fill(label.begin() + static_cast<long>(i - b), label.begin() + static_cast<long>(end - b), kind);
      // Mark the first byte so that adjacent spans stay distinct.
      label[i - b] = static_cast<char>(std::toupper(kind));
      i = end - 1;
    }
  }
  std::size_t i = b;
  while (i < e) {
    char l = label[i - b];
    std::size_t j = i + 1;
    char cont = static_cast<char>(std::tolower(l));
    while (j < e && label[j - b] == cont) ++j;
    if (l == 'p') extract_sentences(t, i, j, out);
    else if (l == 'J') extract_json(t, i, j, out);
    else extract_markup(t, i, j, out);
    i = j;
  }
}

}  // namespace

std::vector<Fragment> extract_literals(std::string_view t) {
  std::vector<Line> lines;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= t.size(); ++i) {
    if (i == t.size() || t[i] == '\n') {
      lines.push_back({start, i});
      start = i + 1;
    }
  }

  std::vector<LineKind> kind(lines.size(), LineKind::Prose);
  std::vector<int> region(lines.size(), -1);
  int next_region = 0;
  auto text_of = [&](std::size_t l) { return t.substr(lines[l].b, lines[l].e - lines[l].b); };

  std::size_t l = 0;
  while (l < lines.size()) {
    if (starts_with(ltrim(text_of(l)), "```")) {
      kind[l++] = LineKind::FenceMarker;
      int id = next_region++;
      while (l < lines.size() && !starts_with(ltrim(text_of(l)), "```")) {
        kind[l] = LineKind::Code;
        region[l++] = id;
      }
      if (l < lines.size()) kind[l++] = LineKind::FenceMarker;
    } else if (is_definition(text_of(l))) {
      int id = next_region++;
      kind[l] = LineKind::Code;
      region[l++] = id;
      while (l < lines.size() && (is_blank(text_of(l)) || text_of(l)[0] == ' ' || text_of(l)[0] == '\t')) {
        kind[l] = LineKind::Code;
        region[l++] = id;
      }
    } else {
      bool continues = l > 0 && kind[l - 1] == LineKind::Prose;
      int id = continues ? region[l - 1] : next_region++;
      region[l++] = id;
    }
  }

  std::vector<Fragment> out;
  std::size_t a = 0;
  while (a < lines.size()) {
    if (kind[a] == LineKind::FenceMarker) { ++a; continue; }
    std::size_t z = a;
    while (z + 1 < lines.size() && region[z + 1] == region[a] && kind[z + 1] == kind[a]) ++z;
    if (kind[a] == LineKind::Code) extract_code(t, lines[a].b, lines[z].e, out);
    else extract_prose(t, lines[a].b, lines[z].e, out);
    a = z + 1;
  }
  return out;
}

}  // namespace oracle
