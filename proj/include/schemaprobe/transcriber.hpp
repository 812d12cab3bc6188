#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace schemaprobe {

enum class FragmentKind { Sentence, StringLiteral, CodeComment };

std::string_view to_string(FragmentKind kind);

// Half-open byte range into the transcribed prompt.
struct SourceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool operator==(const SourceSpan&) const = default;
};

struct Fragment {
  std::string text;
  FragmentKind kind = FragmentKind::Sentence;
  SourceSpan span;
  bool unterminated = false;  // literal ran to the end of its region

  bool operator==(const Fragment&) const = default;
};

/// Literal transcription of a prompt.
///
/// The prompt is first split into regions, line by line:
///   * fenced blocks: a line whose left-trimmed text starts with ``` opens a
///     block that runs to the next such line (or end of input); fence lines
///     contribute nothing;
///   * indented definitions: a column-0 line starting with "class " or
///     "def " and ending in ':' plus every following blank or indented line;
///   * prose: everything else, grouped into maximal runs of lines.
///
/// Inside prose, a '{' whose next non-space character is '"' or '}' starts a
/// JSON-like span if its braces balance (quoted strings skipped) within the
/// run; a '<name' opening tag starts a markup span if a matching '</name>'
/// exists in the run. The remaining prose is cut into sentences.
///
/// Emitted, in document order:
///   * code regions: every quoted literal ('', "", ''' ''', """ """) with
///     escapes decoded, and every '#' or '//' comment;
///   * JSON spans: string values (a string followed by ':' is a key);
///   * markup spans: trimmed, entity-decoded text nodes;
///   * prose: sentences ending at . ! ? before whitespace or end of text
///     (common abbreviations excepted) or at a blank line, with inner
///     whitespace collapsed; sentences under 3 characters merge forward
///     (backward when last).
/// Literal spans cover the raw, still-escaped content between delimiters.
std::vector<Fragment> transcribe_literals(std::string_view prompt);

// Decodes the escapes the transcriber recognises: \n \t \r \\ \" \' \/ and
// \uXXXX. Unknown escapes are kept verbatim.
std::string unescape_literal(std::string_view raw);

}  // namespace schemaprobe
