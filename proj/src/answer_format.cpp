#include "resume_judge/answer_format.hpp"

#include <cctype>
#include <algorithm>
#include <array>
#include <map>
#include <sstream>

namespace resume_judge {

namespace {

enum class Key { Content, Structure, Language, Overall, Rationale, Target };

std::string_view key_name(Key k) {
  switch (k) {
    case Key::Content:
      return "content";
    case Key::Structure:
      return "structure";
    case Key::Language:
      return "language";
    case Key::Overall:
      return "overall";
    case Key::Rationale:
      return "rationale";
    case Key::Target:
      return "target";
  }
  return "?";
}

struct KeySpelling {
  std::string_view text;
  Key key;
};

// Longer spellings first so "overall judgment" wins over "overall".
constexpr std::array<KeySpelling, 24> kSpellings = {{
    {"overall judgement", Key::Overall},
    {"overall judgment", Key::Overall},
    {"final judgement", Key::Overall},
    {"final judgment", Key::Overall},
    {"content score", Key::Content},
    {"structure score", Key::Structure},
    {"language score", Key::Language},
    {"overall", Key::Overall},
    {"judgment", Key::Overall},
    {"content", Key::Content},
    {"structure", Key::Structure},
    {"language", Key::Language},
    {"rationale", Key::Rationale},
    {"reason", Key::Rationale},
    {"target", Key::Target},
    {"総合評価", Key::Overall},
    {"総合判定", Key::Overall},
    {"総合", Key::Overall},
    {"判定", Key::Overall},
    {"内容", Key::Content},
    {"構成", Key::Structure},
    {"表現", Key::Language},
    {"言語", Key::Language},
    {"理由", Key::Rationale},
}};

bool istarts_with(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    const auto a = static_cast<unsigned char>(s[i]);
    const auto b = static_cast<unsigned char>(prefix[i]);
    if (std::tolower(a) != std::tolower(b)) return false;
  }
  return true;
}

std::string_view trim(std::string_view s) {
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  // U+3000 ideographic space
  while (s.size() >= 3 && s.substr(0, 3) == "\xE3\x80\x80") s.remove_prefix(3);
  while (s.size() >= 3 && s.substr(s.size() - 3) == "\xE3\x80\x80") s.remove_suffix(3);
  return s;
}

bool consume(std::string_view& s, std::string_view token) {
  if (s.substr(0, token.size()) == token) {
    s.remove_prefix(token.size());
    return true;
  }
  return false;
}

/// Strips list bullets, heading marks, emphasis and quotes around a line.
std::string_view strip_decoration(std::string_view s) {
  s = trim(s);
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::string_view mark : {"**", "__", "- ", "* ", "+ ", "> ", "#", "\"", "`", "・", "•"}) {
      if (consume(s, mark)) {
        s = trim(s);
        changed = true;
      }
    }
  }
  return s;
}

std::string_view strip_value(std::string_view v) {
  v = trim(v);
  bool changed = true;
  while (changed && !v.empty()) {
    changed = false;
    for (std::string_view mark : {"**", "__", "\"", "`", ",", ".", "。", "!", "*"}) {
      if (v.size() >= mark.size() && v.substr(v.size() - mark.size()) == mark) {
        v.remove_suffix(mark.size());
        v = trim(v);
        changed = true;
      }
      if (consume(v, mark)) {
        v = trim(v);
        changed = true;
      }
    }
  }
  return v;
}

struct KeyValue {
  Key key;
  std::string value;
};

std::optional<KeyValue> parse_line(std::string_view line) {
  auto s = strip_decoration(line);
  for (const auto& sp : kSpellings) {
    if (!istarts_with(s, sp.text)) continue;
    auto rest = s.substr(sp.text.size());
    // The key must end here: "contents" or "content_x" is not "content".
    if (!rest.empty() && (std::isalnum(static_cast<unsigned char>(rest.front())) || rest.front() == '_')) {
      continue;
    }
    rest = trim(rest);
    while (consume(rest, "**") || consume(rest, "__") || consume(rest, "\"")) rest = trim(rest);
    if (istarts_with(rest, "score")) rest = trim(rest.substr(5));
    consume(rest, "スコア");
    rest = trim(rest);
    // Optional parenthetical, e.g. "content (0-10): 7".
    for (auto [open, close] : {std::pair<std::string_view, std::string_view>{"(", ")"}, {"（", "）"}}) {
      if (consume(rest, open)) {
        const auto end = rest.find(close);
        if (end == std::string_view::npos) return std::nullopt;
        rest = trim(rest.substr(end + close.size()));
      }
    }
    while (consume(rest, "**") || consume(rest, "__") || consume(rest, "\"")) rest = trim(rest);
    if (!(consume(rest, ":") || consume(rest, "：") || consume(rest, "="))) return std::nullopt;
    return KeyValue{sp.key, std::string(strip_value(rest))};
  }
  return std::nullopt;
}

/// Fullwidth digits to ASCII.
std::string normalize_digits(std::string_view v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i + 2 < v.size() && static_cast<unsigned char>(v[i]) == 0xEF && static_cast<unsigned char>(v[i + 1]) == 0xBC &&
        static_cast<unsigned char>(v[i + 2]) >= 0x90 && static_cast<unsigned char>(v[i + 2]) <= 0x99) {
      out.push_back(static_cast<char>('0' + (static_cast<unsigned char>(v[i + 2]) - 0x90)));
      i += 2;
    } else {
      out.push_back(v[i]);
    }
  }
  return out;
}

bool looks_numeric(std::string_view v) {
  const auto n = normalize_digits(v);
  return !n.empty() && (std::isdigit(static_cast<unsigned char>(n[0])) ||
                        (n[0] == '-' && n.size() > 1 && std::isdigit(static_cast<unsigned char>(n[1]))));
}

int parse_score(Key key, const std::string& value, std::string_view raw) {
  const std::string field(key_name(key));
  const auto v = normalize_digits(value);
  std::size_t i = 0;
  bool negative = false;
  if (i < v.size() && v[i] == '-') {
    negative = true;
    ++i;
  }
  const auto digits_start = i;
  long whole = 0;
  while (i < v.size() && std::isdigit(static_cast<unsigned char>(v[i]))) {
    whole = std::min(whole * 10 + (v[i] - '0'), 1000000L);
    ++i;
  }
  if (i == digits_start) {
    throw ParseError(field, field + " is not an integer", std::string(raw));
  }
  if (i < v.size() && v[i] == '.') {
    ++i;
    bool fractional = false;
    while (i < v.size() && std::isdigit(static_cast<unsigned char>(v[i]))) {
      fractional |= v[i] != '0';
      ++i;
    }
    if (fractional) {
      throw ParseError(field, field + " is not an integer", std::string(raw));
    }
  }
  // Allowed suffixes: "/10", "点", "points", "pts" and trailing prose after whitespace.
  auto rest = trim(std::string_view(v).substr(i));
  if (!rest.empty()) {
    const bool ok = rest.front() == '/' || rest.front() == '(' || consume(rest, "点") || consume(rest, "（") ||
                    istarts_with(rest, "point") || istarts_with(rest, "pts") || v[i] == ' ';
    if (!ok) {
      throw ParseError(field, field + " is not an integer", std::string(raw));
    }
  }
  const long score = negative ? -whole : whole;
  if (score < 0 || score > 10) {
    throw ParseError(field, field + " out of range", std::string(raw));
  }
  return static_cast<int>(score);
}

Label parse_label(const std::string& value, const LabelVocabulary& vocab, std::string_view raw) {
  auto match = [&](std::string_view v) -> std::optional<Label> {
    if (std::find(vocab.high.begin(), vocab.high.end(), v) != vocab.high.end()) return Label::High;
    if (std::find(vocab.low.begin(), vocab.low.end(), v) != vocab.low.end()) return Label::Low;
    return std::nullopt;
  };
  if (auto l = match(value)) return *l;
  // First token, e.g. "High (convincing episodes)".
  std::string_view v = value;
  const auto cut = std::min({v.find(' '), v.find('('), v.find("（"), v.find(','), v.find("、")});
  if (cut != std::string_view::npos) {
    if (auto l = match(strip_value(v.substr(0, cut)))) return *l;
  }
  throw ParseError("overall", "overall has invalid label '" + value + "'", std::string(raw));
}

struct Fence {
  std::string tag;
  std::string body;
};

std::vector<Fence> find_fences(std::string_view raw) {
  std::vector<Fence> fences;
  std::istringstream in{std::string(raw)};
  std::optional<Fence> open;
  for (std::string line; std::getline(in, line);) {
    auto t = trim(line);
    if (t.substr(0, 3) == "```") {
      if (open) {
        fences.push_back(std::move(*open));
        open.reset();
      } else {
        open = Fence{std::string(trim(t.substr(3))), {}};
      }
      continue;
    }
    if (open) {
      open->body += line;
      open->body += '\n';
    }
  }
  if (open) fences.push_back(std::move(*open));  // unterminated fence
  return fences;
}

/// Raw key values found in a text region; first occurrence wins, a later
/// different value for the same key is a conflict.
struct Collected {
  std::map<Key, std::string> values;
  std::optional<ParseError> conflict;
};

Collected collect(std::string_view text, bool lenient, std::string_view raw) {
  Collected c;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    auto kv = parse_line(line);
    if (!kv) continue;
    const bool is_score = kv->key == Key::Content || kv->key == Key::Structure || kv->key == Key::Language ||
                          kv->key == Key::Target;
    // In prose, "Content: the applicant..." is commentary rather than a score.
    if (lenient && is_score && !looks_numeric(kv->value)) continue;
    if (lenient && kv->key == Key::Overall && kv->value.empty()) continue;
    auto [it, inserted] = c.values.emplace(kv->key, kv->value);
    if (!inserted && it->second != kv->value && kv->key != Key::Rationale && !c.conflict) {
      const std::string field(key_name(kv->key));
      c.conflict = ParseError(field, field + " has conflicting values", std::string(raw));
    }
  }
  return c;
}

bool complete(const Collected& c) {
  for (Key k : {Key::Content, Key::Structure, Key::Language, Key::Overall}) {
    if (!c.values.count(k)) return false;
  }
  return true;
}

VerdictFields build(const Collected& c, const LabelVocabulary& vocab, std::string_view raw) {
  if (c.conflict) throw *c.conflict;
  for (Key k : {Key::Content, Key::Structure, Key::Language, Key::Overall}) {
    if (!c.values.count(k)) {
      const std::string field(key_name(k));
      throw ParseError(field, "missing field " + field, std::string(raw));
    }
  }
  VerdictFields v;
  v.scores.content = parse_score(Key::Content, c.values.at(Key::Content), raw);
  v.scores.structure = parse_score(Key::Structure, c.values.at(Key::Structure), raw);
  v.scores.language = parse_score(Key::Language, c.values.at(Key::Language), raw);
  v.overall = parse_label(c.values.at(Key::Overall), vocab, raw);
  if (auto it = c.values.find(Key::Rationale); it != c.values.end() && !it->second.empty()) {
    v.rationale = it->second;
  }
  return v;
}

bool mentions_any_key(const Fence& f) {
  std::istringstream in(f.body);
  for (std::string line; std::getline(in, line);) {
    if (parse_line(line)) return true;
  }
  return false;
}

}  // namespace

std::string render_verdict_block(const VerdictFields& v, std::optional<int> target) {
  std::string out = "```" + std::string(kBlockTag) + "\n";
  if (target) out += "target: " + std::to_string(*target) + "\n";
  out += "content: " + std::to_string(v.scores.content) + "\n";
  out += "structure: " + std::to_string(v.scores.structure) + "\n";
  out += "language: " + std::to_string(v.scores.language) + "\n";
  out += "overall: " + std::string(to_string(v.overall)) + "\n";
  if (v.rationale) out += "rationale: " + *v.rationale + "\n";
  out += "```";
  return out;
}

std::string render_attributes_block(const ExampleAttributes& a) {
  std::string out = "```" + std::string(kBlockTag) + "\n";
  if (a.scores) {
    out += "content: " + std::to_string(a.scores->content) + "\n";
    out += "structure: " + std::to_string(a.scores->structure) + "\n";
    out += "language: " + std::to_string(a.scores->language) + "\n";
  }
  out += "overall: " + std::string(to_string(a.overall)) + "\n";
  out += "```";
  return out;
}

std::string answer_format_template(bool with_target) {
  std::string out = "```" + std::string(kBlockTag) + "\n";
  if (with_target) out += "target: <resume number>\n";
  out +=
      "content: <integer 0-10>\n"
      "structure: <integer 0-10>\n"
      "language: <integer 0-10>\n"
      "overall: <High|Low>\n"
      "rationale: <one line>\n"
      "```";
  return out;
}

VerdictFields parse_verdict(std::string_view raw, const LabelVocabulary& vocab) {
  const auto fences = find_fences(raw);
  const Fence* block = nullptr;
  for (const auto& f : fences) {
    if (f.tag == kBlockTag) {
      block = &f;
      break;
    }
  }
  if (!block) {
    for (const auto& f : fences) {
      if (mentions_any_key(f)) {
        block = &f;
        break;
      }
    }
  }

  if (block) {
    const auto strict = collect(block->body, false, raw);
    if (complete(strict) || strict.conflict) return build(strict, vocab, raw);
    const auto loose = collect(raw, true, raw);
    if (complete(loose) && !loose.conflict) return build(loose, vocab, raw);
    return build(strict, vocab, raw);
  }

  const auto loose = collect(raw, true, raw);
  if (loose.values.empty()) {
    throw ParseError("block", "no answer block found", std::string(raw));
  }
  return build(loose, vocab, raw);
}

std::vector<std::variant<VerdictFields, ParseError>> parse_packed_verdicts(std::string_view raw, std::size_t n_targets,
                                                                           const LabelVocabulary& vocab) {
  std::vector<std::optional<std::variant<VerdictFields, ParseError>>> slots(n_targets);
  for (const auto& f : find_fences(raw)) {
    auto c = collect(f.body, false, raw);
    auto t = c.values.find(Key::Target);
    if (t == c.values.end() || !looks_numeric(t->second)) continue;
    const auto slot = std::stoul(normalize_digits(t->second));
    if (slot < 1 || slot > n_targets || slots[slot - 1]) continue;
    try {
      slots[slot - 1] = build(c, vocab, f.body);
    } catch (const ParseError& e) {
      slots[slot - 1] = e;
    }
  }
  std::vector<std::variant<VerdictFields, ParseError>> out;
  out.reserve(n_targets);
  for (std::size_t i = 0; i < n_targets; ++i) {
    if (slots[i]) {
      out.push_back(std::move(*slots[i]));
    } else {
      out.emplace_back(ParseError("block", "no answer block for target " + std::to_string(i + 1), std::string(raw)));
    }
  }
  return out;
}

ExampleAttributes parse_example_attributes(std::string_view block, const LabelVocabulary& vocab) {
  const auto fences = find_fences(block);
  const std::string body = fences.empty() ? std::string(block) : fences.front().body;
  const auto c = collect(body, false, block);
  if (c.conflict) throw *c.conflict;
  auto overall = c.values.find(Key::Overall);
  if (overall == c.values.end()) {
    throw ParseError("overall", "missing field overall", std::string(block));
  }
  ExampleAttributes a;
  a.overall = parse_label(overall->second, vocab, block);
  const bool any_score = c.values.count(Key::Content) || c.values.count(Key::Structure) || c.values.count(Key::Language);
  if (any_score) {
    a.scores = build(c, vocab, block).scores;
  }
  return a;
}

}  // namespace resume_judge
