#include "cyberroles/preprocess.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <sstream>

#include "cyberroles/error.hpp"

namespace cyberroles {

namespace {

bool is_ascii_alnum(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::isalnum(u);
}

bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::ispunct(u);
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (static_cast<unsigned char>(c) < 0x80)
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string without_punct(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s)
    if (!is_ascii_punct(c)) out += c;
  return out;
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (w.empty()) continue;
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::string decode_emoticons(std::string_view text,
                             const std::map<std::string, std::string>& table) {
  if (table.empty()) return std::string(text);
  std::size_t longest = 0;
  for (const auto& [k, v] : table) longest = std::max(longest, k.size());

  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    bool matched = false;
    for (std::size_t len = std::min(longest, text.size() - i); len > 0; --len) {
      auto it = table.find(std::string(text.substr(i, len)));
      if (it == table.end()) continue;
      const std::string& key = it->first;
      if (is_ascii_alnum(key.front()) && i > 0 && is_ascii_alnum(text[i - 1])) continue;
      if (is_ascii_alnum(key.back()) && i + len < text.size() &&
          is_ascii_alnum(text[i + len]))
        continue;
      out += ' ';
      out += it->second;
      out += ' ';
      i += len;
      matched = true;
      break;
    }
    if (!matched) out += text[i++];
  }
  return out;
}

const std::string* lookup_slang(const std::string& token,
                                const std::map<std::string, std::string>& table,
                                bool strip_punctuation, std::string& prefix,
                                std::string& suffix) {
  prefix.clear();
  suffix.clear();
  const std::string key = ascii_lower(token);
  if (auto it = table.find(key); it != table.end()) return &it->second;
  if (strip_punctuation) {
    if (auto it = table.find(without_punct(key)); it != table.end()) return &it->second;
    return nullptr;
  }
  std::size_t b = 0, e = key.size();
  while (b < e && is_ascii_punct(key[b])) ++b;
  while (e > b && is_ascii_punct(key[e - 1])) --e;
  if (b == 0 && e == key.size()) return nullptr;
  auto it = table.find(key.substr(b, e - b));
  if (it == table.end()) return nullptr;
  prefix = token.substr(0, b);
  suffix = token.substr(e);
  return &it->second;
}

void validate_utf8(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xe ? 3
                                   : (c >> 3) == 0x1e ? 4 : 0;
    if (len == 0 || i + len > text.size())
      throw EncodingError("invalid UTF-8 in text '" + std::string(text) + "'");
    for (std::size_t k = 1; k < len; ++k)
      if ((static_cast<unsigned char>(text[i + k]) >> 6) != 0x2)
        throw EncodingError("invalid UTF-8 in text '" + std::string(text) + "'");
    i += len;
  }
}

std::string_view utf8_prefix(std::string_view text, std::size_t code_points) {
  std::size_t i = 0, n = 0;
  while (i < text.size() && n < code_points) {
    ++i;
    while (i < text.size() && (static_cast<unsigned char>(text[i]) >> 6) == 0x2) ++i;
    ++n;
  }
  return text.substr(0, i);
}

}  // namespace

std::size_t utf8_length(std::string_view text) {
  std::size_t n = 0;
  for (char c : text)
    if ((static_cast<unsigned char>(c) >> 6) != 0x2) ++n;
  return n;
}

// ---------------------------------------------------------------------------

void NormalizationTable::validate() const {
  for (const auto& [k, v] : slang_map) {
    if (k.empty()) throw ValidationError("slang table has an empty key");
    if (k != ascii_lower(k))
      throw ValidationError("slang key '" + k + "' must be lowercase");
  }
  auto reintroduces_slang = [&](const std::string& replacement) -> std::string {
    for (const auto& w : split_ws(replacement)) {
      const auto lw = ascii_lower(w);
      if (slang_map.count(lw)) return lw;
      if (slang_map.count(without_punct(lw))) return without_punct(lw);
    }
    return {};
  };
  for (const auto& [k, v] : slang_map)
    if (auto hit = reintroduces_slang(v); !hit.empty())
      throw ValidationError("slang replacement for '" + k +
                            "' contains slang key '" + hit + "'");
  for (const auto& [k, v] : emoticon_map) {
    if (k.empty()) throw ValidationError("emoticon table has an empty key");
    if (std::all_of(k.begin(), k.end(), [](char c) {
          return is_ascii_alnum(c) && !std::isupper(static_cast<unsigned char>(c));
        }))
      throw ValidationError("emoticon key '" + k +
                            "' is plain lowercase text; put it in the slang table");
    for (const auto& [other, unused] : emoticon_map)
      if (v.find(other) != std::string::npos)
        throw ValidationError("emoticon word form for '" + k +
                              "' contains emoticon '" + other + "'");
    if (auto hit = reintroduces_slang(v); !hit.empty())
      throw ValidationError("emoticon word form for '" + k +
                            "' contains slang key '" + hit + "'");
  }
}

std::map<std::string, std::string> read_tsv_table(std::istream& in) {
  std::map<std::string, std::string> table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw ParseError("table line " + std::to_string(lineno) +
                       ": expected 'key<TAB>value'");
    table[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return table;
}

NormalizationTable NormalizationTable::load(const std::string& slang_path,
                                            const std::string& emoticon_path) {
  auto read = [](const std::string& path) -> std::map<std::string, std::string> {
    if (path.empty()) return {};
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open table '" + path + "'");
    try {
      return read_tsv_table(in);
    } catch (const ParseError& e) {
      throw ParseError(path + ": " + e.what());
    }
  };
  NormalizationTable t;
  for (auto& [k, v] : read(slang_path)) t.slang_map[ascii_lower(k)] = v;
  t.emoticon_map = read(emoticon_path);
  t.validate();
  return t;
}

NormalizationTable NormalizationTable::load_default() {
  const std::string dir = CYBERROLES_DATA_DIR;
  return load(dir + "/slang.tsv", dir + "/emoticons.tsv");
}

nlohmann::json NormalizationTable::to_json() const {
  return {{"slang", slang_map}, {"emoticons", emoticon_map}};
}

NormalizationTable NormalizationTable::from_json(const nlohmann::json& j) {
  NormalizationTable t;
  t.slang_map = j.at("slang").get<std::map<std::string, std::string>>();
  t.emoticon_map = j.at("emoticons").get<std::map<std::string, std::string>>();
  t.validate();
  return t;
}

void PreprocessConfig::validate() const {
  if (max_sequence_length < 3)
    throw ArgumentError("max_sequence_length must be at least 3");
}

nlohmann::json PreprocessConfig::to_json() const {
  return {{"lowercase", lowercase},
          {"strip_punctuation", strip_punctuation},
          {"apply_slang", apply_slang},
          {"apply_emoticons", apply_emoticons},
          {"max_sequence_length", max_sequence_length},
          {"length_unit", length_unit == LengthUnit::Tokens ? "tokens" : "characters"}};
}

PreprocessConfig PreprocessConfig::from_json(const nlohmann::json& j) {
  PreprocessConfig c;
  c.lowercase = j.value("lowercase", c.lowercase);
  c.strip_punctuation = j.value("strip_punctuation", c.strip_punctuation);
  c.apply_slang = j.value("apply_slang", c.apply_slang);
  c.apply_emoticons = j.value("apply_emoticons", c.apply_emoticons);
  c.max_sequence_length = j.value("max_sequence_length", c.max_sequence_length);
  const auto unit = j.value("length_unit", std::string("tokens"));
  if (unit == "tokens")
    c.length_unit = LengthUnit::Tokens;
  else if (unit == "characters")
    c.length_unit = LengthUnit::Characters;
  else
    throw ArgumentError("length_unit must be 'tokens' or 'characters'");
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

std::string normalize_text(std::string_view text, const NormalizationTable& table,
                           const PreprocessConfig& config) {
  std::string current = config.apply_emoticons
                            ? decode_emoticons(text, table.emoticon_map)
                            : std::string(text);

  std::vector<std::string> words = split_ws(current);
  if (config.apply_slang && !table.slang_map.empty()) {
    std::string prefix, suffix;
    for (auto& w : words) {
      if (const auto* rep = lookup_slang(w, table.slang_map, config.strip_punctuation,
                                         prefix, suffix))
        w = prefix + *rep + suffix;
    }
  }
  for (auto& w : words) {
    if (config.lowercase) w = ascii_lower(w);
    if (config.strip_punctuation) w = without_punct(w);
  }
  // Replacements may contain spaces; re-split so whitespace stays canonical.
  return join(split_ws(join(words)));
}

TokenSequence BasicTokenizer::tokenize(std::string_view text) const {
  validate_utf8(text);
  TokenSequence out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char c : text) {
    if (is_space(c)) {
      flush();
    } else if (is_ascii_punct(c)) {
      flush();
      out.emplace_back(1, c);
    } else {
      cur += c;
    }
  }
  flush();
  return out;
}

TokenSequence prepare_sequence(std::string_view text, const Tokenizer& tokenizer,
                               const PreprocessConfig& config) {
  config.validate();
  if (config.length_unit == LengthUnit::Characters)
    text = utf8_prefix(text, config.max_sequence_length);

  TokenSequence tokens;
  try {
    tokens = tokenizer.tokenize(text);
  } catch (const EncodingError&) {
    throw;
  } catch (const std::exception& e) {
    throw EncodingError("tokenizer failed on '" + std::string(text) + "': " + e.what());
  }
  const std::size_t budget = config.max_sequence_length - 2;
  if (tokens.size() > budget) tokens.resize(budget);

  TokenSequence seq;
  seq.reserve(tokens.size() + 2);
  seq.emplace_back(kStartMarker);
  for (auto& t : tokens) seq.push_back(std::move(t));
  seq.emplace_back(kSeparatorMarker);
  return seq;
}

std::vector<std::string> strip_markers(const TokenSequence& sequence) {
  std::vector<std::string> out;
  for (const auto& t : sequence)
    if (t != kStartMarker && t != kSeparatorMarker) out.push_back(t);
  return out;
}

Preprocessor::Preprocessor(NormalizationTable table, PreprocessConfig config,
                           std::shared_ptr<const Tokenizer> tokenizer)
    : table_(std::move(table)), config_(config), tokenizer_(std::move(tokenizer)) {
  config_.validate();
  table_.validate();
  if (!tokenizer_) throw ConfigurationError("preprocessor requires a tokenizer");
}

std::string Preprocessor::normalize(std::string_view text) const {
  return normalize_text(text, table_, config_);
}

TokenSequence Preprocessor::operator()(std::string_view raw_text) const {
  return prepare_sequence(normalize(raw_text), *tokenizer_, config_);
}

}  // namespace cyberroles
