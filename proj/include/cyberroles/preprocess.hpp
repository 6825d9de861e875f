#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace cyberroles {

/// Lookup tables for text normalization.
///
/// Slang keys are matched per whitespace-delimited token, case-insensitively
/// (keys are stored lowercase). Emoticon keys are matched as case-sensitive
/// substrings; a key that starts or ends with an ASCII letter or digit only
/// matches where that end touches a non-alphanumeric neighbour, so "XD" is
/// not decoded inside "boXDrop".
struct NormalizationTable {
  std::map<std::string, std::string> slang_map;
  std::map<std::string, std::string> emoticon_map;

  /// Throws ValidationError if a key is empty, an emoticon key is plain
  /// lowercase alphanumerics, or a replacement reintroduces a key (the
  /// tables must be applicable in a single pass).
  void validate() const;

  /// Both files are UTF-8 TSV (`key<TAB>value`); '#' starts a comment line.
  /// Empty paths load empty tables.
  static NormalizationTable load(const std::string& slang_path,
                                 const std::string& emoticon_path);
  /// The tables shipped in data/.
  static NormalizationTable load_default();

  nlohmann::json to_json() const;
  static NormalizationTable from_json(const nlohmann::json& j);
};

/// Parses `key<TAB>value` lines. Throws ParseError with the line number.
std::map<std::string, std::string> read_tsv_table(std::istream& in);

enum class LengthUnit { Tokens, Characters };

struct PreprocessConfig {
  bool lowercase = true;
  bool strip_punctuation = true;
  bool apply_slang = true;
  bool apply_emoticons = true;
  /// Upper bound on the marker-delimited sequence. With
  /// LengthUnit::Characters the normalized text is additionally cut to this
  /// many code points before tokenization.
  std::size_t max_sequence_length = 256;
  LengthUnit length_unit = LengthUnit::Tokens;

  /// Throws ArgumentError when max_sequence_length < 3.
  void validate() const;

  nlohmann::json to_json() const;
  static PreprocessConfig from_json(const nlohmann::json& j);
};

/// Emoticon decoding, slang replacement, lowercasing, then punctuation
/// stripping, each step gated by the config. Whitespace runs collapse to a
/// single space and the result is trimmed. Only ASCII is case-folded or
/// stripped; other bytes pass through.
///
/// With stripping enabled the slang lookup key is the token with its
/// punctuation removed ("U." and "u" both match "u"), which keeps the
/// function idempotent.
std::string normalize_text(std::string_view text, const NormalizationTable& table,
                           const PreprocessConfig& config);

using TokenSequence = std::vector<std::string>;

inline constexpr std::string_view kStartMarker = "[CLS]";
inline constexpr std::string_view kSeparatorMarker = "[SEP]";

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual TokenSequence tokenize(std::string_view text) const = 0;
};

/// Splits on whitespace and emits every ASCII punctuation character as its
/// own token. Rejects invalid UTF-8 with EncodingError.
class BasicTokenizer final : public Tokenizer {
 public:
  TokenSequence tokenize(std::string_view text) const override;
};

/// [CLS] + tokens + [SEP], right-truncating tokens so the whole sequence
/// fits max_sequence_length. The markers are always kept.
TokenSequence prepare_sequence(std::string_view text, const Tokenizer& tokenizer,
                               const PreprocessConfig& config);

/// The subword tokens of a prepared sequence, without the two markers.
std::vector<std::string> strip_markers(const TokenSequence& sequence);

/// Number of UTF-8 code points; invalid bytes count as one each.
std::size_t utf8_length(std::string_view text);

/// Normalization tables, settings and a tokenizer bundled for reuse over a
/// whole corpus.
class Preprocessor {
 public:
  Preprocessor(NormalizationTable table, PreprocessConfig config,
               std::shared_ptr<const Tokenizer> tokenizer);

  std::string normalize(std::string_view text) const;
  TokenSequence operator()(std::string_view raw_text) const;

  const NormalizationTable& table() const { return table_; }
  const PreprocessConfig& config() const { return config_; }
  const Tokenizer& tokenizer() const { return *tokenizer_; }

 private:
  NormalizationTable table_;
  PreprocessConfig config_;
  std::shared_ptr<const Tokenizer> tokenizer_;
};

}  // namespace cyberroles
