#pragma once

#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace las {

struct EncodingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Placeholder byte used for the unknown symbol inside normalized strings.
inline constexpr char kUnkChar = '\x01';

using TokenSequence = std::vector<int>;

/// The fixed character output space: a-z, 0-9, space, comma, period,
/// apostrophe, <unk>, plus the <sos>/<eos> delimiters. Immutable after
/// construction.
class Vocabulary {
 public:
  Vocabulary();

  int size() const { return static_cast<int>(symbols_.size()); }
  /// Legal output symbols: everything except <sos>.
  int output_size() const { return size() - 1; }

  int sos() const { return sos_; }
  int eos() const { return eos_; }
  int unk() const { return unk_; }
  int space() const { return space_; }

  const std::string& symbol(int index) const { return symbols_.at(index); }
  const std::vector<std::string>& symbols() const { return symbols_; }
  int index(const std::string& symbol) const;

  /// Maps a normalized character to its index. Throws EncodingError for
  /// characters outside the normalized domain.
  int char_index(char c) const;
  /// Inverse of char_index for non-delimiter symbols.
  char index_char(int index) const;

  /// (<sos>, c_1 ... c_n, <eos>) for normalized text.
  TokenSequence encode(const std::string& normalized) const;
  /// Strips delimiters and maps indices back to characters.
  std::string decode(const TokenSequence& tokens) const;

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> by_name_;
  int char_to_index_[256];
  int sos_, eos_, unk_, space_;
};

/// Lower-cases and restricts text to {a-z, 0-9, space, comma, period,
/// apostrophe}; every other Unicode codepoint becomes one <unk> placeholder.
/// Whitespace runs collapse to a single space; leading/trailing space is
/// stripped. Idempotent.
std::string normalize(const std::string& raw);

}  // namespace las
