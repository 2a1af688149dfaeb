#include "las/vocab.hpp"

#include <cctype>

namespace las {

Vocabulary::Vocabulary() {
  for (char c = 'a'; c <= 'z'; ++c) symbols_.emplace_back(1, c);
  for (char c = '0'; c <= '9'; ++c) symbols_.emplace_back(1, c);
  symbols_.emplace_back("<space>");
  symbols_.emplace_back("<comma>");
  symbols_.emplace_back("<period>");
  symbols_.emplace_back("<apostrophe>");
  symbols_.emplace_back("<unk>");
  // <sos> is input-only and deliberately last: the first output_size()
  // indices are exactly the legal outputs (including <eos>).
  symbols_.emplace_back("<eos>");
  symbols_.emplace_back("<sos>");
  for (int i = 0; i < size(); ++i) by_name_[symbols_[i]] = i;
  unk_ = by_name_["<unk>"];
  sos_ = by_name_["<sos>"];
  eos_ = by_name_["<eos>"];
  space_ = by_name_["<space>"];

  for (int& v : char_to_index_) v = -1;
  for (char c = 'a'; c <= 'z'; ++c)
    char_to_index_[static_cast<unsigned char>(c)] = c - 'a';
  for (char c = '0'; c <= '9'; ++c)
    char_to_index_[static_cast<unsigned char>(c)] = 26 + (c - '0');
  char_to_index_[static_cast<unsigned char>(' ')] = space_;
  char_to_index_[static_cast<unsigned char>(',')] = by_name_["<comma>"];
  char_to_index_[static_cast<unsigned char>('.')] = by_name_["<period>"];
  char_to_index_[static_cast<unsigned char>('\'')] = by_name_["<apostrophe>"];
  char_to_index_[static_cast<unsigned char>(kUnkChar)] = unk_;
}

int Vocabulary::index(const std::string& symbol) const {
  auto it = by_name_.find(symbol);
  if (it == by_name_.end())
    throw EncodingError("unknown symbol: " + symbol);
  return it->second;
}

int Vocabulary::char_index(char c) const {
  const int idx = char_to_index_[static_cast<unsigned char>(c)];
  if (idx < 0)
    throw EncodingError("character outside normalized domain: '" +
                        std::string(1, c) + "'");
  return idx;
}

char Vocabulary::index_char(int index) const {
  if (index < 0 || index >= size())
    throw EncodingError("token index out of range: " + std::to_string(index));
  if (index < 26) return static_cast<char>('a' + index);
  if (index < 36) return static_cast<char>('0' + (index - 26));
  if (index == space_) return ' ';
  const std::string& s = symbols_[index];
  if (s == "<comma>") return ',';
  if (s == "<period>") return '.';
  if (s == "<apostrophe>") return '\'';
  if (index == unk_) return kUnkChar;
  throw EncodingError("delimiter token has no character form: " + s);
}

TokenSequence Vocabulary::encode(const std::string& normalized) const {
  TokenSequence out;
  out.reserve(normalized.size() + 2);
  out.push_back(sos_);
  for (char c : normalized) out.push_back(char_index(c));
  out.push_back(eos_);
  return out;
}

std::string Vocabulary::decode(const TokenSequence& tokens) const {
  std::string out;
  out.reserve(tokens.size());
  for (int t : tokens) {
    if (t == sos_ || t == eos_) continue;
    out.push_back(index_char(t));
  }
  return out;
}

namespace {

bool keep_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == ',' ||
         c == '.' || c == '\'';
}

}  // namespace

std::string normalize(const std::string& raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  auto append = [&](char c) {
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  };
  for (std::size_t i = 0; i < raw.size();) {
    const unsigned char b = static_cast<unsigned char>(raw[i]);
    // One UTF-8 codepoint per step; continuation bytes belong to the lead.
    std::size_t len = 1;
    if (b >= 0xF0) len = 4;
    else if (b >= 0xE0) len = 3;
    else if (b >= 0xC0) len = 2;
    while (i + len > raw.size()) --len;
    if (len == 1 && b < 0x80) {
      const char c = static_cast<char>(std::tolower(b));
      if (std::isspace(b)) pending_space = true;
      else if (keep_char(c)) append(c);
      else append(kUnkChar);
    } else {
      append(kUnkChar);
    }
    i += len;
  }
  return out;
}

}  // namespace las
