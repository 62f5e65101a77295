#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lacuna/corpus.hpp"
#include "lacuna/digest.hpp"
#include "lacuna/error.hpp"
#include "lacuna/utf8.hpp"

namespace lacuna {

using TokenId = std::int32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr TokenId kMask = 2;
inline constexpr TokenId kFirstSymbol = 3;

inline constexpr std::string_view kPadTag = "<pad>";
inline constexpr std::string_view kUnkTag = "<unk>";
inline constexpr std::string_view kMaskTag = "<mask>";

/// Character inventory. Ids 0-2 are the reserved specials; every other id is
/// a single lowercased Unicode scalar.
class Vocabulary {
 public:
  Vocabulary() = default;

  explicit Vocabulary(std::vector<char32_t> chars) : chars_(std::move(chars)) {
    for (std::size_t i = 0; i < chars_.size(); ++i) {
      const auto [it, inserted] = index_.emplace(chars_[i], static_cast<TokenId>(i) + kFirstSymbol);
      if (!inserted) throw Error(ErrorCode::BadFormat, "duplicate vocabulary symbol");
    }
  }

  std::size_t size() const { return chars_.size() + kFirstSymbol; }
  std::size_t symbol_count() const { return chars_.size(); }

  bool contains(char32_t ch) const { return index_.count(ch) != 0; }

  TokenId id(char32_t ch) const {
    const auto it = index_.find(ch);
    return it == index_.end() ? kUnk : it->second;
  }

  char32_t character(TokenId id) const {
    if (id < kFirstSymbol || static_cast<std::size_t>(id) >= size()) return 0;
    return chars_[static_cast<std::size_t>(id - kFirstSymbol)];
  }

  std::string symbol(TokenId id) const {
    switch (id) {
      case kPad: return std::string(kPadTag);
      case kUnk: return std::string(kUnkTag);
      case kMask: return std::string(kMaskTag);
      default:
        if (id < 0 || static_cast<std::size_t>(id) >= size()) throw Error(ErrorCode::IndexOutOfVocab, "token id out of range");
        return utf8::encode(character(id));
    }
  }

  std::vector<TokenId> encode(std::u32string_view text) const {
    std::vector<TokenId> out;
    out.reserve(text.size());
    for (char32_t ch : text) out.push_back(id(ch));
    return out;
  }

  std::vector<TokenId> encode(std::string_view utf8_text) const { return encode(utf8::decode(utf8_text)); }

  std::string decode(const std::vector<TokenId>& ids) const {
    std::string out;
    for (TokenId id : ids) out += symbol(id);
    return out;
  }

  /// One symbol per line, line number = id.
  std::string file_text() const {
    std::string out;
    out += std::string(kPadTag) + "\n" + std::string(kUnkTag) + "\n" + std::string(kMaskTag) + "\n";
    for (char32_t ch : chars_) out += utf8::encode(ch) + "\n";
    return out;
  }

  std::string digest() const { return digest_hex(file_text()); }

  const std::vector<char32_t>& characters() const { return chars_; }

  bool operator==(const Vocabulary& other) const { return chars_ == other.chars_; }

  static Vocabulary parse(std::string_view text) {
    std::vector<char32_t> chars;
    std::size_t pos = 0, lineno = 0;
    while (pos < text.size()) {
      const auto nl = text.find('\n', pos);
      if (nl == std::string_view::npos) throw Error(ErrorCode::BadFormat, "vocabulary file must end with a newline");
      const std::string_view line = text.substr(pos, nl - pos);
      pos = nl + 1;
      ++lineno;
      if (lineno == 1 && line == kPadTag) continue;
      if (lineno == 2 && line == kUnkTag) continue;
      if (lineno == 3 && line == kMaskTag) continue;
      if (lineno <= 3) throw Error(ErrorCode::BadFormat, "vocabulary must start with <pad>, <unk>, <mask>");
      const auto cps = utf8::decode(line);
      if (cps.size() != 1) throw Error(ErrorCode::BadFormat, "vocabulary line " + std::to_string(lineno) + " is not one character");
      chars.push_back(cps[0]);
    }
    if (lineno < 3) throw Error(ErrorCode::BadFormat, "vocabulary is missing its special symbols");
    return Vocabulary(std::move(chars));
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << file_text();
  }

  static Vocabulary load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::string data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return parse(data);
  }

 private:
  std::vector<char32_t> chars_;
  std::unordered_map<char32_t, TokenId> index_;
};

/// Distinct characters of the training split, most frequent first, ties by
/// codepoint. Reconstructed lacuna text is counted as well if present.
inline Vocabulary build_vocab(const std::vector<Sentence>& train) {
  if (train.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot build a vocabulary from an empty split");
  std::unordered_map<char32_t, std::size_t> counts;
  for (const auto& s : train) {
    for (const auto& slot : slots(s)) {
      if (slot.kind != SlotKind::Gap) ++counts[slot.ch];
    }
  }
  std::vector<std::pair<char32_t, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<char32_t> chars;
  chars.reserve(ranked.size());
  for (const auto& [ch, n] : ranked) chars.push_back(ch);
  return Vocabulary(std::move(chars));
}

}  // namespace lacuna
