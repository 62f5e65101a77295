#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lacuna/digest.hpp"
#include "lacuna/error.hpp"
#include "lacuna/random.hpp"
#include "lacuna/utf8.hpp"

namespace lacuna {

enum class SegmentKind { Visible, BlankLacuna, ReconstructedLacuna, DamagedVisible };

/// One run of a parsed manuscript line. `text` is the normalized reading
/// (lowercased, underdots stripped; empty for blank lacunae), `source` the
/// exact bytes it was parsed from.
struct Segment {
  SegmentKind kind = SegmentKind::Visible;
  std::string text;
  std::size_t length = 0;
  std::string source;

  bool operator==(const Segment&) const = default;
};

struct Sentence {
  std::string id;
  std::vector<Segment> segments;
  std::string source_file;

  /// Byte-exact reproduction of the parsed line.
  std::string serialize() const {
    std::string out;
    for (const auto& seg : segments) out += seg.source;
    return out;
  }

  /// Normalized markup: lowercased, underdots dropped, `[...]` / `[abc]`.
  std::string normalized() const {
    std::string out;
    for (const auto& seg : segments) {
      switch (seg.kind) {
        case SegmentKind::BlankLacuna: out += "[" + std::string(seg.length, '.') + "]"; break;
        case SegmentKind::ReconstructedLacuna: out += "[" + seg.text + "]"; break;
        default: out += seg.text;
      }
    }
    return out;
  }

  std::size_t length() const {
    std::size_t n = 0;
    for (const auto& seg : segments) n += seg.length;
    return n;
  }
};

enum class SentenceClass { Complete, ReconstructedOnly, HasBlank };

namespace detail {

inline bool is_combining(char32_t cp) {
  return (cp >= 0x0300 && cp <= 0x036F) || (cp >= 0xFE20 && cp <= 0xFE2F);
}

struct Scalar {
  char32_t cp;
  std::size_t begin;
  std::size_t end;
};

inline std::vector<Scalar> scan(std::string_view raw) {
  std::vector<Scalar> out;
  std::size_t pos = 0;
  while (pos < raw.size()) {
    const std::size_t begin = pos;
    const char32_t cp = utf8::next(raw, pos);
    out.push_back({cp, begin, pos});
  }
  return out;
}

}  // namespace detail

/// Parses one line of Leiden-style markup. `[..]` is a blank lacuna with one
/// dot per missing character, `[abc]` an editorial reconstruction, and a
/// letter followed by U+0323 a damaged but legible character.
inline Sentence parse_line(std::string_view raw) {
  const auto scalars = detail::scan(raw);
  Sentence sentence;
  auto& segs = sentence.segments;

  auto push = [&](SegmentKind kind, std::string text, std::size_t length, std::size_t b, std::size_t e) {
    std::string source(raw.substr(b, e - b));
    if (kind == SegmentKind::Visible && !segs.empty() && segs.back().kind == SegmentKind::Visible) {
      segs.back().text += text;
      segs.back().length += length;
      segs.back().source += source;
      return;
    }
    segs.push_back({kind, std::move(text), length, std::move(source)});
  };

  std::size_t i = 0;
  while (i < scalars.size()) {
    const char32_t cp = scalars[i].cp;
    if (cp == U']') throw Error(ErrorCode::UnbalancedBrackets, "closing bracket without opening bracket");
    if (cp == U'[') {
      std::size_t j = i + 1;
      while (j < scalars.size() && scalars[j].cp != U']') {
        if (scalars[j].cp == U'[') throw Error(ErrorCode::UnbalancedBrackets, "nested opening bracket");
        ++j;
      }
      if (j == scalars.size()) throw Error(ErrorCode::UnbalancedBrackets, "unclosed bracket");
      if (j == i + 1) throw Error(ErrorCode::EmptyBrackets, "empty brackets");
      std::size_t dots = 0;
      for (std::size_t k = i + 1; k < j; ++k) dots += scalars[k].cp == U'.';
      const std::size_t inner = j - i - 1;
      if (dots == inner) {
        push(SegmentKind::BlankLacuna, "", dots, scalars[i].begin, scalars[j].end);
      } else if (dots > 0) {
        throw Error(ErrorCode::MixedBracketContent, "brackets mix dots and letters");
      } else {
        std::string text;
        std::size_t len = 0;
        for (std::size_t k = i + 1; k < j; ++k) {
          if (scalars[k].cp == utf8::kCombiningDotBelow) continue;
          utf8::append(text, utf8::to_lower(scalars[k].cp));
          ++len;
        }
        if (len == 0) throw Error(ErrorCode::EmptyBrackets, "brackets hold no characters");
        push(SegmentKind::ReconstructedLacuna, std::move(text), len, scalars[i].begin, scalars[j].end);
      }
      i = j + 1;
      continue;
    }
    // A base character plus any combining marks, possibly carrying a dot below.
    std::size_t j = i + 1;
    bool damaged = false;
    while (j < scalars.size() && detail::is_combining(scalars[j].cp)) {
      damaged |= scalars[j].cp == utf8::kCombiningDotBelow;
      ++j;
    }
    if (detail::is_combining(cp)) {
      // Stray mark at the start of a line: keep it as an ordinary character.
      j = i + 1;
      damaged = false;
    }
    if (damaged) {
      push(SegmentKind::DamagedVisible, utf8::encode(utf8::to_lower(cp)), 1, scalars[i].begin, scalars[j - 1].end);
    } else {
      std::string text;
      for (std::size_t k = i; k < j; ++k) utf8::append(text, utf8::to_lower(scalars[k].cp));
      push(SegmentKind::Visible, std::move(text), j - i, scalars[i].begin, scalars[j - 1].end);
    }
    i = j;
  }
  return sentence;
}

inline SentenceClass classify(const Sentence& s) {
  bool blank = false, reconstructed = false;
  for (const auto& seg : s.segments) {
    blank |= seg.kind == SegmentKind::BlankLacuna;
    reconstructed |= seg.kind == SegmentKind::ReconstructedLacuna;
  }
  if (blank) return SentenceClass::HasBlank;
  return reconstructed ? SentenceClass::ReconstructedOnly : SentenceClass::Complete;
}

enum class SlotKind { Visible, Gap, Reconstructed };

/// One character position of a sentence as the model sees it.
struct Slot {
  SlotKind kind;
  char32_t ch;  // 0 for gaps
};

inline std::vector<Slot> slots(const Sentence& s) {
  std::vector<Slot> out;
  for (const auto& seg : s.segments) {
    if (seg.kind == SegmentKind::BlankLacuna) {
      out.insert(out.end(), seg.length, Slot{SlotKind::Gap, 0});
      continue;
    }
    const SlotKind kind = seg.kind == SegmentKind::ReconstructedLacuna ? SlotKind::Reconstructed : SlotKind::Visible;
    for (char32_t cp : utf8::decode(seg.text)) out.push_back({kind, cp});
  }
  return out;
}

/// Plain character string of a sentence without lacunae.
inline std::u32string characters(const Sentence& s) {
  std::u32string out;
  for (const auto& slot : slots(s)) out.push_back(slot.ch);
  return out;
}

struct LoadedCorpus {
  std::vector<Sentence> sentences;
  std::vector<std::string> warnings;
};

/// Reads one sentence-per-line file. Parse failures are rethrown prefixed
/// with `file:line`.
inline void load_file(const std::filesystem::path& path, const std::string& id_prefix, LoadedCorpus& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      out.warnings.push_back(path.string() + ":" + std::to_string(lineno) + ": empty line skipped");
      continue;
    }
    try {
      Sentence s = parse_line(line);
      s.id = id_prefix + ":" + std::to_string(lineno);
      s.source_file = path.string();
      out.sentences.push_back(std::move(s));
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

/// Loads every `.txt` file under `dir` in sorted path order.
inline LoadedCorpus load_corpus(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, "corpus directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::EmptyCorpus, "no .txt files under " + dir.string());
  LoadedCorpus out;
  for (const auto& f : files) load_file(f, fs::relative(f, dir).generic_string(), out);
  return out;
}

struct CorpusPartition {
  std::vector<std::string> train;
  std::vector<std::string> dev;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
  std::string manifest_hash;

  /// `<split>\t<sentence-id>` lines; the hash is taken over exactly this text.
  std::string manifest_text() const {
    std::string out;
    for (const auto& id : train) out += "train\t" + id + "\n";
    for (const auto& id : dev) out += "dev\t" + id + "\n";
    for (const auto& id : test) out += "test\t" + id + "\n";
    return out;
  }
};

/// Seeded shuffle then a 90:5:5 split (dev and test each round(n/20)).
inline CorpusPartition make_partition(const std::vector<Sentence>& complete, std::uint64_t seed) {
  if (complete.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot partition an empty corpus");
  std::vector<std::string> ids;
  ids.reserve(complete.size());
  for (const auto& s : complete) ids.push_back(s.id);
  Rng rng(seed);
  for (std::size_t i = ids.size() - 1; i > 0; --i) std::swap(ids[i], ids[rng.below(i + 1)]);

  const std::size_t n = ids.size();
  const auto held_out = static_cast<std::size_t>(std::llround(static_cast<double>(n) * 0.05));
  const std::size_t n_train = n - 2 * held_out;
  CorpusPartition p;
  p.seed = seed;
  p.train.assign(ids.begin(), ids.begin() + n_train);
  p.dev.assign(ids.begin() + n_train, ids.begin() + n_train + held_out);
  p.test.assign(ids.begin() + n_train + held_out, ids.end());
  p.manifest_hash = digest_hex(p.manifest_text());
  return p;
}

inline void write_partition_manifest(const std::filesystem::path& path, const CorpusPartition& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << p.manifest_text();
}

inline CorpusPartition read_partition_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  CorpusPartition p;
  std::string line;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error(ErrorCode::BadFormat, "bad partition line: " + line);
    const std::string split = line.substr(0, tab);
    std::string id = line.substr(tab + 1);
    if (split == "train") p.train.push_back(std::move(id));
    else if (split == "dev") p.dev.push_back(std::move(id));
    else if (split == "test") p.test.push_back(std::move(id));
    else throw Error(ErrorCode::BadFormat, "unknown split: " + split);
  }
  p.manifest_hash = digest_hex(p.manifest_text());
  return p;
}

/// Sentences named by `ids`, in that order.
inline std::vector<Sentence> select_sentences(const std::vector<Sentence>& sentences, const std::vector<std::string>& ids) {
  std::unordered_map<std::string_view, const Sentence*> by_id;
  for (const auto& s : sentences) by_id.emplace(s.id, &s);
  std::vector<Sentence> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(ErrorCode::BadFormat, "partition names unknown sentence " + id);
    out.push_back(*it->second);
  }
  return out;
}

struct StatsReport {
  std::size_t sentences = 0;
  std::size_t characters = 0;
  std::size_t min_length = 0;
  double mean_length = 0.0;
  std::size_t max_length = 0;
  std::size_t lacunae = 0;
  std::size_t missing_characters = 0;
  std::size_t blank_missing = 0;
  std::size_t reconstructed_missing = 0;
  std::map<std::size_t, std::size_t> gap_histogram;

  double mean_gap_length() const {
    return lacunae == 0 ? 0.0 : static_cast<double>(missing_characters) / static_cast<double>(lacunae);
  }
};

inline StatsReport corpus_stats(const std::vector<Sentence>& sentences) {
  StatsReport r;
  if (sentences.empty()) return r;
  r.sentences = sentences.size();
  r.min_length = SIZE_MAX;
  for (const auto& s : sentences) {
    const std::size_t len = s.length();
    r.characters += len;
    r.min_length = std::min(r.min_length, len);
    r.max_length = std::max(r.max_length, len);
    for (const auto& seg : s.segments) {
      if (seg.kind != SegmentKind::BlankLacuna && seg.kind != SegmentKind::ReconstructedLacuna) continue;
      ++r.lacunae;
      r.missing_characters += seg.length;
      (seg.kind == SegmentKind::BlankLacuna ? r.blank_missing : r.reconstructed_missing) += seg.length;
      ++r.gap_histogram[seg.length];
    }
  }
  r.mean_length = static_cast<double>(r.characters) / static_cast<double>(r.sentences);
  return r;
}

}  // namespace lacuna
