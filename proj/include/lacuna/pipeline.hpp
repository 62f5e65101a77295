#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lacuna/corpus.hpp"
#include "lacuna/digest.hpp"
#include "lacuna/error.hpp"
#include "lacuna/eval.hpp"
#include "lacuna/masking.hpp"
#include "lacuna/random.hpp"
#include "lacuna/vocab.hpp"

namespace lacuna {

/// Seed streams derived from the prepare seed for the persisted test masks.
inline constexpr std::uint64_t kRandomTestStream = 101;
inline constexpr std::uint64_t kSmartTestStream = 102;

/// Everything `prepare` derives from a corpus directory.
struct PreparedCorpus {
  LoadedCorpus loaded;
  std::vector<Sentence> complete;
  std::vector<Sentence> gold;    // reconstructed lacunae only
  std::vector<Sentence> target;  // at least one blank lacuna
  CorpusPartition partition;
  std::vector<Sentence> train, dev, test;
  Vocabulary vocab;
  std::vector<MaskedItem> test_random, test_smart, gold_set;
  std::uint64_t seed = 0;
};

inline PreparedCorpus prepare_corpus(const std::filesystem::path& corpus_dir, std::uint64_t seed) {
  PreparedCorpus p;
  p.seed = seed;
  p.loaded = load_corpus(corpus_dir);
  for (const auto& s : p.loaded.sentences) {
    switch (classify(s)) {
      case SentenceClass::Complete: p.complete.push_back(s); break;
      case SentenceClass::ReconstructedOnly: p.gold.push_back(s); break;
      case SentenceClass::HasBlank: p.target.push_back(s); break;
    }
  }
  p.partition = make_partition(p.complete, seed);
  p.train = select_sentences(p.complete, p.partition.train);
  p.dev = select_sentences(p.complete, p.partition.dev);
  p.test = select_sentences(p.complete, p.partition.test);
  p.vocab = build_vocab(p.train);
  p.test_random = mask_sentences(p.test, MaskDistribution::Random, derive_seed(seed, kRandomTestStream), p.vocab);
  p.test_smart = mask_sentences(p.test, MaskDistribution::Smart, derive_seed(seed, kSmartTestStream), p.vocab);
  p.gold_set = gold_items(p.gold);
  return p;
}

inline nlohmann::ordered_json stats_json(const StatsReport& r) {
  nlohmann::ordered_json hist = nlohmann::ordered_json::object();
  for (const auto& [len, n] : r.gap_histogram) hist[std::to_string(len)] = n;
  return {{"sentences", r.sentences},
          {"characters", r.characters},
          {"min_length", r.min_length},
          {"mean_length", r.mean_length},
          {"max_length", r.max_length},
          {"lacunae", r.lacunae},
          {"missing_characters", r.missing_characters},
          {"blank_missing", r.blank_missing},
          {"reconstructed_missing", r.reconstructed_missing},
          {"mean_gap_length", r.mean_gap_length()},
          {"gap_histogram", hist}};
}

inline nlohmann::ordered_json prepared_stats(const PreparedCorpus& p) {
  return {{"all", stats_json(corpus_stats(p.loaded.sentences))},
          {"complete", stats_json(corpus_stats(p.complete))},
          {"gold", stats_json(corpus_stats(p.gold))},
          {"target", stats_json(corpus_stats(p.target))},
          {"train", stats_json(corpus_stats(p.train))},
          {"dev", stats_json(corpus_stats(p.dev))},
          {"test", stats_json(corpus_stats(p.test))},
          {"vocab_size", p.vocab.size()},
          {"warnings", p.loaded.warnings.size()}};
}

/// Source lines of `sentences`, one per line, as they appeared in the corpus.
inline std::string sentence_lines(const std::vector<Sentence>& sentences) {
  std::string out;
  for (const auto& s : sentences) out += s.serialize() + "\n";
  return out;
}

inline std::string masked_set_text(const std::vector<MaskedItem>& items) {
  std::string out;
  for (const auto& item : items) out += format_masked_item(item) + "\n";
  return out;
}

/// Output file name and contents, in write order.
inline std::vector<std::pair<std::string, std::string>> prepared_files(const PreparedCorpus& p) {
  return {
      {"partition.tsv", p.partition.manifest_text()},
      {"vocab.txt", p.vocab.file_text()},
      {"train.txt", sentence_lines(p.train)},
      {"dev.txt", sentence_lines(p.dev)},
      {"test.txt", sentence_lines(p.test)},
      {"gold.txt", sentence_lines(p.gold)},
      {"target.txt", sentence_lines(p.target)},
      {"test_random.tsv", masked_set_text(p.test_random)},
      {"test_smart.tsv", masked_set_text(p.test_smart)},
      {"gold.tsv", masked_set_text(p.gold_set)},
      {"stats.json", prepared_stats(p).dump(2) + "\n"},
  };
}

/// Sentences of one split file written by `prepare`. Ids are `<split>:<line>`.
inline std::vector<Sentence> load_split(const std::filesystem::path& path) {
  LoadedCorpus out;
  load_file(path, path.stem().string(), out);
  return out.sentences;
}

inline std::vector<std::vector<TokenId>> encode_split(const std::vector<Sentence>& sentences, const Vocabulary& vocab) {
  std::vector<std::vector<TokenId>> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(vocab.encode(characters(s)));
  return out;
}

inline std::vector<MaskedSample> to_samples(const std::vector<MaskedItem>& items, const Vocabulary& vocab) {
  std::vector<MaskedSample> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(to_sample(item, vocab));
  return out;
}

}  // namespace lacuna
