// Writes the synthetic test corpus: make_corpus OUT_DIR [SENTENCES] [SEED]
#include <cstdlib>
#include <iostream>

#include "support/synthetic_corpus.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: " << argv[0] << " OUT_DIR [SENTENCES] [SEED]\n";
    return 2;
  }
  lacuna::testing::SyntheticOptions opt;
  if (argc > 2) opt.sentences = std::strtoull(argv[2], nullptr, 10);
  if (argc > 3) opt.seed = std::strtoull(argv[3], nullptr, 10);
  lacuna::testing::write_synthetic_corpus(argv[1], opt);
  return 0;
}
