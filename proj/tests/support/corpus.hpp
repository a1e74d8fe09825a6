// A generated corpus shared by the tests of one process; built on first use.
#pragma once

#include <sstream>
#include <string>

#include "cfps/dataset.hpp"

namespace cfps::testing {

inline CorpusConfig shared_config(std::uint64_t count = 1000) {
  CorpusConfig cfg;
  cfg.total_count = count;
  cfg.seed = 11;
  return cfg;
}

/// Header plus 1000 records.
inline const std::string& shared_corpus_text() {
  static const std::string text = [] {
    std::ostringstream os;
    generate_corpus(shared_config(), os);
    return os.str();
  }();
  return text;
}

inline const Corpus& shared_corpus() {
  static const Corpus c = [] {
    std::istringstream in(shared_corpus_text());
    return read_corpus(in);
  }();
  return c;
}

}  // namespace cfps::testing
