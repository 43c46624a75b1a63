#pragma once

// Deterministic synthetic KG and parallel corpus. Each source concept s owns a
// small cluster of parallel branches:
//
//   s --atlocation--> m_i --hasproperty--> c_i      (i = 0..branches-1)
//   m_0 --desires--> m_1
//
// Every target mentions c_0, which sits exactly two hops from s. All branches
// look alike to the flow; only the same-level "desires" edge marks m_0, so
// picking out c_0 needs the graph encoder. Held-out clusters use unseen words.

#include <algorithm>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "grf/config.hpp"
#include "grf/pipeline.hpp"

namespace grf {

struct SynthConfig {
  std::uint64_t seed = 7;
  std::size_t train_sources = 16;
  std::size_t heldout_sources = 8;
  std::size_t branches = 2;
};

struct SynthCorpus {
  std::vector<std::tuple<std::string, std::string, std::string, float>> triples;  // raw ConceptNet relation names
  std::vector<TextPair> train, heldout;

  std::string kg_tsv() const {
    std::string out;
    for (const auto& [h, r, t, w] : triples) out += h + "\t" + r + "\t" + t + "\t1\n";
    return out;
  }
};

inline const std::vector<std::pair<std::string, std::string>>& synth_templates() {
  static const std::vector<std::pair<std::string, std::string>> t = {
      {"i saw a {s} today .", "it reminded me of {a} again , and we talked about it for a while ."},
      {"where is the {s} ?", "it is near the {a} , just past the old bridge on the left side ."},
      {"describe the {s} .", "the first thing that comes to mind is {a} , at least for me ."},
      {"what does the {s} need ?", "it needs some {a} now , or it will not last very long ."},
  };
  return t;
}

namespace detail {

inline std::string fill(std::string s, const std::string& key, const std::string& value) {
  for (auto pos = s.find(key); pos != std::string::npos; pos = s.find(key, pos + value.size())) s.replace(pos, key.size(), value);
  return s;
}

}  // namespace detail

inline SynthCorpus synth_corpus(const SynthConfig& cfg) {
  if (cfg.branches < 1) throw Error(ErrorCode::Config, "synth: branches must be >= 1");
  std::mt19937_64 rng(cfg.seed);
  const std::string consonants = "bdfgklmnprtvz", vowels = "aeiou";
  std::set<std::string> used;
  for (const auto& [src, tgt] : synth_templates())
    for (const auto& w : tokenize(src + " " + tgt)) used.insert(w);
  auto word = [&] {
    while (true) {
      std::string w;
      const std::size_t syl = 2 + rng() % 2;
      for (std::size_t i = 0; i < syl; ++i) {
        w += consonants[rng() % consonants.size()];
        w += vowels[rng() % vowels.size()];
      }
      if (used.insert(w).second) return w;
    }
  };

  SynthCorpus c;
  auto cluster = [&](std::vector<TextPair>& out) {
    const auto s = word();
    std::vector<std::string> mids, leaves;
    for (std::size_t i = 0; i < cfg.branches; ++i) {
      mids.push_back(word());
      leaves.push_back(word());
      c.triples.emplace_back(s, "AtLocation", mids[i], 1.0f);
      c.triples.emplace_back(mids[i], "HasProperty", leaves[i], 1.0f);
    }
    if (cfg.branches > 1) c.triples.emplace_back(mids[0], "Desires", mids[1], 1.0f);
    const auto& answer = leaves[0];
    for (const auto& [src, tgt] : synth_templates()) out.push_back({detail::fill(src, "{s}", s), detail::fill(tgt, "{a}", answer)});
  };
  for (std::size_t i = 0; i < cfg.train_sources; ++i) cluster(c.train);
  for (std::size_t i = 0; i < cfg.heldout_sources; ++i) cluster(c.heldout);
  return c;
}

/// Settings used for the synthetic corpus. gamma = 1 lets evidence from the
/// first hop carry fully into the second, so the marked branch's leaf can take
/// most of the node distribution.
inline RunConfig synth_run_config() {
  RunConfig c;
  c.flow.gamma = 1.0;
  c.model.d_model = 32;
  c.model.d_graph = 32;
  c.model.heads = 4;
  c.model.max_len = 32;
  c.train.lr = 5e-3;
  c.train.total_steps = 500;
  c.train.batch_size = 16;
  c.decode.max_len = 20;
  return c;
}

}  // namespace grf
