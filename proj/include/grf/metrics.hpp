#pragma once

// Corpus BLEU-n and Distinct-n over project-tokenized text.

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "grf/error.hpp"

namespace grf {

using Words = std::vector<std::string>;

struct EvalPair {
  Words hypothesis;
  std::vector<Words> references;
};

namespace detail {

inline std::map<Words, std::size_t> ngram_counts(const Words& w, std::size_t n) {
  std::map<Words, std::size_t> out;
  for (std::size_t i = 0; i + n <= w.size(); ++i) ++out[Words(w.begin() + static_cast<std::ptrdiff_t>(i), w.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return out;
}

}  // namespace detail

/// Corpus BLEU with clipped precisions for orders 1..n, uniform weights and the
/// closest-reference brevity penalty (shorter reference on ties). `smooth` adds
/// one to numerator and denominator of every order above 1.
inline double bleu(const std::vector<EvalPair>& pairs, std::size_t n, bool smooth = false) {
  if (n < 1 || n > 4) throw Error(ErrorCode::Config, "bleu: n must be in 1..4");
  if (pairs.empty()) throw Error(ErrorCode::Format, "bleu: empty hypothesis set");
  std::vector<double> match(n, 0.0), total(n, 0.0);
  double hyp_len = 0, ref_len = 0;
  for (const auto& p : pairs) {
    if (p.references.empty()) throw Error(ErrorCode::Format, "bleu: hypothesis without reference");
    hyp_len += static_cast<double>(p.hypothesis.size());
    std::size_t best = p.references.front().size();
    for (const auto& r : p.references) {
      const auto d = std::llabs(static_cast<long long>(r.size()) - static_cast<long long>(p.hypothesis.size()));
      const auto bd = std::llabs(static_cast<long long>(best) - static_cast<long long>(p.hypothesis.size()));
      if (d < bd || (d == bd && r.size() < best)) best = r.size();
    }
    ref_len += static_cast<double>(best);
    for (std::size_t k = 1; k <= n; ++k) {
      const auto hyp = detail::ngram_counts(p.hypothesis, k);
      std::map<Words, std::size_t> max_ref;
      for (const auto& r : p.references)
        for (const auto& [g, c] : detail::ngram_counts(r, k)) max_ref[g] = std::max(max_ref[g], c);
      for (const auto& [g, c] : hyp) {
        auto it = max_ref.find(g);
        match[k - 1] += static_cast<double>(std::min(c, it == max_ref.end() ? std::size_t{0} : it->second));
        total[k - 1] += static_cast<double>(c);
      }
    }
  }
  double log_sum = 0;
  for (std::size_t k = 0; k < n; ++k) {
    double m = match[k], t = total[k];
    if (smooth && k > 0) {
      m += 1;
      t += 1;
    }
    if (m == 0 || t == 0) return 0.0;
    log_sum += std::log(m / t);
  }
  const double bp = hyp_len >= ref_len ? 1.0 : (hyp_len == 0 ? 0.0 : std::exp(1.0 - ref_len / hyp_len));
  return bp * std::exp(log_sum / static_cast<double>(n));
}

/// Unique n-grams over total n-grams across all hypotheses. No n-grams gives 0
/// and a warning on stderr.
inline double distinct(const std::vector<Words>& hyps, std::size_t n) {
  if (n < 1) throw Error(ErrorCode::Config, "distinct: n must be >= 1");
  std::set<Words> unique;
  std::size_t total = 0;
  for (const auto& h : hyps) {
    for (std::size_t i = 0; i + n <= h.size(); ++i) {
      unique.emplace(h.begin() + static_cast<std::ptrdiff_t>(i), h.begin() + static_cast<std::ptrdiff_t>(i + n));
      ++total;
    }
  }
  if (total == 0) {
    std::cerr << "warning: distinct-" << n << ": no n-grams in corpus, reporting 0\n";
    return 0.0;
  }
  return static_cast<double>(unique.size()) / static_cast<double>(total);
}

}  // namespace grf
