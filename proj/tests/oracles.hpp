#pragma once

// Test-only oracles, independent of the library's indexed/optimized paths:
// exhaustive-scan BM25, exhaustive span enumeration, and central finite
// differences for gradient checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mpqa/corpus.hpp"
#include "mpqa/retrieval.hpp"

namespace oracle {

// BM25 by direct scan over all passages, no inverted index.
inline std::vector<mpqa::RetrievalHit> bm25_scan(const std::vector<mpqa::Passage>& passages,
                                                 const std::string& question,
                                                 mpqa::Bm25Params params, std::size_t k) {
  std::vector<std::string> qterms = mpqa::extract_terms(question);
  double n = static_cast<double>(passages.size());

  // Document frequencies by direct counting.
  std::map<std::string, double> df;
  std::vector<std::map<std::string, double>> tfs(passages.size());
  double total_len = 0.0;
  for (std::size_t i = 0; i < passages.size(); ++i) {
    for (const std::string& t : mpqa::extract_terms(passages[i].tokens)) tfs[i][t] += 1.0;
    for (const auto& [t, c] : tfs[i]) df[t] += 1.0;
    total_len += static_cast<double>(passages[i].tokens.size());
  }
  double avg_len = passages.empty() ? 0.0 : total_len / n;

  std::vector<mpqa::RetrievalHit> hits;
  for (std::size_t i = 0; i < passages.size(); ++i) {
    double score = 0.0;
    for (const std::string& t : qterms) {
      auto it = tfs[i].find(t);
      if (it == tfs[i].end()) continue;
      double d = df.count(t) ? df[t] : 0.0;
      double idf = std::log(1.0 + (n - d + 0.5) / (d + 0.5));
      double tf = it->second;
      double len = static_cast<double>(passages[i].tokens.size());
      score += idf * tf * (params.k1 + 1.0) /
               (tf + params.k1 * (1.0 - params.b + params.b * len / avg_len));
    }
    if (score > 0.0) hits.push_back({passages[i].passage_id, score, 0});
  }
  std::sort(hits.begin(), hits.end(), [](const mpqa::RetrievalHit& a, const mpqa::RetrievalHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.passage_id < b.passage_id;
  });
  if (hits.size() > k) hits.resize(k);
  for (std::size_t i = 0; i < hits.size(); ++i) hits[i].rank = i + 1;
  return hits;
}

struct Span {
  std::size_t passage = 0;  // index into the distribution's passage list
  std::size_t a_s = 0;
  std::size_t a_e = 0;
  double logscore = 0.0;
};

// All legal spans across per-passage logprob vectors, fully sorted with the
// same tie rule as the implementation.
inline std::vector<Span> enumerate_all_spans(
    const std::vector<std::pair<std::vector<double>, std::vector<double>>>& logprobs,
    const std::vector<std::string>& passage_ids, std::size_t max_span_len) {
  std::vector<Span> out;
  for (std::size_t p = 0; p < logprobs.size(); ++p) {
    const auto& [start, end] = logprobs[p];
    for (std::size_t a_s = 1; a_s < start.size(); ++a_s) {
      if (!std::isfinite(start[a_s])) continue;
      for (std::size_t a_e = a_s; a_e < end.size() && a_e - a_s + 1 <= max_span_len; ++a_e) {
        if (!std::isfinite(end[a_e])) continue;
        out.push_back({p, a_s, a_e, start[a_s] + end[a_e]});
      }
    }
  }
  std::sort(out.begin(), out.end(), [&](const Span& a, const Span& b) {
    if (a.logscore != b.logscore) return a.logscore > b.logscore;
    if (passage_ids[a.passage] != passage_ids[b.passage])
      return passage_ids[a.passage] < passage_ids[b.passage];
    if (a.a_s != b.a_s) return a.a_s < b.a_s;
    return a.a_e < b.a_e;
  });
  return out;
}

// Central finite difference of a scalar function of one flat parameter
// vector, compared against an analytic gradient. Returns the max relative
// error, with absolute error used near zero.
inline double max_grad_rel_error(const std::function<double(const std::vector<double>&)>& f,
                                 const std::vector<double>& x,
                                 const std::vector<double>& analytic, double h = 1e-5) {
  double worst = 0.0;
  std::vector<double> xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    double up = f(xp);
    xp[i] = x[i] - h;
    double down = f(xp);
    xp[i] = x[i];
    double fd = (up - down) / (2.0 * h);
    double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-3});
    worst = std::max(worst, std::abs(fd - analytic[i]) / denom);
  }
  return worst;
}

inline std::string random_word(std::mt19937_64& rng, std::size_t vocab) {
  std::uniform_int_distribution<std::size_t> pick(0, vocab - 1);
  return "w" + std::to_string(pick(rng));
}

inline mpqa::Document random_document(std::mt19937_64& rng, const std::string& doc_id,
                                      std::size_t min_words, std::size_t max_words,
                                      std::size_t vocab = 50) {
  std::uniform_int_distribution<std::size_t> len(min_words, max_words);
  std::size_t n = len(rng);
  std::string text;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) text += ' ';
    text += random_word(rng, vocab);
  }
  return {doc_id, "", text};
}

}  // namespace oracle
