#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "mpqa/corpus.hpp"
#include "mpqa/retrieval.hpp"

// Span scoring interface plus the deterministic lexical baseline.
//
// Logit vectors have length L+1 for a passage of L tokens: index 0 is the
// reserved no-answer sentinel, index i+1 maps to token i.

namespace mpqa {

struct SpanLogits {
  std::string passage_id;
  std::vector<double> start_logits;  // length L+1
  std::vector<double> end_logits;    // length L+1
  double passage_logit = 0.0;

  std::size_t token_count() const { return start_logits.empty() ? 0 : start_logits.size() - 1; }
};

inline void validate_span_logits(const SpanLogits& logits, std::size_t passage_tokens) {
  if (logits.start_logits.size() != passage_tokens + 1 ||
      logits.end_logits.size() != passage_tokens + 1)
    throw std::runtime_error(
        "scorer: logit length mismatch for passage '" + logits.passage_id + "': expected " +
        std::to_string(passage_tokens + 1) + ", got start=" +
        std::to_string(logits.start_logits.size()) + " end=" +
        std::to_string(logits.end_logits.size()));
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  if (!finite(logits.start_logits) || !finite(logits.end_logits) ||
      !std::isfinite(logits.passage_logit))
    throw std::runtime_error("scorer: non-finite logit for passage '" + logits.passage_id + "'");
}

class Scorer {
 public:
  virtual ~Scorer() = default;
  // Must return validated logits of length passage.tokens.size() + 1.
  virtual SpanLogits score(const std::vector<Token>& question, const Passage& passage) = 0;
};

// Deterministic keyword-overlap scorer. With Qset the case-folded question
// token set:
//   start[i+1] = 3.0*[tok_i in Qset] + |{j in [i, i+5) : tok_j in Qset}|
//   end[i+1]   = 3.0*[tok_i in Qset] + |{j in (i-5, i] : tok_j in Qset}|
//   start[0] = end[0] = 1.0
//   passage_logit = number of distinct Qset members present in the passage.
inline SpanLogits lexical_score(const std::vector<Token>& question, const Passage& passage) {
  if (passage.tokens.empty())
    throw std::invalid_argument("lexical_score: empty passage '" + passage.passage_id + "'");

  auto fold = [](const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s)
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return out;
  };

  std::unordered_set<std::string> qset;
  for (const Token& t : question) qset.insert(fold(t.surface));

  const std::size_t n = passage.tokens.size();
  std::vector<char> in_q(n, 0);
  std::unordered_set<std::string> matched;
  for (std::size_t i = 0; i < n; ++i) {
    std::string folded = fold(passage.tokens[i].surface);
    if (qset.count(folded)) {
      in_q[i] = 1;
      matched.insert(folded);
    }
  }

  SpanLogits out;
  out.passage_id = passage.passage_id;
  out.start_logits.assign(n + 1, 0.0);
  out.end_logits.assign(n + 1, 0.0);
  out.start_logits[0] = 1.0;
  out.end_logits[0] = 1.0;
  constexpr std::size_t kWindow = 5;
  for (std::size_t i = 0; i < n; ++i) {
    int fwd = 0, bwd = 0;
    for (std::size_t j = i; j < std::min(i + kWindow, n); ++j) fwd += in_q[j];
    for (std::size_t j = (i + 1 >= kWindow ? i + 1 - kWindow : 0); j <= i; ++j) bwd += in_q[j];
    out.start_logits[i + 1] = 3.0 * in_q[i] + fwd;
    out.end_logits[i + 1] = 3.0 * in_q[i] + bwd;
  }
  out.passage_logit = static_cast<double>(matched.size());
  return out;
}

class LexicalScorer final : public Scorer {
 public:
  SpanLogits score(const std::vector<Token>& question, const Passage& passage) override {
    return lexical_score(question, passage);
  }
};

}  // namespace mpqa
