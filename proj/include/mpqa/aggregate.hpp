#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <utility>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mpqa/corpus.hpp"
#include "mpqa/eval.hpp"
#include "mpqa/ranker.hpp"
#include "mpqa/scorer.hpp"

// Span-probability normalization, candidate enumeration, passage-score
// combination, answer merging, and the span training loss with analytic
// gradients.
//
// Two normalization regimes over the raw span logits of one question:
//   PerPassage — each passage's start/end logits are softmaxed independently
//     over its own L+1 positions (sentinel included), so scores are not
//     comparable across passages.
//   Global — one softmax over the non-sentinel word positions of all
//     passages jointly, making span scores directly comparable.
//
// All probability arithmetic is done in log space with max subtraction;
// probability-scale values appear only at API edges.

namespace mpqa {

enum class NormalizationMode { PerPassage, Global };

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct PassageDistribution {
  std::string passage_id;
  std::vector<double> start_logprob;  // length L+1; -inf at masked positions
  std::vector<double> end_logprob;
};

struct SpanDistribution {
  std::vector<PassageDistribution> passages;
  NormalizationMode mode = NormalizationMode::PerPassage;
  bool sentinel_masked = false;
};

struct AnswerCandidate {
  std::string text;  // raw surface recovered from document offsets
  std::string passage_id;
  std::size_t a_s = 0;  // 1-based token positions, a_s <= a_e
  std::size_t a_e = 0;
  double score = 0.0;  // probability scale, in (0, 1]
};

struct GoldSpan {
  std::string passage_id;
  std::size_t a_s = 0;
  std::size_t a_e = 0;
};
using GoldSpans = std::vector<GoldSpan>;

namespace detail {

inline void check_finite_logits(const SpanLogits& logits) {
  if (logits.start_logits.empty() || logits.start_logits.size() != logits.end_logits.size())
    throw std::invalid_argument("normalize: malformed logits for passage '" +
                                logits.passage_id + "'");
  validate_span_logits(logits, logits.token_count());
}

// In-place log-softmax over the unmasked (finite) entries of `v`.
inline void log_softmax_inplace(std::vector<double>& v) {
  double mx = kNegInf;
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx))
    throw std::invalid_argument("log_softmax: no unmasked positions");
  double s = 0.0;
  for (double x : v)
    if (std::isfinite(x)) s += std::exp(x - mx);
  double lse = mx + std::log(s);
  for (double& x : v)
    if (std::isfinite(x)) x -= lse;
}

}  // namespace detail

// Independent log-softmax over one passage's L+1 positions (start and end
// separately). With mask_sentinel the softmax excludes position 0.
inline SpanDistribution normalize_per_passage(const SpanLogits& logits,
                                              bool mask_sentinel = false) {
  detail::check_finite_logits(logits);
  PassageDistribution pd;
  pd.passage_id = logits.passage_id;
  pd.start_logprob = logits.start_logits;
  pd.end_logprob = logits.end_logits;
  if (mask_sentinel) {
    if (logits.token_count() == 0)
      throw std::invalid_argument("normalize_per_passage: cannot mask sentinel of empty passage");
    pd.start_logprob[0] = kNegInf;
    pd.end_logprob[0] = kNegInf;
  }
  detail::log_softmax_inplace(pd.start_logprob);
  detail::log_softmax_inplace(pd.end_logprob);
  SpanDistribution dist;
  dist.mode = NormalizationMode::PerPassage;
  dist.sentinel_masked = mask_sentinel;
  dist.passages.push_back(std::move(pd));
  return dist;
}

inline SpanDistribution normalize_per_passage(const std::vector<SpanLogits>& all_logits,
                                              bool mask_sentinel = false) {
  if (all_logits.empty())
    throw std::invalid_argument("normalize_per_passage: empty passage set");
  SpanDistribution dist;
  dist.mode = NormalizationMode::PerPassage;
  dist.sentinel_masked = mask_sentinel;
  for (const SpanLogits& logits : all_logits) {
    SpanDistribution one = normalize_per_passage(logits, mask_sentinel);
    dist.passages.push_back(std::move(one.passages.front()));
  }
  return dist;
}

// One joint log-softmax over the union of non-sentinel positions of all
// passages of a question (start and end separately). Sentinels are masked.
inline SpanDistribution normalize_global(const std::vector<SpanLogits>& all_logits) {
  if (all_logits.empty()) throw std::invalid_argument("normalize_global: empty passage set");
  for (const SpanLogits& logits : all_logits) detail::check_finite_logits(logits);

  auto joint_normalize = [&](bool start_head) {
    double mx = kNegInf;
    for (const SpanLogits& logits : all_logits) {
      const auto& v = start_head ? logits.start_logits : logits.end_logits;
      for (std::size_t i = 1; i < v.size(); ++i) mx = std::max(mx, v[i]);
    }
    if (!std::isfinite(mx))
      throw std::invalid_argument("normalize_global: no word positions to normalize");
    double s = 0.0;
    for (const SpanLogits& logits : all_logits) {
      const auto& v = start_head ? logits.start_logits : logits.end_logits;
      for (std::size_t i = 1; i < v.size(); ++i) s += std::exp(v[i] - mx);
    }
    return mx + std::log(s);
  };
  double lse_start = joint_normalize(true);
  double lse_end = joint_normalize(false);

  SpanDistribution dist;
  dist.mode = NormalizationMode::Global;
  dist.sentinel_masked = true;
  for (const SpanLogits& logits : all_logits) {
    PassageDistribution pd;
    pd.passage_id = logits.passage_id;
    pd.start_logprob.assign(logits.start_logits.size(), kNegInf);
    pd.end_logprob.assign(logits.end_logits.size(), kNegInf);
    for (std::size_t i = 1; i < logits.start_logits.size(); ++i) {
      pd.start_logprob[i] = logits.start_logits[i] - lse_start;
      pd.end_logprob[i] = logits.end_logits[i] - lse_end;
    }
    dist.passages.push_back(std::move(pd));
  }
  return dist;
}

// All spans with a_s <= a_e, length <= max_span_len, inside one passage;
// score = exp(start_logprob[a_s] + end_logprob[a_e]). Top-n by score, ties
// by (passage_id, a_s, a_e) ascending. Candidate text is cut from the source
// document via token character offsets.
inline std::vector<AnswerCandidate> enumerate_spans(
    const SpanDistribution& dist,
    const std::unordered_map<std::string, const Passage*>& passages,
    const std::unordered_map<std::string, std::string>& doc_texts, std::size_t max_span_len,
    std::size_t top_n) {
  if (top_n < 1 || max_span_len < 1)
    throw std::invalid_argument("enumerate_spans: top_n and max_span_len must be >= 1");

  struct RawSpan {
    double logscore;
    const PassageDistribution* pd;
    std::size_t a_s, a_e;
  };
  std::vector<RawSpan> spans;
  for (const PassageDistribution& pd : dist.passages) {
    const std::size_t L = pd.start_logprob.size() - 1;
    for (std::size_t a_s = 1; a_s <= L; ++a_s) {
      if (pd.start_logprob[a_s] == kNegInf) continue;
      std::size_t hi = std::min(L, a_s + max_span_len - 1);
      for (std::size_t a_e = a_s; a_e <= hi; ++a_e) {
        if (pd.end_logprob[a_e] == kNegInf) continue;
        spans.push_back({pd.start_logprob[a_s] + pd.end_logprob[a_e], &pd, a_s, a_e});
      }
    }
  }
  auto better = [](const RawSpan& a, const RawSpan& b) {
    if (a.logscore != b.logscore) return a.logscore > b.logscore;
    if (a.pd->passage_id != b.pd->passage_id) return a.pd->passage_id < b.pd->passage_id;
    if (a.a_s != b.a_s) return a.a_s < b.a_s;
    return a.a_e < b.a_e;
  };
  if (spans.size() > top_n) {
    std::partial_sort(spans.begin(), spans.begin() + top_n, spans.end(), better);
    spans.resize(top_n);
  } else {
    std::sort(spans.begin(), spans.end(), better);
  }

  std::vector<AnswerCandidate> out;
  out.reserve(spans.size());
  for (const RawSpan& s : spans) {
    auto pit = passages.find(s.pd->passage_id);
    if (pit == passages.end())
      throw std::invalid_argument("enumerate_spans: unknown passage '" + s.pd->passage_id + "'");
    const Passage& p = *pit->second;
    const Token& first = p.tokens.at(s.a_s - 1);
    const Token& last = p.tokens.at(s.a_e - 1);
    auto dit = doc_texts.find(p.doc_id);
    if (dit == doc_texts.end())
      throw std::invalid_argument("enumerate_spans: unknown document '" + p.doc_id + "'");
    AnswerCandidate c;
    c.text = dit->second.substr(first.char_start, last.char_end - first.char_start);
    c.passage_id = s.pd->passage_id;
    c.a_s = s.a_s;
    c.a_e = s.a_e;
    c.score = std::exp(s.logscore);
    out.push_back(std::move(c));
  }
  return out;
}

// Multiply a candidate's span probability by its passage posterior
// Pr(P_i|Q,P). Done in log space, returned in probability space.
inline AnswerCandidate combine_passage_score(const AnswerCandidate& candidate,
                                             const PassagePosterior& posterior) {
  auto it = posterior.entries.find(candidate.passage_id);
  if (it == posterior.entries.end())
    throw std::invalid_argument("combine_passage_score: passage '" + candidate.passage_id +
                                "' not in posterior");
  AnswerCandidate out = candidate;
  out.score = std::exp(std::log(candidate.score) + std::log(it->second));
  return out;
}

struct AnswerGroup {
  std::string key;  // SQuAD-normalized answer string
  double total_score = 0.0;
  std::vector<AnswerCandidate> supporting;
};

// Candidates with the same normalized answer string are merged by summing
// their scores. Output sorted by total score descending, ties by key.
inline std::vector<AnswerGroup> merge_answers(const std::vector<AnswerCandidate>& candidates) {
  std::map<std::string, AnswerGroup> groups;
  for (const AnswerCandidate& c : candidates) {
    std::string key = normalize_answer(c.text);
    AnswerGroup& g = groups[key];
    g.key = key;
    g.total_score += c.score;
    g.supporting.push_back(c);
  }
  std::vector<AnswerGroup> out;
  out.reserve(groups.size());
  for (auto& [key, g] : groups) out.push_back(std::move(g));
  std::sort(out.begin(), out.end(), [](const AnswerGroup& a, const AnswerGroup& b) {
    if (a.total_score != b.total_score) return a.total_score > b.total_score;
    return a.key < b.key;
  });
  return out;
}

struct SpanLossResult {
  double loss = 0.0;
  std::vector<SpanLogits> grad;  // same shape as the input logits
};

namespace detail {

// Gradient of -log sum_{t in targets} softmax(z)_t at the unmasked
// positions of `logprob` (a normalized log-distribution): p_j - q_j with
// q_j = p_j * [j in T] / sum_{t in T} p_t.
inline double marginal_nll(const std::vector<const std::vector<double>*>& logprob_blocks,
                           const std::vector<std::pair<std::size_t, std::size_t>>& targets,
                           std::vector<std::vector<double>>& grad_blocks) {
  double log_s = kNegInf;
  for (const auto& [blk, pos] : targets) {
    double lp = (*logprob_blocks[blk])[pos];
    if (lp > log_s)
      log_s = lp + std::log1p(std::exp(log_s - lp));
    else if (std::isfinite(log_s))
      log_s = log_s + std::log1p(std::exp(lp - log_s));
    else
      log_s = lp;
  }
  std::vector<std::vector<char>> is_target(grad_blocks.size());
  for (std::size_t b = 0; b < grad_blocks.size(); ++b)
    is_target[b].assign(grad_blocks[b].size(), 0);
  for (const auto& [blk, pos] : targets) is_target[blk][pos] = 1;

  for (std::size_t b = 0; b < grad_blocks.size(); ++b) {
    const std::vector<double>& lp = *logprob_blocks[b];
    for (std::size_t j = 0; j < lp.size(); ++j) {
      if (!std::isfinite(lp[j])) continue;  // masked position: zero gradient
      double p = std::exp(lp[j]);
      double q = is_target[b][j] ? std::exp(lp[j] - log_s) : 0.0;
      grad_blocks[b][j] += p - q;
    }
  }
  return -log_s;
}

}  // namespace detail

// Span training loss. PerPassage: each passage's start/end heads are trained
// independently, with the sentinel position 0 as the target for passages
// holding no gold occurrence. Global: one joint softmax per head over all
// word positions; golds must be non-empty. Multiple gold occurrences are
// marginalized (their probabilities sum). Returns the analytic gradient with
// respect to every input logit; passage_logit gradients are zero.
inline SpanLossResult span_nll_and_grad(const std::vector<SpanLogits>& all_logits,
                                        const GoldSpans& golds, NormalizationMode mode) {
  if (all_logits.empty()) throw std::invalid_argument("span_nll_and_grad: empty passage set");
  std::unordered_map<std::string, std::size_t> index_of;
  for (std::size_t i = 0; i < all_logits.size(); ++i) {
    detail::check_finite_logits(all_logits[i]);
    index_of[all_logits[i].passage_id] = i;
  }
  for (const GoldSpan& g : golds) {
    auto it = index_of.find(g.passage_id);
    if (it == index_of.end())
      throw std::invalid_argument("span_nll_and_grad: gold references unknown passage '" +
                                  g.passage_id + "'");
    std::size_t L = all_logits[it->second].token_count();
    if (g.a_s < 1 || g.a_e < g.a_s || g.a_e > L)
      throw std::invalid_argument("span_nll_and_grad: gold span out of range in passage '" +
                                  g.passage_id + "'");
  }

  SpanLossResult res;
  res.grad.resize(all_logits.size());
  for (std::size_t i = 0; i < all_logits.size(); ++i) {
    res.grad[i].passage_id = all_logits[i].passage_id;
    res.grad[i].start_logits.assign(all_logits[i].start_logits.size(), 0.0);
    res.grad[i].end_logits.assign(all_logits[i].end_logits.size(), 0.0);
    res.grad[i].passage_logit = 0.0;
  }

  if (mode == NormalizationMode::PerPassage) {
    for (std::size_t i = 0; i < all_logits.size(); ++i) {
      std::unordered_set<std::size_t> starts, ends;
      for (const GoldSpan& g : golds) {
        if (index_of.at(g.passage_id) != i) continue;
        starts.insert(g.a_s);
        ends.insert(g.a_e);
      }
      if (starts.empty()) {  // negative passage: sentinel target
        starts.insert(0);
        ends.insert(0);
      }
      SpanDistribution dist = normalize_per_passage(all_logits[i], false);
      const PassageDistribution& pd = dist.passages.front();

      auto head = [&](const std::vector<double>& logprob,
                      const std::unordered_set<std::size_t>& tset, std::vector<double>& grad) {
        std::vector<const std::vector<double>*> blocks{&logprob};
        std::vector<std::pair<std::size_t, std::size_t>> targets;
        for (std::size_t t : tset) targets.push_back({0, t});
        std::vector<std::vector<double>> gblocks{std::vector<double>(logprob.size(), 0.0)};
        double nll = detail::marginal_nll(blocks, targets, gblocks);
        for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += gblocks[0][j];
        return nll;
      };
      res.loss += head(pd.start_logprob, starts, res.grad[i].start_logits);
      res.loss += head(pd.end_logprob, ends, res.grad[i].end_logits);
    }
    return res;
  }

  // Global mode.
  if (golds.empty())
    throw std::invalid_argument("span_nll_and_grad: no positive passage for global loss");
  SpanDistribution dist = normalize_global(all_logits);

  auto head = [&](bool start_head) {
    std::vector<const std::vector<double>*> blocks;
    std::vector<std::vector<double>> gblocks;
    for (const PassageDistribution& pd : dist.passages) {
      const std::vector<double>& lp = start_head ? pd.start_logprob : pd.end_logprob;
      blocks.push_back(&lp);
      gblocks.emplace_back(lp.size(), 0.0);
    }
    std::set<std::pair<std::size_t, std::size_t>> tset;
    for (const GoldSpan& g : golds)
      tset.insert({index_of.at(g.passage_id), start_head ? g.a_s : g.a_e});
    std::vector<std::pair<std::size_t, std::size_t>> targets(tset.begin(), tset.end());
    double nll = detail::marginal_nll(blocks, targets, gblocks);
    for (std::size_t i = 0; i < gblocks.size(); ++i) {
      std::vector<double>& grad =
          start_head ? res.grad[i].start_logits : res.grad[i].end_logits;
      for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += gblocks[i][j];
    }
    return nll;
  };
  res.loss += head(true);
  res.loss += head(false);
  return res;
}

}  // namespace mpqa
