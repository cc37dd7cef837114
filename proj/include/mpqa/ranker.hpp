#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "mpqa/corpus.hpp"
#include "mpqa/retrieval.hpp"

// Listwise passage ranking: softmax posterior over a question's passages,
// the marginal log-likelihood training objective with analytic gradients,
// a linear ranker over lexical features, and passage-selection rules.

namespace mpqa {

struct PassagePosterior {
  std::string question_id;
  std::map<std::string, double> entries;  // passage_id -> probability
  std::size_t m = 0;                      // passage count
};

namespace detail {

inline double log_sum_exp(const std::vector<double>& v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace detail

// Softmax over per-passage scores of one question.
inline PassagePosterior passage_posterior(const std::map<std::string, double>& logits,
                                          const std::string& question_id = "") {
  if (logits.empty()) throw std::invalid_argument("passage_posterior: empty input");
  std::vector<double> vals;
  vals.reserve(logits.size());
  for (const auto& [pid, z] : logits) {
    if (!std::isfinite(z))
      throw std::invalid_argument("passage_posterior: non-finite logit for '" + pid + "'");
    vals.push_back(z);
  }
  double lse = detail::log_sum_exp(vals);
  PassagePosterior post;
  post.question_id = question_id;
  post.m = logits.size();
  for (const auto& [pid, z] : logits) post.entries[pid] = std::exp(z - lse);
  return post;
}

// Listwise loss: -log sum_{i in positives} softmax(logits)_i, with its
// analytic gradient over every logit.
inline std::pair<double, std::vector<double>> ranker_loss_and_grad(
    const std::vector<double>& logits, const std::vector<bool>& positive_mask) {
  if (logits.size() != positive_mask.size())
    throw std::invalid_argument("ranker_loss_and_grad: mask size mismatch");
  if (std::none_of(positive_mask.begin(), positive_mask.end(), [](bool b) { return b; }))
    throw std::invalid_argument("ranker_loss_and_grad: no positive passage");

  double lse = detail::log_sum_exp(logits);
  std::vector<double> pos_logits;
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (positive_mask[i]) pos_logits.push_back(logits[i]);
  double lse_pos = detail::log_sum_exp(pos_logits);
  double loss = lse - lse_pos;

  std::vector<double> grad(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    double p = std::exp(logits[i] - lse);
    double q = positive_mask[i] ? std::exp(logits[i] - lse_pos) : 0.0;
    grad[i] = p - q;
  }
  return {loss, grad};
}

inline constexpr std::size_t kFeatureDim = 5;
using FeatureVector = std::array<double, kFeatureDim>;

// Fixed-order features: [bm25_score, unigram_overlap_fraction,
// bigram_overlap_count, passage_length/100, bias=1].
inline FeatureVector extract_features(const std::vector<Token>& question,
                                      const Passage& passage, double bm25_score) {
  std::vector<std::string> qterms = extract_terms(question);
  std::vector<std::string> pterms = extract_terms(passage.tokens);
  std::unordered_set<std::string> qset(qterms.begin(), qterms.end());
  std::unordered_set<std::string> pset(pterms.begin(), pterms.end());

  std::size_t uni = 0;
  for (const auto& t : qset)
    if (pset.count(t)) ++uni;
  double uni_frac = qset.empty() ? 0.0 : static_cast<double>(uni) / static_cast<double>(qset.size());

  auto bigrams = [](const std::vector<std::string>& terms) {
    std::set<std::pair<std::string, std::string>> out;
    for (std::size_t i = 0; i + 1 < terms.size(); ++i) out.insert({terms[i], terms[i + 1]});
    return out;
  };
  auto qbi = bigrams(qterms);
  auto pbi = bigrams(pterms);
  std::size_t bi = 0;
  for (const auto& g : qbi)
    if (pbi.count(g)) ++bi;

  return {bm25_score, uni_frac, static_cast<double>(bi),
          static_cast<double>(passage.tokens.size()) / 100.0, 1.0};
}

struct TrainConfig {
  std::size_t epochs = 200;
  double learning_rate = 0.1;
  uint64_t seed = 0;
};

struct LinearRankerModel {
  FeatureVector weights{};
  TrainConfig config;
  double final_loss = 0.0;

  double score(const FeatureVector& f) const {
    double z = 0.0;
    for (std::size_t i = 0; i < kFeatureDim; ++i) z += weights[i] * f[i];
    return z;
  }

  static constexpr const char* kMagic = "mpqa.linear.ranker";
  static constexpr int kVersion = 1;

  void save(const std::string& path) const {
    nlohmann::json j;
    j["magic"] = kMagic;
    j["version"] = kVersion;
    j["weights"] = weights;
    j["epochs"] = config.epochs;
    j["learning_rate"] = config.learning_rate;
    j["seed"] = config.seed;
    j["final_loss"] = final_loss;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out << j.dump(2) << "\n";
  }

  static LinearRankerModel load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object() || j.value("magic", "") != kMagic)
      throw FormatError("model file is corrupt or not a ranker model: " + path);
    if (j.value("version", -1) != kVersion)
      throw FormatError("model file has unsupported version: " + path);
    LinearRankerModel m;
    auto w = j.at("weights").get<std::vector<double>>();
    if (w.size() != kFeatureDim) throw FormatError("model file has wrong weight count: " + path);
    std::copy(w.begin(), w.end(), m.weights.begin());
    m.config.epochs = j.at("epochs").get<std::size_t>();
    m.config.learning_rate = j.at("learning_rate").get<double>();
    m.config.seed = j.at("seed").get<uint64_t>();
    m.final_loss = j.value("final_loss", 0.0);
    return m;
  }
};

struct RankerInstance {
  std::string question_id;
  std::vector<FeatureVector> features;  // one per passage
  std::vector<bool> positive_mask;
};

// Full-batch gradient descent on the mean listwise loss. Deterministic for a
// fixed seed; returns the weights with the lowest mean loss seen.
inline LinearRankerModel train_linear_ranker(const std::vector<RankerInstance>& dataset,
                                             const TrainConfig& config) {
  for (const auto& inst : dataset) {
    if (inst.features.empty())
      throw std::invalid_argument("train_linear_ranker: question '" + inst.question_id +
                                  "' has zero passages");
    if (std::none_of(inst.positive_mask.begin(), inst.positive_mask.end(),
                     [](bool b) { return b; }))
      throw std::invalid_argument("train_linear_ranker: question '" + inst.question_id +
                                  "' has no positive passage");
  }
  if (dataset.empty()) throw std::invalid_argument("train_linear_ranker: empty dataset");

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> init(-0.01, 0.01);
  FeatureVector w{};
  for (auto& x : w) x = init(rng);

  auto mean_loss_and_grad = [&](const FeatureVector& weights, FeatureVector* grad_out) {
    FeatureVector g{};
    double total = 0.0;
    for (const auto& inst : dataset) {
      std::vector<double> logits(inst.features.size());
      for (std::size_t i = 0; i < inst.features.size(); ++i) {
        double z = 0.0;
        for (std::size_t d = 0; d < kFeatureDim; ++d) z += weights[d] * inst.features[i][d];
        logits[i] = z;
      }
      auto [loss, glogits] = ranker_loss_and_grad(logits, inst.positive_mask);
      total += loss;
      for (std::size_t i = 0; i < inst.features.size(); ++i)
        for (std::size_t d = 0; d < kFeatureDim; ++d)
          g[d] += glogits[i] * inst.features[i][d];
    }
    double n = static_cast<double>(dataset.size());
    if (grad_out)
      for (std::size_t d = 0; d < kFeatureDim; ++d) (*grad_out)[d] = g[d] / n;
    return total / n;
  };

  FeatureVector best_w = w;
  double best_loss = mean_loss_and_grad(w, nullptr);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    FeatureVector grad{};
    mean_loss_and_grad(w, &grad);
    for (std::size_t d = 0; d < kFeatureDim; ++d) w[d] -= config.learning_rate * grad[d];
    double loss = mean_loss_and_grad(w, nullptr);
    if (loss < best_loss) {
      best_loss = loss;
      best_w = w;
    }
  }

  LinearRankerModel model;
  model.weights = best_w;
  model.config = config;
  model.final_loss = best_loss;
  return model;
}

// Training-time passage selection: the top-10 hits plus every positive
// appearing anywhere in the (up to top-100) hit list, in rank order.
inline std::vector<std::string> select_training_passages(
    const std::vector<RetrievalHit>& hits, const std::unordered_set<std::string>& positives) {
  if (hits.size() > 100)
    throw std::invalid_argument("select_training_passages: hit list exceeds 100");
  std::vector<std::string> out;
  for (const RetrievalHit& h : hits) {
    if (h.rank <= 10 || positives.count(h.passage_id)) out.push_back(h.passage_id);
  }
  return out;
}

struct RerankResult {
  std::vector<std::string> passage_ids;  // reranked, truncated to k
  PassagePosterior posterior;            // softmax over the retained k
};

// Rerank hits by a per-passage logit, keep the top k, and renormalize the
// posterior over the retained passages. Ties break by ascending passage_id.
inline RerankResult rerank_topk(
    const std::vector<RetrievalHit>& hits,
    const std::function<double(const RetrievalHit&)>& logit_of, std::size_t k,
    const std::string& question_id = "") {
  if (hits.empty()) throw std::invalid_argument("rerank_topk: empty hit list");
  struct Entry {
    std::string passage_id;
    double logit;
  };
  std::vector<Entry> entries;
  entries.reserve(hits.size());
  for (const RetrievalHit& h : hits) entries.push_back({h.passage_id, logit_of(h)});
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.logit != b.logit) return a.logit > b.logit;
    return a.passage_id < b.passage_id;
  });
  if (entries.size() > k) entries.resize(k);

  RerankResult res;
  std::map<std::string, double> logits;
  for (const Entry& e : entries) {
    res.passage_ids.push_back(e.passage_id);
    logits[e.passage_id] = e.logit;
  }
  res.posterior = passage_posterior(logits, question_id);
  return res;
}

}  // namespace mpqa
