#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "mpqa/corpus.hpp"

// Okapi BM25 over an inverted index of passages.

namespace mpqa {

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

struct RetrievalHit {
  std::string passage_id;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based
};

// Index/query term extraction: case-folded token with leading/trailing
// punctuation stripped. Returns "" for tokens that are all punctuation.
inline std::string extract_term(const std::string& surface) {
  std::size_t lo = 0, hi = surface.size();
  auto is_punct = [](unsigned char c) { return std::ispunct(c) != 0; };
  while (lo < hi && is_punct(static_cast<unsigned char>(surface[lo]))) ++lo;
  while (hi > lo && is_punct(static_cast<unsigned char>(surface[hi - 1]))) --hi;
  std::string out;
  out.reserve(hi - lo);
  for (std::size_t i = lo; i < hi; ++i)
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(surface[i]))));
  return out;
}

inline std::vector<std::string> extract_terms(const std::vector<Token>& tokens) {
  std::vector<std::string> terms;
  terms.reserve(tokens.size());
  for (const Token& t : tokens) {
    std::string term = extract_term(t.surface);
    if (!term.empty()) terms.push_back(std::move(term));
  }
  return terms;
}

inline std::vector<std::string> extract_terms(const std::string& text) {
  return extract_terms(tokenize(text));
}

struct Posting {
  std::string passage_id;
  std::size_t term_frequency = 0;
};

class InvertedIndex {
 public:
  InvertedIndex() = default;

  static InvertedIndex build(const std::vector<Passage>& passages, Bm25Params params = {}) {
    InvertedIndex idx;
    idx.params_ = params;
    for (const Passage& p : passages) {
      if (idx.doc_lengths_.count(p.passage_id))
        throw std::invalid_argument("build_index: duplicate passage_id '" + p.passage_id + "'");
      idx.doc_lengths_[p.passage_id] = p.tokens.size();
      std::map<std::string, std::size_t> tf;
      for (const std::string& term : extract_terms(p.tokens)) ++tf[term];
      for (const auto& [term, count] : tf)
        idx.postings_[term].push_back({p.passage_id, count});
    }
    for (auto& [term, list] : idx.postings_)
      std::sort(list.begin(), list.end(),
                [](const Posting& a, const Posting& b) { return a.passage_id < b.passage_id; });
    idx.recompute_stats();
    return idx;
  }

  std::size_t passage_count() const { return doc_lengths_.size(); }
  double avg_doc_len() const { return avg_doc_len_; }
  const Bm25Params& params() const { return params_; }
  const std::unordered_map<std::string, std::size_t>& doc_lengths() const { return doc_lengths_; }
  const std::map<std::string, std::vector<Posting>>& postings() const { return postings_; }

  double idf(const std::string& term) const {
    auto it = postings_.find(term);
    double df = it == postings_.end() ? 0.0 : static_cast<double>(it->second.size());
    double n = static_cast<double>(passage_count());
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
  }

  // Top-k passages by BM25 score. Zero-score passages are excluded; ties
  // break by ascending passage_id.
  std::vector<RetrievalHit> retrieve(const std::string& question, std::size_t k) const {
    if (passage_count() == 0) throw std::invalid_argument("retrieve: empty index");
    std::vector<std::string> qterms = extract_terms(question);
    std::map<std::string, std::size_t> qtf;  // dedupe; each distinct term scored once per tf
    for (const auto& t : qterms) ++qtf[t];

    std::map<std::string, double> scores;  // passage_id -> accumulated score
    for (const auto& [term, qcount] : qtf) {
      auto it = postings_.find(term);
      if (it == postings_.end()) continue;
      double w_idf = idf(term);
      for (const Posting& post : it->second) {
        double tf = static_cast<double>(post.term_frequency);
        double len = static_cast<double>(doc_lengths_.at(post.passage_id));
        double denom = tf + params_.k1 * (1.0 - params_.b + params_.b * len / avg_doc_len_);
        scores[post.passage_id] +=
            static_cast<double>(qcount) * w_idf * tf * (params_.k1 + 1.0) / denom;
      }
    }

    std::vector<RetrievalHit> hits;
    hits.reserve(scores.size());
    for (const auto& [pid, score] : scores)
      if (score > 0.0) hits.push_back({pid, score, 0});
    std::stable_sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.passage_id < b.passage_id;
    });
    if (hits.size() > k) hits.resize(k);
    for (std::size_t i = 0; i < hits.size(); ++i) hits[i].rank = i + 1;
    return hits;
  }

  static constexpr const char* kMagic = "mpqa.bm25.index";
  static constexpr int kVersion = 1;

  void save(const std::string& path) const {
    nlohmann::json j;
    j["magic"] = kMagic;
    j["version"] = kVersion;
    j["k1"] = params_.k1;
    j["b"] = params_.b;
    nlohmann::json lens = nlohmann::json::object();
    for (const auto& [pid, len] : doc_lengths_) lens[pid] = len;
    j["doc_lengths"] = std::move(lens);
    nlohmann::json posts = nlohmann::json::object();
    for (const auto& [term, list] : postings_) {
      nlohmann::json arr = nlohmann::json::array();
      for (const Posting& p : list) arr.push_back({p.passage_id, p.term_frequency});
      posts[term] = std::move(arr);
    }
    j["postings"] = std::move(posts);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write index file: " + path);
    out << j.dump() << "\n";
  }

  static InvertedIndex load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open index file: " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("magic"))
      throw FormatError("index file is corrupt or not an index: " + path);
    if (j["magic"] != kMagic)
      throw FormatError("index file has wrong magic header: " + path);
    if (!j.contains("version") || !j["version"].is_number_integer() ||
        j["version"].get<int>() != kVersion)
      throw FormatError("index file has unsupported version (expected " +
                        std::to_string(kVersion) + "): " + path);
    InvertedIndex idx;
    idx.params_.k1 = j.at("k1").get<double>();
    idx.params_.b = j.at("b").get<double>();
    for (const auto& [pid, len] : j.at("doc_lengths").items())
      idx.doc_lengths_[pid] = len.get<std::size_t>();
    for (const auto& [term, arr] : j.at("postings").items()) {
      std::vector<Posting>& list = idx.postings_[term];
      for (const auto& entry : arr)
        list.push_back({entry.at(0).get<std::string>(), entry.at(1).get<std::size_t>()});
    }
    idx.recompute_stats();
    return idx;
  }

 private:
  void recompute_stats() {
    double total = 0.0;
    for (const auto& [pid, len] : doc_lengths_) total += static_cast<double>(len);
    avg_doc_len_ = doc_lengths_.empty() ? 0.0 : total / static_cast<double>(doc_lengths_.size());
  }

  std::map<std::string, std::vector<Posting>> postings_;
  std::unordered_map<std::string, std::size_t> doc_lengths_;
  double avg_doc_len_ = 0.0;
  Bm25Params params_;
};

inline InvertedIndex build_index(const std::vector<Passage>& passages, Bm25Params params = {}) {
  return InvertedIndex::build(passages, params);
}

}  // namespace mpqa
