#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "mpqa/aggregate.hpp"
#include "mpqa/corpus.hpp"
#include "mpqa/eval.hpp"
#include "mpqa/ranker.hpp"
#include "mpqa/retrieval.hpp"
#include "mpqa/scorer.hpp"

// End-to-end flow: retrieve -> rerank -> score -> normalize -> combine ->
// merge, plus the passage-count sweep harness.

namespace mpqa {

enum class RankerKind { Bm25, ScorerLogit, Linear };

struct PipelineConfig {
  ChunkingPolicy chunking;  // defaults: sliding window 100/50
  Bm25Params bm25;
  std::string scorer = "lexical";  // "lexical" or "remote"
  std::string remote_host = "127.0.0.1";
  int remote_port = 8080;
  RankerKind ranker = RankerKind::ScorerLogit;
  std::string ranker_model_path;  // required when ranker == Linear
  NormalizationMode mode = NormalizationMode::Global;
  bool use_passage_scores = true;
  std::size_t k_retrieve = 100;
  std::size_t k_rerank = 30;
  std::size_t max_span_len = 30;
  std::size_t top_n = 10;
  uint64_t seed = 0;
};

inline std::string to_string(ChunkingMode m) {
  switch (m) {
    case ChunkingMode::FixedLength: return "fixed";
    case ChunkingMode::SlidingWindow: return "sliding";
    case ChunkingMode::SingleSentence: return "sentence";
  }
  return "?";
}

inline std::string to_string(NormalizationMode m) {
  return m == NormalizationMode::Global ? "global" : "per-passage";
}

inline std::string to_string(RankerKind r) {
  switch (r) {
    case RankerKind::Bm25: return "bm25";
    case RankerKind::ScorerLogit: return "scorer";
    case RankerKind::Linear: return "linear";
  }
  return "?";
}

inline nlohmann::json config_to_json(const PipelineConfig& c) {
  nlohmann::json j;
  j["chunking"] = {{"mode", to_string(c.chunking.mode)},
                   {"length", c.chunking.length},
                   {"stride", c.chunking.stride}};
  j["bm25"] = {{"k1", c.bm25.k1}, {"b", c.bm25.b}};
  j["scorer"] = c.scorer;
  j["remote_host"] = c.remote_host;
  j["remote_port"] = c.remote_port;
  j["ranker"] = to_string(c.ranker);
  j["ranker_model_path"] = c.ranker_model_path;
  j["mode"] = to_string(c.mode);
  j["use_passage_scores"] = c.use_passage_scores;
  j["k_retrieve"] = c.k_retrieve;
  j["k_rerank"] = c.k_rerank;
  j["max_span_len"] = c.max_span_len;
  j["top_n"] = c.top_n;
  j["seed"] = c.seed;
  return j;
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  if (j.contains("chunking")) {
    const auto& ch = j["chunking"];
    std::string mode = ch.value("mode", "sliding");
    if (mode == "fixed") c.chunking.mode = ChunkingMode::FixedLength;
    else if (mode == "sliding") c.chunking.mode = ChunkingMode::SlidingWindow;
    else if (mode == "sentence") c.chunking.mode = ChunkingMode::SingleSentence;
    else throw std::runtime_error("config: unknown chunking.mode '" + mode + "'");
    c.chunking.length = ch.value("length", c.chunking.length);
    c.chunking.stride = ch.value("stride", c.chunking.stride);
  }
  if (j.contains("bm25")) {
    c.bm25.k1 = j["bm25"].value("k1", c.bm25.k1);
    c.bm25.b = j["bm25"].value("b", c.bm25.b);
  }
  c.scorer = j.value("scorer", c.scorer);
  if (c.scorer != "lexical" && c.scorer != "remote")
    throw std::runtime_error("config: unknown scorer '" + c.scorer + "'");
  c.remote_host = j.value("remote_host", c.remote_host);
  c.remote_port = j.value("remote_port", c.remote_port);
  std::string ranker = j.value("ranker", "scorer");
  if (ranker == "bm25") c.ranker = RankerKind::Bm25;
  else if (ranker == "scorer") c.ranker = RankerKind::ScorerLogit;
  else if (ranker == "linear") c.ranker = RankerKind::Linear;
  else throw std::runtime_error("config: unknown ranker '" + ranker + "'");
  c.ranker_model_path = j.value("ranker_model_path", "");
  std::string mode = j.value("mode", "global");
  if (mode == "global") c.mode = NormalizationMode::Global;
  else if (mode == "per-passage") c.mode = NormalizationMode::PerPassage;
  else throw std::runtime_error("config: unknown mode '" + mode + "'");
  c.use_passage_scores = j.value("use_passage_scores", c.use_passage_scores);
  c.k_retrieve = j.value("k_retrieve", c.k_retrieve);
  c.k_rerank = j.value("k_rerank", c.k_rerank);
  c.max_span_len = j.value("max_span_len", c.max_span_len);
  c.top_n = j.value("top_n", c.top_n);
  c.seed = j.value("seed", c.seed);
  if (c.k_rerank > c.k_retrieve)
    throw std::runtime_error("config: k_rerank must be <= k_retrieve");
  if (c.k_retrieve < 1 || c.k_rerank < 1 || c.max_span_len < 1 || c.top_n < 1)
    throw std::runtime_error("config: all counts must be >= 1");
  return c;
}

struct QuestionAnswer {
  std::string question_id;
  bool no_passages = false;
  std::vector<AnswerGroup> groups;  // top_n merged groups, best first

  // Raw surface of the best supporting candidate of the top group.
  std::string top_answer() const {
    if (groups.empty()) return "";
    const AnswerGroup& g = groups.front();
    const AnswerCandidate* best = nullptr;
    for (const AnswerCandidate& c : g.supporting)
      if (!best || c.score > best->score ||
          (c.score == best->score && c.passage_id < best->passage_id))
        best = &c;
    return best ? best->text : "";
  }
};

class Pipeline {
 public:
  Pipeline(std::vector<Document> docs, PipelineConfig config, std::shared_ptr<Scorer> scorer,
           LinearRankerModel ranker_model = {})
      : docs_(std::move(docs)),
        config_(std::move(config)),
        scorer_(std::move(scorer)),
        ranker_model_(ranker_model) {
    for (const Document& d : docs_) {
      doc_texts_[d.doc_id] = d.text;
      passages_storage_.push_back(chunk(d, config_.chunking));
    }
    for (auto& vec : passages_storage_)
      for (Passage& p : vec) passage_by_id_[p.passage_id] = &p;
    std::vector<Passage> all;
    for (const auto& vec : passages_storage_) all.insert(all.end(), vec.begin(), vec.end());
    index_ = build_index(all, config_.bm25);
  }

  // Use a previously persisted index instead of rebuilding. The index must
  // have been built from the same corpus and chunking policy.
  void use_index(InvertedIndex index) {
    for (const auto& [pid, len] : index.doc_lengths())
      if (!passage_by_id_.count(pid))
        throw std::runtime_error("pipeline: index passage '" + pid +
                                 "' not present in corpus (corpus/config mismatch)");
    index_ = std::move(index);
  }

  const InvertedIndex& index() const { return index_; }
  const PipelineConfig& config() const { return config_; }
  PipelineConfig& config() { return config_; }
  const std::unordered_map<std::string, const Passage*>& passages() const {
    return passage_by_id_;
  }

  QuestionAnswer answer_question(const std::string& question_id,
                                 const std::string& question_text) const {
    QuestionAnswer qa;
    qa.question_id = question_id;

    std::vector<RetrievalHit> hits = index_.retrieve(question_text, config_.k_retrieve);
    if (hits.empty()) {
      qa.no_passages = true;
      return qa;
    }

    std::vector<Token> qtokens = tokenize(question_text);

    // Score once, reuse for both reranking (passage_logit) and reading.
    std::unordered_map<std::string, SpanLogits> logits_by_id;
    auto score_passage = [&](const std::string& pid) -> const SpanLogits& {
      auto it = logits_by_id.find(pid);
      if (it != logits_by_id.end()) return it->second;
      const Passage& p = *passage_by_id_.at(pid);
      SpanLogits logits = scorer_->score(qtokens, p);
      validate_span_logits(logits, p.tokens.size());
      return logits_by_id.emplace(pid, std::move(logits)).first->second;
    };

    auto ranker_logit = [&](const RetrievalHit& h) -> double {
      switch (config_.ranker) {
        case RankerKind::Bm25:
          return h.score;
        case RankerKind::ScorerLogit:
          return score_passage(h.passage_id).passage_logit;
        case RankerKind::Linear:
          return ranker_model_.score(
              extract_features(qtokens, *passage_by_id_.at(h.passage_id), h.score));
      }
      throw std::logic_error("pipeline: unknown ranker kind");
    };

    RerankResult rerank = rerank_topk(hits, ranker_logit, config_.k_rerank, question_id);

    std::vector<SpanLogits> all_logits;
    all_logits.reserve(rerank.passage_ids.size());
    for (const std::string& pid : rerank.passage_ids) all_logits.push_back(score_passage(pid));

    SpanDistribution dist = config_.mode == NormalizationMode::Global
                                ? normalize_global(all_logits)
                                : normalize_per_passage(all_logits, false);

    std::size_t pool = config_.top_n * std::max<std::size_t>(1, all_logits.size());
    std::vector<AnswerCandidate> candidates =
        enumerate_spans(dist, passage_by_id_, doc_texts_, config_.max_span_len, pool);

    if (config_.use_passage_scores) {
      for (AnswerCandidate& c : candidates) c = combine_passage_score(c, rerank.posterior);
    }

    qa.groups = merge_answers(candidates);
    if (qa.groups.size() > config_.top_n) qa.groups.resize(config_.top_n);
    return qa;
  }

 private:
  std::vector<Document> docs_;
  PipelineConfig config_;
  std::shared_ptr<Scorer> scorer_;
  LinearRankerModel ranker_model_;
  std::vector<std::vector<Passage>> passages_storage_;
  std::unordered_map<std::string, const Passage*> passage_by_id_;
  std::unordered_map<std::string, std::string> doc_texts_;
  InvertedIndex index_;
};

struct SweepModeSpec {
  NormalizationMode mode;
  bool use_passage_scores;

  std::string label() const {
    return to_string(mode) + (use_passage_scores ? "+scores" : "");
  }
};

struct SweepConfig {
  std::vector<std::size_t> passage_counts;  // ascending, >= 1
  std::vector<SweepModeSpec> modes = {{NormalizationMode::PerPassage, false},
                                      {NormalizationMode::PerPassage, true},
                                      {NormalizationMode::Global, false},
                                      {NormalizationMode::Global, true}};
  uint64_t seed = 0;
};

struct SweepRow {
  std::string mode;
  std::size_t k = 0;
  double em = 0.0;
  double f1 = 0.0;
  std::size_t n = 0;
  bool clamped = false;  // some question had fewer than k passages
};

// Run the pipeline over the dataset for every (mode, k) and report EM/F1.
inline std::vector<SweepRow> sweep_passages(Pipeline& pipeline,
                                            const std::vector<QuestionRecord>& dataset,
                                            const SweepConfig& sweep) {
  if (sweep.passage_counts.empty())
    throw std::invalid_argument("sweep_passages: empty passage_counts");
  for (std::size_t i = 0; i < sweep.passage_counts.size(); ++i) {
    if (sweep.passage_counts[i] < 1 ||
        (i > 0 && sweep.passage_counts[i] <= sweep.passage_counts[i - 1]))
      throw std::invalid_argument("sweep_passages: passage_counts must be ascending and >= 1");
  }

  PipelineConfig saved = pipeline.config();
  std::vector<SweepRow> rows;
  for (const SweepModeSpec& mode : sweep.modes) {
    for (std::size_t k : sweep.passage_counts) {
      pipeline.config() = saved;
      pipeline.config().mode = mode.mode;
      pipeline.config().use_passage_scores = mode.use_passage_scores;
      pipeline.config().k_rerank = std::min(k, saved.k_retrieve);
      pipeline.config().seed = sweep.seed;

      SweepRow row;
      row.mode = mode.label();
      row.k = k;
      row.n = dataset.size();
      std::unordered_map<std::string, std::string> predictions;
      for (const QuestionRecord& q : dataset) {
        QuestionAnswer qa = pipeline.answer_question(q.question_id, q.text);
        predictions[q.question_id] = qa.top_answer();
        if (!qa.no_passages) {
          // Detect clamping: fewer retrieved passages than requested k.
          std::size_t got = pipeline.index().retrieve(q.text, k).size();
          if (got < k) row.clamped = true;
        } else {
          row.clamped = true;
        }
      }
      MetricReport report = evaluate_dataset(predictions, dataset);
      row.em = report.em;
      row.f1 = report.f1;
      rows.push_back(row);
    }
  }
  pipeline.config() = saved;
  return rows;
}

inline std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::string out = "mode,k,em,f1,n\n";
  char buf[160];
  for (const SweepRow& row : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%zu,%.6f,%.6f,%zu\n", row.mode.c_str(), row.k, row.em,
                  row.f1, row.n);
    out += buf;
  }
  return out;
}

}  // namespace mpqa
