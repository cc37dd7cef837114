#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "mpqa/corpus.hpp"

// SQuAD-style answer normalization and EM/F1 metrics.

namespace mpqa {

struct QuestionRecord {
  std::string question_id;
  std::string text;
  std::vector<std::string> gold_answers;  // non-empty
};

struct QuestionMetrics {
  std::string question_id;
  double em = 0.0;  // 0 or 1
  double f1 = 0.0;  // in [0,1]
};

struct MetricReport {
  double em = 0.0;  // percentage in [0,100]
  double f1 = 0.0;
  std::size_t n_questions = 0;
  std::vector<QuestionMetrics> per_question;
};

namespace detail {

// Punctuation codepoints removed by answer normalization: ASCII punctuation
// plus the common General Punctuation block (dashes, curly quotes, ellipsis).
inline bool is_norm_punct(uint32_t cp) {
  if (cp < 0x80)
    return std::ispunct(static_cast<int>(cp)) != 0;
  return (cp >= 0x2010 && cp <= 0x2027) || (cp >= 0x2030 && cp <= 0x205E) ||
         cp == 0xA1 || cp == 0xBF || cp == 0xAB || cp == 0xBB;
}

}  // namespace detail

// Lowercase, strip punctuation, drop whole-token articles (a/an/the),
// collapse whitespace. Idempotent.
inline std::string normalize_answer(const std::string& s) {
  std::string stripped;
  stripped.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t pos = i;
    uint32_t cp = detail::decode_utf8(s, i);
    if (detail::is_norm_punct(cp)) continue;
    if (cp < 0x80) {
      stripped.push_back(static_cast<char>(std::tolower(static_cast<int>(cp))));
    } else {
      stripped.append(s, pos, i - pos);
    }
  }
  std::istringstream tokens(stripped);
  std::string tok, out;
  while (tokens >> tok) {
    if (tok == "a" || tok == "an" || tok == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

inline std::vector<std::string> normalized_tokens(const std::string& s) {
  std::istringstream in(normalize_answer(s));
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

// Token-level F1 between normalized token multisets of a single (prediction,
// gold) pair. Both empty after normalization counts as a perfect match.
inline double token_f1(const std::string& prediction, const std::string& gold) {
  std::vector<std::string> pred = normalized_tokens(prediction);
  std::vector<std::string> gtoks = normalized_tokens(gold);
  if (pred.empty() || gtoks.empty()) return pred.empty() == gtoks.empty() ? 1.0 : 0.0;
  std::map<std::string, std::size_t> gcount;
  for (const auto& t : gtoks) ++gcount[t];
  std::size_t common = 0;
  for (const auto& t : pred) {
    auto it = gcount.find(t);
    if (it != gcount.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  double precision = static_cast<double>(common) / static_cast<double>(pred.size());
  double recall = static_cast<double>(common) / static_cast<double>(gtoks.size());
  return 2.0 * precision * recall / (precision + recall);
}

// EM and F1 of a prediction against a set of gold answers (max over golds).
inline std::pair<int, double> em_f1(const std::string& prediction,
                                    const std::vector<std::string>& golds) {
  if (golds.empty()) throw std::invalid_argument("em_f1: golds must be non-empty");
  std::string norm_pred = normalize_answer(prediction);
  int em = 0;
  double f1 = 0.0;
  for (const std::string& gold : golds) {
    if (norm_pred == normalize_answer(gold)) em = 1;
    f1 = std::max(f1, token_f1(prediction, gold));
  }
  return {em, f1};
}

// Macro-averaged EM/F1 over a dataset. A record with no prediction scores as
// an empty string; a prediction for an unknown question_id is rejected.
inline MetricReport evaluate_dataset(
    const std::unordered_map<std::string, std::string>& predictions,
    const std::vector<QuestionRecord>& records) {
  std::unordered_map<std::string, bool> known;
  for (const auto& r : records) known[r.question_id] = true;
  for (const auto& [qid, pred] : predictions)
    if (!known.count(qid))
      throw std::invalid_argument("evaluate_dataset: prediction for unknown question_id '" +
                                  qid + "'");

  MetricReport report;
  double em_sum = 0.0, f1_sum = 0.0;
  for (const auto& r : records) {
    auto it = predictions.find(r.question_id);
    std::string pred = it == predictions.end() ? std::string() : it->second;
    auto [em, f1] = em_f1(pred, r.gold_answers);
    report.per_question.push_back({r.question_id, static_cast<double>(em), f1});
    em_sum += em;
    f1_sum += f1;
  }
  report.n_questions = records.size();
  if (!records.empty()) {
    report.em = 100.0 * em_sum / static_cast<double>(records.size());
    report.f1 = 100.0 * f1_sum / static_cast<double>(records.size());
  }
  return report;
}

// Simplified line-delimited dataset: {"question_id", "question", "answers": [...]}.
inline std::vector<QuestionRecord> read_dataset_jsonl(std::istream& in) {
  std::vector<QuestionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw std::runtime_error("dataset line " + std::to_string(lineno) + ": malformed JSON");
    QuestionRecord r;
    r.question_id = j.at("question_id").get<std::string>();
    r.text = j.at("question").get<std::string>();
    r.gold_answers = j.at("answers").get<std::vector<std::string>>();
    if (r.gold_answers.empty())
      throw std::runtime_error("dataset line " + std::to_string(lineno) +
                               ": empty answer list for '" + r.question_id + "'");
    out.push_back(std::move(r));
  }
  return out;
}

// SQuAD-style JSON: {"data": [{"paragraphs": [{"qas": [{"id", "question",
// "answers": [{"text": ...}]}]}]}]}.
inline std::vector<QuestionRecord> read_dataset_squad(std::istream& in) {
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.contains("data"))
    throw std::runtime_error("dataset: not a SQuAD-style JSON file");
  std::vector<QuestionRecord> out;
  for (const auto& article : j["data"])
    for (const auto& para : article.at("paragraphs"))
      for (const auto& qa : para.at("qas")) {
        QuestionRecord r;
        r.question_id = qa.at("id").get<std::string>();
        r.text = qa.at("question").get<std::string>();
        for (const auto& ans : qa.at("answers"))
          r.gold_answers.push_back(ans.at("text").get<std::string>());
        if (r.gold_answers.empty())
          throw std::runtime_error("dataset: question '" + r.question_id + "' has no answers");
        out.push_back(std::move(r));
      }
  return out;
}

inline std::vector<QuestionRecord> read_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  char first = 0;
  in >> first;
  in.seekg(0);
  if (first == '{') {
    // Peek whether this is one SQuAD JSON document or JSONL of records.
    std::string line;
    std::getline(in, line);
    in.seekg(0);
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (!j.is_discarded() && j.is_object() && j.contains("question_id"))
      return read_dataset_jsonl(in);
    return read_dataset_squad(in);
  }
  return read_dataset_jsonl(in);
}

// Seeded random holdout split: returns (holdout of size n, remainder), both
// in original relative order.
inline std::pair<std::vector<QuestionRecord>, std::vector<QuestionRecord>> split_holdout(
    const std::vector<QuestionRecord>& records, std::size_t n, uint64_t seed) {
  if (n > records.size())
    throw std::invalid_argument("split_holdout: holdout larger than dataset");
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<char> held(records.size(), 0);
  for (std::size_t i = 0; i < n; ++i) held[order[i]] = 1;
  std::pair<std::vector<QuestionRecord>, std::vector<QuestionRecord>> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    (held[i] ? out.first : out.second).push_back(records[i]);
  return out;
}

}  // namespace mpqa
