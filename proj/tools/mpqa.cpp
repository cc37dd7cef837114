// Command-line front end: index / retrieve / answer / train-ranker / eval / sweep.

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mpqa/aggregate.hpp"
#include "mpqa/corpus.hpp"
#include "mpqa/eval.hpp"
#include "mpqa/pipeline.hpp"
#include "mpqa/ranker.hpp"
#include "mpqa/remote_scorer.hpp"
#include "mpqa/retrieval.hpp"
#include "mpqa/scorer.hpp"

namespace {

using nlohmann::json;

mpqa::PipelineConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw std::runtime_error("config file is not valid JSON: " + path);
  return mpqa::config_from_json(j);
}

std::shared_ptr<mpqa::Scorer> make_scorer(const mpqa::PipelineConfig& config) {
  if (config.scorer == "remote")
    return std::make_shared<mpqa::RemoteScorer>(config.remote_host, config.remote_port);
  return std::make_shared<mpqa::LexicalScorer>();
}

void write_output(const std::string& out_path, const std::string& content) {
  if (out_path.empty() || out_path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write output file: " + out_path);
  out << content;
}

void apply_overrides(mpqa::PipelineConfig& config, const std::string& mode,
                     const std::string& passage_scores, int k, long long seed) {
  if (mode == "global") config.mode = mpqa::NormalizationMode::Global;
  else if (mode == "per-passage") config.mode = mpqa::NormalizationMode::PerPassage;
  else if (!mode.empty()) throw std::runtime_error("unknown --mode '" + mode + "'");
  if (passage_scores == "on") config.use_passage_scores = true;
  else if (passage_scores == "off") config.use_passage_scores = false;
  else if (!passage_scores.empty())
    throw std::runtime_error("unknown --passage-scores '" + passage_scores + "'");
  if (k > 0) config.k_rerank = static_cast<std::size_t>(k);
  if (seed >= 0) config.seed = static_cast<uint64_t>(seed);
}

mpqa::Pipeline build_pipeline(const mpqa::PipelineConfig& config, const std::string& corpus_path,
                              const std::string& index_path) {
  auto docs = mpqa::read_corpus_file(corpus_path);
  mpqa::LinearRankerModel model;
  if (config.ranker == mpqa::RankerKind::Linear) {
    if (config.ranker_model_path.empty())
      throw std::runtime_error("config: ranker 'linear' requires ranker_model_path");
    model = mpqa::LinearRankerModel::load(config.ranker_model_path);
  }
  mpqa::Pipeline pipeline(std::move(docs), config, make_scorer(config), model);
  if (!index_path.empty()) pipeline.use_index(mpqa::InvertedIndex::load(index_path));
  return pipeline;
}

int cmd_index(const std::string& config_path, const std::string& corpus_path,
              const std::string& index_path) {
  mpqa::PipelineConfig config = load_config(config_path);
  auto docs = mpqa::read_corpus_file(corpus_path);
  std::vector<mpqa::Passage> passages;
  for (const auto& d : docs) {
    auto ps = mpqa::chunk(d, config.chunking);
    passages.insert(passages.end(), ps.begin(), ps.end());
  }
  mpqa::InvertedIndex index = mpqa::build_index(passages, config.bm25);
  index.save(index_path);
  std::cerr << "indexed " << docs.size() << " documents into " << index.passage_count()
            << " passages -> " << index_path << "\n";
  return 0;
}

int cmd_retrieve(const std::string& index_path, const std::string& dataset_path, int k,
                 const std::string& out_path) {
  mpqa::InvertedIndex index = mpqa::InvertedIndex::load(index_path);
  auto dataset = mpqa::read_dataset_file(dataset_path);
  std::ostringstream out;
  for (const auto& q : dataset) {
    auto hits = index.retrieve(q.text, static_cast<std::size_t>(k));
    json rec;
    rec["question_id"] = q.question_id;
    rec["hits"] = json::array();
    for (const auto& h : hits)
      rec["hits"].push_back({{"passage_id", h.passage_id}, {"score", h.score}, {"rank", h.rank}});
    out << rec.dump() << "\n";
  }
  write_output(out_path, out.str());
  std::cerr << "retrieved top-" << k << " for " << dataset.size() << " questions\n";
  return 0;
}

int cmd_answer(const std::string& config_path, const std::string& corpus_path,
               const std::string& index_path, const std::string& dataset_path,
               const std::string& out_path, const std::string& mode,
               const std::string& passage_scores, int k, long long seed) {
  mpqa::PipelineConfig config = load_config(config_path);
  apply_overrides(config, mode, passage_scores, k, seed);
  mpqa::Pipeline pipeline = build_pipeline(config, corpus_path, index_path);
  auto dataset = mpqa::read_dataset_file(dataset_path);

  std::ostringstream out;
  for (const auto& q : dataset) {
    mpqa::QuestionAnswer qa = pipeline.answer_question(q.question_id, q.text);
    json rec;
    rec["question_id"] = q.question_id;
    if (qa.no_passages) {
      rec["answer"] = "";
      rec["score"] = 0.0;
      rec["supporting"] = json::array();
      rec["no_passages"] = true;
    } else {
      rec["answer"] = qa.top_answer();
      rec["score"] = qa.groups.empty() ? 0.0 : qa.groups.front().total_score;
      json sup = json::array();
      if (!qa.groups.empty())
        for (const auto& c : qa.groups.front().supporting) sup.push_back(c.passage_id);
      rec["supporting"] = std::move(sup);
    }
    out << rec.dump() << "\n";
  }
  write_output(out_path, out.str());
  std::cerr << "answered " << dataset.size() << " questions\n";
  return 0;
}

// Training data: line-delimited {"question_id", "features": [5 reals], "positive": bool}.
int cmd_train_ranker(const std::string& dataset_path, const std::string& out_path,
                     std::size_t epochs, double lr, long long seed) {
  std::ifstream in(dataset_path);
  if (!in) throw std::runtime_error("cannot open training file: " + dataset_path);
  std::map<std::string, mpqa::RankerInstance> by_question;
  std::vector<std::string> order;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw std::runtime_error("training line " + std::to_string(lineno) + ": malformed JSON");
    std::string qid = j.at("question_id").get<std::string>();
    auto feats = j.at("features").get<std::vector<double>>();
    if (feats.size() != mpqa::kFeatureDim)
      throw std::runtime_error("training line " + std::to_string(lineno) + ": expected " +
                               std::to_string(mpqa::kFeatureDim) + " features");
    if (!by_question.count(qid)) order.push_back(qid);
    auto& inst = by_question[qid];
    inst.question_id = qid;
    mpqa::FeatureVector f{};
    std::copy(feats.begin(), feats.end(), f.begin());
    inst.features.push_back(f);
    inst.positive_mask.push_back(j.at("positive").get<bool>());
  }
  std::vector<mpqa::RankerInstance> dataset;
  for (const auto& qid : order) dataset.push_back(by_question.at(qid));

  mpqa::TrainConfig tc;
  tc.epochs = epochs;
  tc.learning_rate = lr;
  tc.seed = seed >= 0 ? static_cast<uint64_t>(seed) : 0;
  mpqa::LinearRankerModel model = mpqa::train_linear_ranker(dataset, tc);
  model.save(out_path);
  std::cerr << "trained on " << dataset.size() << " questions, final mean loss "
            << model.final_loss << " -> " << out_path << "\n";
  return 0;
}

int cmd_eval(const std::string& dataset_path, const std::string& predictions_path,
             const std::string& out_path) {
  auto dataset = mpqa::read_dataset_file(dataset_path);
  std::ifstream in(predictions_path);
  if (!in) throw std::runtime_error("cannot open predictions file: " + predictions_path);
  std::unordered_map<std::string, std::string> predictions;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw std::runtime_error("predictions file: malformed JSON line");
    predictions[j.at("question_id").get<std::string>()] = j.at("answer").get<std::string>();
  }
  mpqa::MetricReport report = mpqa::evaluate_dataset(predictions, dataset);
  json rec;
  rec["em"] = report.em;
  rec["f1"] = report.f1;
  rec["n_questions"] = report.n_questions;
  write_output(out_path, rec.dump() + "\n");
  char buf[128];
  std::snprintf(buf, sizeof(buf), "EM %.2f  F1 %.2f  (n=%zu)\n", report.em, report.f1,
                report.n_questions);
  std::cerr << buf;
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& corpus_path,
              const std::string& index_path, const std::string& dataset_path,
              const std::string& k_list, const std::string& out_path, long long seed) {
  mpqa::PipelineConfig config = load_config(config_path);
  if (seed >= 0) config.seed = static_cast<uint64_t>(seed);
  mpqa::Pipeline pipeline = build_pipeline(config, corpus_path, index_path);
  auto dataset = mpqa::read_dataset_file(dataset_path);

  mpqa::SweepConfig sweep;
  sweep.seed = config.seed;
  std::istringstream ks(k_list);
  std::string item;
  while (std::getline(ks, item, ','))
    if (!item.empty()) sweep.passage_counts.push_back(std::stoul(item));

  auto rows = mpqa::sweep_passages(pipeline, dataset, sweep);
  write_output(out_path, mpqa::sweep_to_csv(rows));
  for (const auto& row : rows)
    if (row.clamped)
      std::cerr << "note: " << row.mode << " k=" << row.k
                << ": some questions had fewer than k passages\n";
  std::cerr << "sweep: " << rows.size() << " rows\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-domain QA pipeline: BM25 retrieval, passage reranking, span scoring "
               "with per-passage or global normalization"};
  app.require_subcommand(0, 1);

  bool dump_config = false;
  app.add_flag("--dump-config", dump_config, "print the default config as JSON and exit");

  std::string config_path, corpus_path, index_path, dataset_path, out_path;
  std::string predictions_path, mode, passage_scores, k_list = "1,5,10,20,30";
  int k = 0;
  long long seed = -1;
  std::size_t epochs = 200;
  double lr = 0.1;

  auto* c_index = app.add_subcommand("index", "build and persist a BM25 passage index");
  c_index->add_option("--config", config_path);
  c_index->add_option("--corpus", corpus_path)->required();
  c_index->add_option("--index", index_path, "output index file")->required();

  auto* c_retrieve = app.add_subcommand("retrieve", "top-k BM25 retrieval for each question");
  c_retrieve->add_option("--index", index_path)->required();
  c_retrieve->add_option("--dataset", dataset_path)->required();
  c_retrieve->add_option("--k", k)->default_val(30);
  c_retrieve->add_option("--out", out_path);

  auto* c_answer = app.add_subcommand("answer", "end-to-end question answering");
  c_answer->add_option("--config", config_path);
  c_answer->add_option("--corpus", corpus_path)->required();
  c_answer->add_option("--index", index_path, "optional prebuilt index");
  c_answer->add_option("--dataset", dataset_path)->required();
  c_answer->add_option("--out", out_path);
  c_answer->add_option("--mode", mode, "per-passage|global");
  c_answer->add_option("--passage-scores", passage_scores, "on|off");
  c_answer->add_option("--k", k, "passages read per question (k_rerank)");
  c_answer->add_option("--seed", seed);

  auto* c_train = app.add_subcommand("train-ranker", "train the linear passage ranker");
  c_train->add_option("--dataset", dataset_path, "line-delimited feature records")->required();
  c_train->add_option("--out", out_path, "output model file")->required();
  c_train->add_option("--epochs", epochs)->default_val(200);
  c_train->add_option("--lr", lr)->default_val(0.1);
  c_train->add_option("--seed", seed);

  auto* c_eval = app.add_subcommand("eval", "EM/F1 of predictions against gold answers");
  c_eval->add_option("--dataset", dataset_path)->required();
  c_eval->add_option("--predictions", predictions_path)->required();
  c_eval->add_option("--out", out_path);

  auto* c_sweep = app.add_subcommand("sweep", "accuracy vs passage count, all modes");
  c_sweep->add_option("--config", config_path);
  c_sweep->add_option("--corpus", corpus_path)->required();
  c_sweep->add_option("--index", index_path, "optional prebuilt index");
  c_sweep->add_option("--dataset", dataset_path)->required();
  c_sweep->add_option("--k-list", k_list, "comma-separated passage counts");
  c_sweep->add_option("--out", out_path);
  c_sweep->add_option("--seed", seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (dump_config) {
      std::cout << mpqa::config_to_json(mpqa::PipelineConfig{}).dump(2) << "\n";
      return 0;
    }
    if (c_index->parsed()) return cmd_index(config_path, corpus_path, index_path);
    if (c_retrieve->parsed()) return cmd_retrieve(index_path, dataset_path, k, out_path);
    if (c_answer->parsed())
      return cmd_answer(config_path, corpus_path, index_path, dataset_path, out_path, mode,
                        passage_scores, k, seed);
    if (c_train->parsed()) return cmd_train_ranker(dataset_path, out_path, epochs, lr, seed);
    if (c_eval->parsed()) return cmd_eval(dataset_path, predictions_path, out_path);
    if (c_sweep->parsed())
      return cmd_sweep(config_path, corpus_path, index_path, dataset_path, k_list, out_path,
                       seed);
    std::cerr << app.help();
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
