#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "mpqa/corpus.hpp"
#include "mpqa/scorer.hpp"
#include "oracles.hpp"

using namespace mpqa;

namespace {

Passage make_passage(const std::string& id, const std::string& text) {
  Passage p;
  p.passage_id = id;
  p.doc_id = id;
  p.tokens = tokenize(text);
  return p;
}

}  // namespace

TEST_CASE("lexical_score hand example") {
  auto logits = lexical_score(tokenize("blue sky"), make_passage("p", "the sky is blue"));
  REQUIRE(logits.start_logits.size() == 5);
  REQUIRE(logits.end_logits.size() == 5);
  // token "sky" at index 1 -> start_logits[2]; window [1,6) holds sky,is,blue
  CHECK(logits.start_logits[2] == 5.0);
  CHECK(logits.start_logits[0] == 1.0);
  CHECK(logits.end_logits[0] == 1.0);
  CHECK(logits.passage_logit == 2.0);
}

TEST_CASE("lexical_score with zero overlap") {
  auto logits = lexical_score(tokenize("quantum physics"), make_passage("p", "cats like fish"));
  for (std::size_t i = 1; i < logits.start_logits.size(); ++i) {
    CHECK(logits.start_logits[i] == 0.0);
    CHECK(logits.end_logits[i] == 0.0);
  }
  CHECK(logits.start_logits[0] == 1.0);
  CHECK(logits.end_logits[0] == 1.0);
  CHECK(logits.passage_logit == 0.0);
}

TEST_CASE("lexical_score case-folds the match") {
  auto logits = lexical_score(tokenize("Sky"), make_passage("p", "SKY high"));
  CHECK(logits.start_logits[1] == 4.0);  // 3 + itself in window
  CHECK(logits.passage_logit == 1.0);
}

TEST_CASE("lexical_score is deterministic over random pairs") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    Document qd = oracle::random_document(rng, "q", 1, 8, 20);
    Document pd = oracle::random_document(rng, "p", 1, 40, 20);
    auto question = tokenize(qd.text);
    auto passage = make_passage("p", pd.text);
    auto a = lexical_score(question, passage);
    auto b = lexical_score(question, passage);
    CHECK(a.start_logits == b.start_logits);
    CHECK(a.end_logits == b.end_logits);
    CHECK(a.passage_logit == b.passage_logit);
    // Length and finiteness invariants at the boundary.
    REQUIRE_NOTHROW(validate_span_logits(a, passage.tokens.size()));
  }
}

TEST_CASE("lexical_score rejects empty passages") {
  Passage empty;
  empty.passage_id = "e";
  CHECK_THROWS_AS(lexical_score(tokenize("q"), empty), std::invalid_argument);
}

TEST_CASE("validate_span_logits enforces length and finiteness") {
  SpanLogits bad;
  bad.passage_id = "p";
  bad.start_logits = {1.0, 2.0};
  bad.end_logits = {1.0, 2.0, 3.0};
  CHECK_THROWS(validate_span_logits(bad, 2));

  SpanLogits inf;
  inf.passage_id = "p";
  inf.start_logits = {1.0, std::numeric_limits<double>::infinity()};
  inf.end_logits = {1.0, 0.0};
  CHECK_THROWS(validate_span_logits(inf, 1));
}
