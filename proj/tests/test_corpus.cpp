#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>
#include <sstream>

#include "mpqa/corpus.hpp"
#include "oracles.hpp"

using namespace mpqa;

TEST_CASE("tokenize basic offsets") {
  auto toks = tokenize("a b  c");
  REQUIRE(toks.size() == 3);
  CHECK(toks[0].surface == "a");
  CHECK(toks[0].char_start == 0);
  CHECK(toks[0].char_end == 1);
  CHECK(toks[1].surface == "b");
  CHECK(toks[1].char_start == 2);
  CHECK(toks[1].char_end == 3);
  CHECK(toks[2].surface == "c");
  CHECK(toks[2].char_start == 5);
  CHECK(toks[2].char_end == 6);
}

TEST_CASE("tokenize empty input") {
  CHECK(tokenize("").empty());
  CHECK(tokenize("   \t\n ").empty());
}

TEST_CASE("tokenize keeps punctuation attached") {
  auto toks = tokenize("Hello, world");
  REQUIRE(toks.size() == 2);
  CHECK(toks[0].surface == "Hello,");
  CHECK(toks[0].char_start == 0);
  CHECK(toks[0].char_end == 6);
  CHECK(toks[1].surface == "world");
  CHECK(toks[1].char_start == 7);
  CHECK(toks[1].char_end == 12);
}

TEST_CASE("tokenize treats unicode whitespace as delimiter") {
  // U+00A0 no-break space and U+2003 em space
  std::string text = "a\xC2\xA0z et\xE2\x80\x83voila";
  auto toks = tokenize(text);
  REQUIRE(toks.size() == 4);
  CHECK(toks[0].surface == "a");
  CHECK(toks[1].surface == "z");
  CHECK(toks[2].surface == "et");
  CHECK(toks[3].surface == "voila");
}

TEST_CASE("tokenize offset round-trip on random text") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Document doc = oracle::random_document(rng, "d", 1, 200);
    for (const Token& t : tokenize(doc.text))
      CHECK(doc.text.substr(t.char_start, t.char_end - t.char_start) == t.surface);
  }
}

static Document doc_of_n_words(std::size_t n, const std::string& id = "doc") {
  std::string text;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) text += ' ';
    text += "w" + std::to_string(i);
  }
  return {id, "", text};
}

TEST_CASE("chunk_fixed sizes") {
  auto p = chunk_fixed(doc_of_n_words(250), 100);
  REQUIRE(p.size() == 3);
  CHECK(p[0].tokens.size() == 100);
  CHECK(p[1].tokens.size() == 100);
  CHECK(p[2].tokens.size() == 50);
  CHECK(p[0].word_start == 0);
  CHECK(p[1].word_start == 100);
  CHECK(p[2].word_start == 200);

  auto exact = chunk_fixed(doc_of_n_words(100), 100);
  REQUIRE(exact.size() == 1);
  CHECK(exact[0].word_start == 0);

  auto two = chunk_fixed(doc_of_n_words(250), 200);
  REQUIRE(two.size() == 2);
  CHECK(two[0].tokens.size() == 200);
  CHECK(two[1].tokens.size() == 50);
}

TEST_CASE("chunk_fixed partition property") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    Document doc = oracle::random_document(rng, "d", 1, 400);
    auto words = tokenize(doc.text);
    std::uniform_int_distribution<std::size_t> len(1, 120);
    auto passages = chunk_fixed(doc, len(rng));
    std::vector<Token> concat;
    for (const auto& p : passages)
      concat.insert(concat.end(), p.tokens.begin(), p.tokens.end());
    REQUIRE(concat.size() == words.size());
    for (std::size_t i = 0; i < words.size(); ++i) {
      CHECK(concat[i].surface == words[i].surface);
      CHECK(concat[i].char_start == words[i].char_start);
    }
  }
}

TEST_CASE("chunk_sliding window starts and clamping") {
  auto p = chunk_sliding(doc_of_n_words(250), 100, 50);
  REQUIRE(p.size() == 4);
  std::vector<std::size_t> starts, sizes;
  for (const auto& x : p) {
    starts.push_back(x.word_start);
    sizes.push_back(x.tokens.size());
  }
  CHECK(starts == std::vector<std::size_t>{0, 50, 100, 150});
  CHECK(sizes == std::vector<std::size_t>{100, 100, 100, 100});

  auto q = chunk_sliding(doc_of_n_words(230), 100, 50);
  REQUIRE(q.size() == 4);
  CHECK(q.back().word_start == 150);
  CHECK(q.back().tokens.size() == 80);

  auto s = chunk_sliding(doc_of_n_words(80), 100, 50);
  REQUIRE(s.size() == 1);
  CHECK(s[0].word_start == 0);
  CHECK(s[0].tokens.size() == 80);
}

TEST_CASE("chunk_sliding coverage and multiplicity") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    std::uniform_int_distribution<std::size_t> nd(1, 500);
    std::size_t n = nd(rng);
    Document doc = doc_of_n_words(n);
    std::uniform_int_distribution<std::size_t> ld(2, 120);
    std::size_t length = ld(rng);
    if (length % 2) ++length;
    std::size_t stride = length / 2;
    auto passages = chunk_sliding(doc, length, stride);

    std::vector<int> mult(n, 0);
    std::size_t last_start = passages.back().word_start;
    for (const auto& p : passages)
      for (std::size_t i = 0; i < p.tokens.size(); ++i) ++mult[p.word_start + i];
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(mult[i] >= 1);
      CHECK(mult[i] <= 2);
      if (i >= stride && i < last_start) CHECK(mult[i] == 2);
    }
  }
}

TEST_CASE("chunk_sentences splits on terminators") {
  Document d{"d", "", "A b. C d!"};
  auto p = chunk_sentences(d);
  REQUIRE(p.size() == 2);
  CHECK(p[0].tokens.size() == 2);
  CHECK(p[0].tokens[1].surface == "b.");
  CHECK(p[1].tokens[0].surface == "C");

  auto one = chunk_sentences({"d", "", "No terminator here"});
  REQUIRE(one.size() == 1);
  CHECK(one[0].tokens.size() == 3);

  auto three = chunk_sentences({"d", "", "X. Y. Z."});
  CHECK(three.size() == 3);
}

TEST_CASE("passage ids are deterministic") {
  Document d = doc_of_n_words(250);
  auto a = chunk_sliding(d, 100, 50);
  auto b = chunk_sliding(d, 100, 50);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].passage_id == b[i].passage_id);
  std::set<std::string> ids;
  for (const auto& p : a) ids.insert(p.passage_id);
  CHECK(ids.size() == a.size());
}

TEST_CASE("chunking precondition checks") {
  CHECK_THROWS_AS(chunk_fixed(doc_of_n_words(5), 0), std::invalid_argument);
  CHECK_THROWS_AS(chunk_sliding(doc_of_n_words(5), 10, 0), std::invalid_argument);
  CHECK_THROWS_AS(chunk_sliding(doc_of_n_words(5), 10, 11), std::invalid_argument);
}

TEST_CASE("read_corpus parses jsonl and rejects empty documents") {
  std::istringstream ok(R"({"id":"a","title":"T","text":"hello world"})"
                        "\n"
                        R"({"id":"b","text":"second doc"})"
                        "\n");
  auto docs = read_corpus(ok);
  REQUIRE(docs.size() == 2);
  CHECK(docs[0].doc_id == "a");
  CHECK(docs[0].title == "T");
  CHECK(docs[1].title.empty());

  std::istringstream empty_text(R"({"id":"a","text":"   "})"
                                "\n");
  CHECK_THROWS(read_corpus(empty_text));

  std::istringstream bad("not json\n");
  CHECK_THROWS(read_corpus(bad));
}
