#include <catch2/catch_amalgamated.hpp>

#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "mpqa/corpus.hpp"
#include "mpqa/remote_scorer.hpp"

using namespace mpqa;
using nlohmann::json;

namespace {

Passage make_passage(const std::string& id, const std::string& text) {
  Passage p;
  p.passage_id = id;
  p.doc_id = id;
  p.tokens = tokenize(text);
  return p;
}

// Serves /score on a background thread for one test's lifetime.
struct MockScorerServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  explicit MockScorerServer(std::function<json(const json&)> handler) {
    server.Post("/score", [handler](const httplib::Request& req, httplib::Response& res) {
      json body = json::parse(req.body);
      res.set_content(handler(body).dump(), "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~MockScorerServer() {
    server.stop();
    thread.join();
  }
};

}  // namespace

TEST_CASE("remote scorer passes through well-formed logits") {
  MockScorerServer mock([](const json& req) {
    std::size_t n = req.at("passage_tokens").size();
    json resp;
    resp["request_id"] = req.at("request_id");
    resp["start_logits"] = std::vector<double>(n + 1, 0.5);
    resp["end_logits"] = std::vector<double>(n + 1, -0.25);
    resp["passage_logit"] = 2.0;
    return resp;
  });

  RemoteScorer scorer("127.0.0.1", mock.port, 5.0);
  auto passage = make_passage("p", "one two three");
  auto logits = scorer.score(tokenize("a question"), passage);
  REQUIRE(logits.start_logits.size() == 4);
  CHECK(logits.start_logits[0] == 0.5);
  CHECK(logits.end_logits[3] == -0.25);
  CHECK(logits.passage_logit == 2.0);
  CHECK(logits.passage_id == "p");
}

TEST_CASE("remote scorer rejects wrong-length responses") {
  MockScorerServer mock([](const json& req) {
    std::size_t n = req.at("passage_tokens").size();
    json resp;
    resp["request_id"] = req.at("request_id");
    resp["start_logits"] = std::vector<double>(n, 0.0);  // missing the sentinel slot
    resp["end_logits"] = std::vector<double>(n, 0.0);
    resp["passage_logit"] = 0.0;
    return resp;
  });

  RemoteScorer scorer("127.0.0.1", mock.port, 5.0);
  CHECK_THROWS_AS(scorer.score(tokenize("q"), make_passage("p", "one two")), ProtocolError);
}

TEST_CASE("remote scorer rejects non-finite logits") {
  MockScorerServer mock([](const json& req) {
    std::size_t n = req.at("passage_tokens").size();
    std::vector<double> start(n + 1, 0.0);
    start[1] = std::numeric_limits<double>::infinity();
    json resp;
    resp["request_id"] = req.at("request_id");
    resp["start_logits"] = start;
    resp["end_logits"] = std::vector<double>(n + 1, 0.0);
    resp["passage_logit"] = 0.0;
    return resp;
  });

  RemoteScorer scorer("127.0.0.1", mock.port, 5.0);
  CHECK_THROWS_AS(scorer.score(tokenize("q"), make_passage("p", "one two")), ProtocolError);
}

TEST_CASE("remote scorer rejects request_id mismatch") {
  MockScorerServer mock([](const json& req) {
    std::size_t n = req.at("passage_tokens").size();
    json resp;
    resp["request_id"] = 999999;
    resp["start_logits"] = std::vector<double>(n + 1, 0.0);
    resp["end_logits"] = std::vector<double>(n + 1, 0.0);
    resp["passage_logit"] = 0.0;
    return resp;
  });

  RemoteScorer scorer("127.0.0.1", mock.port, 5.0);
  CHECK_THROWS_AS(scorer.score(tokenize("q"), make_passage("p", "one")), ProtocolError);
}

TEST_CASE("unreachable endpoint raises a transport error") {
  RemoteScorer scorer("127.0.0.1", 1, 0.5);  // port 1: nothing listens there
  CHECK_THROWS_AS(scorer.score(tokenize("q"), make_passage("p", "one")), TransportError);
}
