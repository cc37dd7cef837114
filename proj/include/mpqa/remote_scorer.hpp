#pragma once

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "mpqa/scorer.hpp"

// HTTP client for an external span scorer.
//
// Protocol: POST /score with a JSON body
//   {"request_id": <int>, "question_tokens": [...], "passage_tokens": [...]}
// The server answers
//   {"request_id": <same int>, "start_logits": [...], "end_logits": [...],
//    "passage_logit": <float>}
// where both logit arrays have length = passage token count + 1 (index 0 is
// the no-answer sentinel). A neural scorer that works on sub-word units must
// map its scores back to these word positions itself. The conventional
// encoder input ordering is passage first, then question.

namespace mpqa {

struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class RemoteScorer final : public Scorer {
 public:
  RemoteScorer(std::string host, int port, double timeout_seconds = 10.0)
      : host_(std::move(host)), port_(port), timeout_seconds_(timeout_seconds) {}

  SpanLogits score(const std::vector<Token>& question, const Passage& passage) override {
    const std::size_t expected = passage.tokens.size() + 1;
    const uint64_t request_id = next_request_id_.fetch_add(1);

    nlohmann::json req;
    req["request_id"] = request_id;
    req["question_tokens"] = nlohmann::json::array();
    for (const Token& t : question) req["question_tokens"].push_back(t.surface);
    req["passage_tokens"] = nlohmann::json::array();
    for (const Token& t : passage.tokens) req["passage_tokens"].push_back(t.surface);

    httplib::Client client(host_, port_);
    auto secs = static_cast<time_t>(timeout_seconds_);
    auto usecs = static_cast<time_t>((timeout_seconds_ - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);

    auto res = client.Post("/score", req.dump(), "application/json");
    if (!res)
      throw TransportError("remote scorer unreachable at " + host_ + ":" +
                           std::to_string(port_) + " (" + httplib::to_string(res.error()) + ")");
    if (res->status != 200)
      throw ProtocolError("remote scorer returned HTTP " + std::to_string(res->status));

    nlohmann::json resp = nlohmann::json::parse(res->body, nullptr, false);
    if (resp.is_discarded() || !resp.is_object())
      throw ProtocolError("remote scorer returned malformed JSON");
    if (!resp.contains("request_id") || resp["request_id"].get<uint64_t>() != request_id)
      throw ProtocolError("remote scorer response request_id mismatch");

    SpanLogits out;
    out.passage_id = passage.passage_id;
    try {
      out.start_logits = resp.at("start_logits").get<std::vector<double>>();
      out.end_logits = resp.at("end_logits").get<std::vector<double>>();
      out.passage_logit = resp.at("passage_logit").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError(std::string("remote scorer response fields invalid: ") + e.what());
    }

    if (out.start_logits.size() != expected || out.end_logits.size() != expected)
      throw ProtocolError("remote scorer length mismatch: expected " +
                          std::to_string(expected) + ", got start=" +
                          std::to_string(out.start_logits.size()) + " end=" +
                          std::to_string(out.end_logits.size()));
    try {
      validate_span_logits(out, passage.tokens.size());
    } catch (const std::runtime_error& e) {
      throw ProtocolError(e.what());
    }
    return out;
  }

 private:
  std::string host_;
  int port_;
  double timeout_seconds_;
  std::atomic<uint64_t> next_request_id_{1};
};

}  // namespace mpqa
