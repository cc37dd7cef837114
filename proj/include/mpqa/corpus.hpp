#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

// Document ingestion, whitespace tokenization with exact byte offsets, and
// passage chunking (fixed-length, sliding-window, single-sentence).

namespace mpqa {

struct Token {
  std::string surface;
  std::size_t char_start = 0;  // byte offset into Document::text, inclusive
  std::size_t char_end = 0;    // exclusive
};

struct Document {
  std::string doc_id;
  std::string title;
  std::string text;
};

struct Passage {
  std::string passage_id;
  std::string doc_id;
  std::vector<Token> tokens;
  std::size_t word_start = 0;  // index of tokens[0] in the document word sequence
};

enum class ChunkingMode { FixedLength, SlidingWindow, SingleSentence };

struct ChunkingPolicy {
  ChunkingMode mode = ChunkingMode::SlidingWindow;
  std::size_t length = 100;
  std::size_t stride = 50;
};

namespace detail {

// Decodes the UTF-8 codepoint at byte position i; advances i past it.
// Malformed bytes are consumed one at a time and returned as-is.
inline uint32_t decode_utf8(const std::string& s, std::size_t& i) {
  unsigned char c = static_cast<unsigned char>(s[i]);
  if (c < 0x80) {
    ++i;
    return c;
  }
  int extra = 0;
  uint32_t cp = 0;
  if ((c & 0xE0) == 0xC0) {
    cp = c & 0x1F;
    extra = 1;
  } else if ((c & 0xF0) == 0xE0) {
    cp = c & 0x0F;
    extra = 2;
  } else if ((c & 0xF8) == 0xF0) {
    cp = c & 0x07;
    extra = 3;
  } else {
    ++i;
    return c;
  }
  std::size_t j = i + 1;
  for (int k = 0; k < extra; ++k, ++j) {
    if (j >= s.size() || (static_cast<unsigned char>(s[j]) & 0xC0) != 0x80) {
      ++i;
      return c;
    }
    cp = (cp << 6) | (static_cast<unsigned char>(s[j]) & 0x3F);
  }
  i = j;
  return cp;
}

inline bool is_unicode_space(uint32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680:
    case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

}  // namespace detail

// Whitespace-delimited word tokens with exact byte offsets. Any Unicode
// whitespace codepoint is a delimiter; punctuation stays attached.
inline std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> out;
  std::size_t i = 0;
  std::size_t tok_start = std::string::npos;
  while (i < text.size()) {
    std::size_t pos = i;
    uint32_t cp = detail::decode_utf8(text, i);
    if (detail::is_unicode_space(cp)) {
      if (tok_start != std::string::npos) {
        out.push_back({text.substr(tok_start, pos - tok_start), tok_start, pos});
        tok_start = std::string::npos;
      }
    } else if (tok_start == std::string::npos) {
      tok_start = pos;
    }
  }
  if (tok_start != std::string::npos) {
    out.push_back({text.substr(tok_start, text.size() - tok_start), tok_start, text.size()});
  }
  return out;
}

inline std::string make_passage_id(const std::string& doc_id, std::size_t word_start) {
  return doc_id + "#" + std::to_string(word_start);
}

// Consecutive non-overlapping windows of `length` words; the last window may
// be shorter. Every word lands in exactly one passage.
inline std::vector<Passage> chunk_fixed(const Document& doc, std::size_t length) {
  if (length < 1) throw std::invalid_argument("chunk_fixed: length must be >= 1");
  std::vector<Token> words = tokenize(doc.text);
  std::vector<Passage> out;
  for (std::size_t start = 0; start < words.size(); start += length) {
    std::size_t end = std::min(start + length, words.size());
    Passage p;
    p.doc_id = doc.doc_id;
    p.word_start = start;
    p.passage_id = make_passage_id(doc.doc_id, start);
    p.tokens.assign(words.begin() + start, words.begin() + end);
    out.push_back(std::move(p));
  }
  return out;
}

// Overlapping windows starting at 0, stride, 2*stride, ...; generation stops
// with the first window whose end reaches the document end (clamped there).
inline std::vector<Passage> chunk_sliding(const Document& doc, std::size_t length,
                                          std::size_t stride) {
  if (stride < 1 || stride > length)
    throw std::invalid_argument("chunk_sliding: require 1 <= stride <= length");
  std::vector<Token> words = tokenize(doc.text);
  std::vector<Passage> out;
  if (words.empty()) return out;
  for (std::size_t start = 0;; start += stride) {
    std::size_t end = std::min(start + length, words.size());
    Passage p;
    p.doc_id = doc.doc_id;
    p.word_start = start;
    p.passage_id = make_passage_id(doc.doc_id, start);
    p.tokens.assign(words.begin() + start, words.begin() + end);
    out.push_back(std::move(p));
    if (start + length >= words.size()) break;
  }
  return out;
}

// One passage per sentence. A sentence ends at '.', '!' or '?' followed by
// whitespace or end-of-text; no abbreviation handling.
inline std::vector<Passage> chunk_sentences(const Document& doc) {
  std::vector<Token> words = tokenize(doc.text);
  std::vector<Passage> out;
  if (words.empty()) return out;

  const std::string& text = doc.text;
  // Sentence end byte positions (exclusive of the terminator's successor).
  std::vector<std::size_t> ends;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == '.' || c == '!' || c == '?') {
      if (i + 1 == text.size() ||
          detail::is_unicode_space(static_cast<unsigned char>(text[i + 1]))) {
        ends.push_back(i + 1);
      }
    }
  }
  ends.push_back(text.size());

  std::size_t w = 0;
  for (std::size_t e : ends) {
    std::size_t first = w;
    while (w < words.size() && words[w].char_end <= e) ++w;
    if (w == first) continue;  // no tokens in this stretch
    Passage p;
    p.doc_id = doc.doc_id;
    p.word_start = first;
    p.passage_id = make_passage_id(doc.doc_id, first);
    p.tokens.assign(words.begin() + first, words.begin() + w);
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<Passage> chunk(const Document& doc, const ChunkingPolicy& policy) {
  switch (policy.mode) {
    case ChunkingMode::FixedLength:
      return chunk_fixed(doc, policy.length);
    case ChunkingMode::SlidingWindow:
      return chunk_sliding(doc, policy.length, policy.stride);
    case ChunkingMode::SingleSentence:
      return chunk_sentences(doc);
  }
  throw std::logic_error("chunk: unknown mode");
}

// Line-delimited corpus: one JSON object per line with fields {id, title, text}.
// Documents whose text is empty after trimming are rejected.
inline std::vector<Document> read_corpus(std::istream& in) {
  std::vector<Document> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw std::runtime_error("corpus line " + std::to_string(lineno) + ": malformed JSON");
    Document d;
    d.doc_id = j.at("id").get<std::string>();
    d.title = j.value("title", "");
    d.text = j.at("text").get<std::string>();
    if (tokenize(d.text).empty())
      throw std::runtime_error("corpus line " + std::to_string(lineno) + ": document '" +
                               d.doc_id + "' has empty text");
    docs.push_back(std::move(d));
  }
  return docs;
}

inline std::vector<Document> read_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  return read_corpus(in);
}

}  // namespace mpqa
