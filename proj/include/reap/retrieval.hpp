#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "reap/document.hpp"
#include "reap/errors.hpp"

namespace reap {

/// Lowercased maximal runs of ASCII alphanumerics.
std::vector<std::string> tokenize(std::string_view text);

struct IndexStats {
  size_t doc_count = 0;
  size_t total_tokens = 0;
  double avg_doc_length = 0.0;
  size_t vocabulary_size = 0;
};

/// In-memory inverted index scored with BM25 (k1 = 1.2, b = 0.75,
/// idf = ln((N - df + 0.5) / (df + 0.5))). Candidates are the documents
/// sharing at least one query term; unique query terms are accumulated in
/// sorted order so scores are reproducible bit for bit. Ties break by
/// ascending doc_id.
class CorpusIndex {
 public:
  static CorpusIndex from_documents(std::vector<Document> docs);
  /// JSONL, one {"id", "title", "contents"} object per line.
  static CorpusIndex ingest_file(const std::string& path);

  static CorpusIndex load(const std::string& path);
  void save(const std::string& path) const;

  std::vector<Document> lexical_search(const std::string& query, int top_k) const;
  IndexStats stats() const;
  size_t size() const { return docs_.size(); }
  const std::vector<Document>& documents() const { return docs_; }

  static constexpr double kBm25K1 = 1.2;
  static constexpr double kBm25B = 0.75;

 private:
  void add_document(Document doc, size_t source_line);
  void index_tokens(size_t doc_index);

  std::vector<Document> docs_;
  std::vector<size_t> doc_lengths_;
  std::map<std::string, std::vector<std::pair<size_t, size_t>>> postings_;  // term -> (doc index, tf)
  size_t total_tokens_ = 0;
};

class Retriever {
 public:
  virtual ~Retriever() = default;
  virtual std::vector<Document> retrieve(const std::string& query, int top_k) = 0;
};

class LexicalRetriever : public Retriever {
 public:
  explicit LexicalRetriever(std::shared_ptr<const CorpusIndex> index) : index_(std::move(index)) {}
  std::vector<Document> retrieve(const std::string& query, int top_k) override;

 private:
  std::shared_ptr<const CorpusIndex> index_;
};

/// Talks to an external search service: POST {"query", "top_k"} to the
/// endpoint, expects {"results": [{"id", "title", "contents", "score"}]}.
class RemoteRetriever : public Retriever {
 public:
  RemoteRetriever(std::string endpoint, int max_retries = 2, int timeout_seconds = 10);
  std::vector<Document> retrieve(const std::string& query, int top_k) override;

 private:
  std::string endpoint_;
  int max_retries_;
  int timeout_seconds_;
};

}  // namespace reap
