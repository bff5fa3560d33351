#include "reap/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "httplib.h"

namespace reap {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const unsigned char u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) {
      current.push_back(static_cast<char>(std::tolower(u)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

void CorpusIndex::add_document(Document doc, size_t source_line) {
  for (const auto& existing : docs_) {
    if (existing.doc_id == doc.doc_id) {
      std::string where = source_line > 0 ? " (line " + std::to_string(source_line) + ")" : "";
      throw RetrievalError(RetrievalError::Kind::DuplicateDocId,
                           "duplicate doc id '" + doc.doc_id + "'" + where);
    }
  }
  docs_.push_back(std::move(doc));
  index_tokens(docs_.size() - 1);
}

void CorpusIndex::index_tokens(size_t doc_index) {
  const auto tokens = tokenize(docs_[doc_index].text);
  doc_lengths_.push_back(tokens.size());
  total_tokens_ += tokens.size();
  std::map<std::string, size_t> tf;
  for (const auto& token : tokens) ++tf[token];
  for (const auto& [term, count] : tf) postings_[term].emplace_back(doc_index, count);
}

CorpusIndex CorpusIndex::from_documents(std::vector<Document> docs) {
  CorpusIndex index;
  for (auto& doc : docs) index.add_document(std::move(doc), 0);
  return index;
}

CorpusIndex CorpusIndex::ingest_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw RetrievalError(RetrievalError::Kind::IoFailure, "cannot open corpus file '" + path + "'");
  CorpusIndex index;
  std::map<std::string, size_t> first_seen;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw RetrievalError(RetrievalError::Kind::MalformedRecord,
                           "line " + std::to_string(line_no) + ": not valid JSON: " + e.what());
    }
    if (!record.is_object() || !record.contains("id") || !record.contains("contents"))
      throw RetrievalError(RetrievalError::Kind::MalformedRecord,
                           "line " + std::to_string(line_no) + ": record needs 'id' and 'contents'");
    Document doc;
    try {
      doc.doc_id = record.at("id").get<std::string>();
      doc.title = record.value("title", std::string{});
      doc.text = record.at("contents").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw RetrievalError(RetrievalError::Kind::MalformedRecord,
                           "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (doc.doc_id.empty())
      throw RetrievalError(RetrievalError::Kind::MalformedRecord,
                           "line " + std::to_string(line_no) + ": empty doc id");
    auto [it, inserted] = first_seen.emplace(doc.doc_id, line_no);
    if (!inserted)
      throw RetrievalError(RetrievalError::Kind::DuplicateDocId,
                           "duplicate doc id '" + doc.doc_id + "' on lines " +
                               std::to_string(it->second) + " and " + std::to_string(line_no));
    index.add_document(std::move(doc), line_no);
  }
  return index;
}

CorpusIndex CorpusIndex::load(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw RetrievalError(RetrievalError::Kind::IoFailure, "cannot open index file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw RetrievalError(RetrievalError::Kind::MalformedRecord,
                         std::string("index file is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("documents") || !j.at("documents").is_array())
    throw RetrievalError(RetrievalError::Kind::MalformedRecord, "index file lacks a 'documents' array");
  CorpusIndex index;
  for (const auto& record : j.at("documents")) {
    Document doc;
    try {
      doc.doc_id = record.at("id").get<std::string>();
      doc.title = record.value("title", std::string{});
      doc.text = record.at("contents").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw RetrievalError(RetrievalError::Kind::MalformedRecord,
                           std::string("bad document record: ") + e.what());
    }
    index.add_document(std::move(doc), 0);
  }
  return index;
}

void CorpusIndex::save(const std::string& path) const {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["documents"] = nlohmann::ordered_json::array();
  for (const auto& doc : docs_) {
    nlohmann::ordered_json record;
    record["id"] = doc.doc_id;
    record["title"] = doc.title;
    record["contents"] = doc.text;
    j["documents"].push_back(std::move(record));
  }
  std::ofstream out(path);
  if (!out)
    throw RetrievalError(RetrievalError::Kind::IoFailure, "cannot write index file '" + path + "'");
  out << j.dump(2) << "\n";
  if (!out)
    throw RetrievalError(RetrievalError::Kind::IoFailure, "failed writing index file '" + path + "'");
}

std::vector<Document> CorpusIndex::lexical_search(const std::string& query, int top_k) const {
  if (docs_.empty())
    throw RetrievalError(RetrievalError::Kind::EmptyIndex, "lexical_search on an empty index");
  if (top_k <= 0) return {};

  std::set<std::string> terms;
  for (auto& token : tokenize(query)) terms.insert(std::move(token));

  const double n = static_cast<double>(docs_.size());
  const double avgdl = total_tokens_ > 0 ? static_cast<double>(total_tokens_) / n : 0.0;

  std::map<size_t, double> scores;  // doc index -> accumulated BM25
  for (const auto& term : terms) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const auto& posting = it->second;
    const double df = static_cast<double>(posting.size());
    const double idf = std::log((n - df + 0.5) / (df + 0.5));
    for (const auto& [doc_index, tf_count] : posting) {
      const double tf = static_cast<double>(tf_count);
      const double dl = static_cast<double>(doc_lengths_[doc_index]);
      const double norm = avgdl > 0.0 ? kBm25K1 * (1.0 - kBm25B + kBm25B * dl / avgdl) : kBm25K1;
      scores[doc_index] += idf * (tf * (kBm25K1 + 1.0)) / (tf + norm);
    }
  }

  std::vector<std::pair<size_t, double>> ranked(scores.begin(), scores.end());
  std::sort(ranked.begin(), ranked.end(), [this](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return docs_[a.first].doc_id < docs_[b.first].doc_id;
  });

  std::vector<Document> out;
  const size_t limit = std::min(ranked.size(), static_cast<size_t>(top_k));
  out.reserve(limit);
  for (size_t i = 0; i < limit; ++i) {
    Document doc = docs_[ranked[i].first];
    doc.score = ranked[i].second;
    out.push_back(std::move(doc));
  }
  return out;
}

IndexStats CorpusIndex::stats() const {
  IndexStats s;
  s.doc_count = docs_.size();
  s.total_tokens = total_tokens_;
  s.avg_doc_length = docs_.empty() ? 0.0 : static_cast<double>(total_tokens_) / static_cast<double>(docs_.size());
  s.vocabulary_size = postings_.size();
  return s;
}

std::vector<Document> LexicalRetriever::retrieve(const std::string& query, int top_k) {
  return index_->lexical_search(query, top_k);
}

namespace {

struct EndpointParts {
  std::string base;  // scheme://host:port
  std::string path;  // /search
};

EndpointParts split_endpoint(const std::string& endpoint) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos)
    throw RetrievalError(RetrievalError::Kind::RetrieverUnavailable,
                         "endpoint '" + endpoint + "' lacks a scheme");
  const auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

}  // namespace

RemoteRetriever::RemoteRetriever(std::string endpoint, int max_retries, int timeout_seconds)
    : endpoint_(std::move(endpoint)), max_retries_(max_retries), timeout_seconds_(timeout_seconds) {}

std::vector<Document> RemoteRetriever::retrieve(const std::string& query, int top_k) {
  const auto parts = split_endpoint(endpoint_);
  nlohmann::ordered_json body;
  body["query"] = query;
  body["top_k"] = top_k;
  const std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= max_retries_; ++attempt) {
    httplib::Client client(parts.base);
    client.set_connection_timeout(timeout_seconds_, 0);
    client.set_read_timeout(timeout_seconds_, 0);
    auto res = client.Post(parts.path, payload, "application/json");
    if (!res) {
      last_error = "no response from " + endpoint_;
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status) + " from " + endpoint_;
      continue;
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw RetrievalError(RetrievalError::Kind::MalformedResponse,
                           std::string("retriever response is not JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("results") || !j.at("results").is_array())
      throw RetrievalError(RetrievalError::Kind::MalformedResponse,
                           "retriever response lacks a 'results' array");
    std::vector<Document> docs;
    for (const auto& record : j.at("results")) {
      Document doc;
      try {
        doc.doc_id = record.at("id").get<std::string>();
        doc.title = record.value("title", std::string{});
        doc.text = record.at("contents").get<std::string>();
        if (record.contains("score")) doc.score = record.at("score").get<double>();
      } catch (const nlohmann::json::exception& e) {
        throw RetrievalError(RetrievalError::Kind::MalformedResponse,
                             std::string("bad result record: ") + e.what());
      }
      docs.push_back(std::move(doc));
    }
    return docs;
  }
  throw RetrievalError(RetrievalError::Kind::RetrieverUnavailable,
                       "retriever unreachable after " + std::to_string(max_retries_ + 1) +
                           " attempts: " + last_error);
}

}  // namespace reap
