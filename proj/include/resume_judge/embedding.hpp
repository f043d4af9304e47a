#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "resume_judge/corpus.hpp"
#include "resume_judge/types.hpp"

namespace resume_judge {

/// Raw (unnormalised) embedding of one resume.
class EmbeddingVector {
 public:
  /// Throws ValidationError if `values` is empty or has a non-finite entry.
  EmbeddingVector(std::vector<double> values, std::string model_id);

  std::size_t dim() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  const std::string& model_id() const { return model_id_; }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  std::vector<double> values_;
  std::string model_id_;
};

/// Embeddings for a corpus, kept in insertion (corpus) order.
class CorpusEmbedding {
 public:
  explicit CorpusEmbedding(std::string model_id) : model_id_(std::move(model_id)) {}

  /// Throws ValidationError on duplicate id, dim mismatch or model mismatch.
  void add(ResumeId id, EmbeddingVector vector);

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  std::size_t dim() const { return vectors_.empty() ? 0 : vectors_.front().dim(); }
  const std::string& model_id() const { return model_id_; }
  const std::vector<ResumeId>& ids() const { return ids_; }
  const std::vector<EmbeddingVector>& vectors() const { return vectors_; }

  bool contains(const ResumeId& id) const { return index_.count(id) != 0; }
  /// Throws LookupError for unknown ids.
  const EmbeddingVector& at(const ResumeId& id) const;
  std::size_t index_of(const ResumeId& id) const;

  /// Entries for `ids` only, in this embedding's order. Unknown ids throw.
  CorpusEmbedding subset(const std::vector<ResumeId>& ids) const;

 private:
  std::string model_id_;
  std::vector<ResumeId> ids_;
  std::vector<EmbeddingVector> vectors_;
  std::unordered_map<ResumeId, std::size_t> index_;
};

/// Cosine similarity. Throws ValidationError on dim mismatch or a zero vector.
double cosine(std::span<const double> a, std::span<const double> b);
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

/// Component-wise mean of every entry. Throws ValidationError when empty.
EmbeddingVector mean_vector(const CorpusEmbedding& ce);

/// Cosine between the resume's vector and the corpus mean (the mean includes
/// the resume itself). Throws LookupError for unknown ids.
double centroid_similarity(const ResumeId& id, const CorpusEmbedding& ce);

/// centroid_similarity for every entry, in corpus order.
std::vector<double> centroid_similarities(const CorpusEmbedding& ce);

// ---------------------------------------------------------------------------
// Producing embeddings

/// Version tag of the record-to-text serialization. Bump when it changes.
inline constexpr const char* kSerializationVersion = "qa-v1";

/// Text submitted to the embedder: applied position, then each Q/A pair.
std::string serialize_for_embedding(const ResumeRecord& record);

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual const std::string& model_id() const = 0;
  /// One vector per text. Throws EndpointError on failure.
  virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
  std::uint64_t calls() const { return calls_.load(); }

 protected:
  void count_call() { ++calls_; }

 private:
  std::atomic<std::uint64_t> calls_{0};
};

/// Deterministic feature-hashing embedder: each token (word, or CJK character
/// bigram) adds a seeded pseudo-random direction. Similar texts get similar
/// vectors; no network.
class MockEmbeddingBackend final : public EmbeddingBackend {
 public:
  MockEmbeddingBackend(std::size_t dim, std::uint64_t seed, std::string model_id = "mock-embedding");
  const std::string& model_id() const override { return model_id_; }
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
  std::string model_id_;
};

/// OpenAI-compatible `/embeddings` client: {model, input:[text]} ->
/// {data:[{embedding:[...]}]}.
class HttpEmbeddingBackend final : public EmbeddingBackend {
 public:
  HttpEmbeddingBackend(std::string endpoint_url, std::string model_id, std::string api_key,
                       double timeout_s);
  const std::string& model_id() const override { return model_id_; }
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

 private:
  std::string endpoint_url_;
  std::string model_id_;
  std::string api_key_;
  double timeout_s_;
};

struct EmbedOptions {
  std::filesystem::path cache_dir;  // empty disables the cache
  std::size_t max_concurrency = 4;
  int max_retries = 3;
};

struct EmbedResult {
  CorpusEmbedding embedding;
  std::size_t from_cache = 0;
  std::size_t computed = 0;
};

/// Embeds every record, reusing cached vectors keyed by (id, model,
/// serialization version, text digest). Identical texts within a run share
/// one request. Throws EndpointError if any record stays unembedded.
EmbedResult embed_corpus(const std::vector<ResumeRecord>& records, EmbeddingBackend& backend,
                         const EmbedOptions& options = {});

/// Line-delimited {id, model_id, embedding} export for downstream analysis.
void write_embedding_export(const std::filesystem::path& path, const CorpusEmbedding& ce);
CorpusEmbedding read_embedding_export(const std::filesystem::path& path);

}  // namespace resume_judge
