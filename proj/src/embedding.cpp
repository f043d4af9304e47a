#include "resume_judge/embedding.hpp"

#include <cctype>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "resume_judge/digest.hpp"
#include "resume_judge/error.hpp"
#include "resume_judge/http.hpp"
#include "resume_judge/random.hpp"

namespace resume_judge {

using nlohmann::json;
namespace fs = std::filesystem;

EmbeddingVector::EmbeddingVector(std::vector<double> values, std::string model_id)
    : values_(std::move(values)), model_id_(std::move(model_id)) {
  if (values_.empty()) {
    throw ValidationError("embedding vector has zero dimensions");
  }
  if (!std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); })) {
    throw ValidationError("embedding vector has a non-finite entry");
  }
}

void CorpusEmbedding::add(ResumeId id, EmbeddingVector vector) {
  if (vector.model_id() != model_id_) {
    throw ValidationError("embedding model mismatch: " + vector.model_id() + " vs " + model_id_);
  }
  if (!vectors_.empty() && vector.dim() != dim()) {
    throw ValidationError("embedding dim mismatch for " + id);
  }
  if (!index_.emplace(id, ids_.size()).second) {
    throw ValidationError("duplicate embedding id " + id);
  }
  ids_.push_back(std::move(id));
  vectors_.push_back(std::move(vector));
}

std::size_t CorpusEmbedding::index_of(const ResumeId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw LookupError("no embedding for resume " + id);
  }
  return it->second;
}

const EmbeddingVector& CorpusEmbedding::at(const ResumeId& id) const { return vectors_[index_of(id)]; }

CorpusEmbedding CorpusEmbedding::subset(const std::vector<ResumeId>& ids) const {
  std::vector<std::size_t> idx;
  idx.reserve(ids.size());
  for (const auto& id : ids) idx.push_back(index_of(id));
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  CorpusEmbedding out(model_id_);
  for (auto i : idx) out.add(ids_[i], vectors_[i]);
  return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ValidationError("cosine: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw ValidationError("cosine: zero vector");
  }
  const double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) { return cosine(a.values(), b.values()); }

EmbeddingVector mean_vector(const CorpusEmbedding& ce) {
  if (ce.empty()) {
    throw ValidationError("mean_vector: empty corpus");
  }
  std::vector<double> mean(ce.dim(), 0.0);
  for (const auto& v : ce.vectors()) {
    auto vals = v.values();
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += vals[i];
  }
  const auto n = static_cast<double>(ce.size());
  for (auto& m : mean) m /= n;
  return EmbeddingVector(std::move(mean), ce.model_id());
}

double centroid_similarity(const ResumeId& id, const CorpusEmbedding& ce) {
  const auto& v = ce.at(id);
  return cosine(v, mean_vector(ce));
}

std::vector<double> centroid_similarities(const CorpusEmbedding& ce) {
  const auto mean = mean_vector(ce);
  std::vector<double> out;
  out.reserve(ce.size());
  for (const auto& v : ce.vectors()) out.push_back(cosine(v, mean));
  return out;
}

std::string serialize_for_embedding(const ResumeRecord& record) {
  std::string out = "[position]\n" + record.applied_position + "\n";
  for (const auto& qa : record.items) {
    out += "[question]\n" + qa.question + "\n[answer]\n" + qa.answer + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string word;
  std::string prev_cjk;
  auto flush_word = [&] {
    if (!word.empty()) tokens.push_back(std::move(word));
    word.clear();
  };
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c < 0x80) {
      prev_cjk.clear();
      if (std::isalnum(c)) {
        word.push_back(static_cast<char>(std::tolower(c)));
      } else {
        flush_word();
      }
      ++i;
      continue;
    }
    flush_word();
    std::size_t len = (c & 0xE0) == 0xC0 ? 2 : (c & 0xF0) == 0xE0 ? 3 : (c & 0xF8) == 0xF0 ? 4 : 1;
    len = std::min(len, text.size() - i);
    std::string ch = text.substr(i, len);
    if (!prev_cjk.empty()) tokens.push_back(prev_cjk + ch);
    prev_cjk = std::move(ch);
    i += len;
  }
  flush_word();
  return tokens;
}

}  // namespace

MockEmbeddingBackend::MockEmbeddingBackend(std::size_t dim, std::uint64_t seed, std::string model_id)
    : dim_(dim), seed_(seed), model_id_(std::move(model_id)) {
  if (dim_ == 0) {
    throw ValidationError("mock embedding dim must be positive");
  }
}

std::vector<std::vector<double>> MockEmbeddingBackend::embed(const std::vector<std::string>& texts) {
  count_call();
  constexpr int kTouchesPerToken = 4;
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    std::vector<double> v(dim_, 0.0);
    v[0] = 1e-3;  // keeps empty texts away from the zero vector
    for (const auto& tok : tokenize(text)) {
      std::mt19937_64 rng(derive_seed(seed_, tok));
      for (int k = 0; k < kTouchesPerToken; ++k) {
        const auto d = uniform_index(rng, dim_);
        v[d] += (rng() & 1U) ? 1.0 : -1.0;
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

HttpEmbeddingBackend::HttpEmbeddingBackend(std::string endpoint_url, std::string model_id,
                                           std::string api_key, double timeout_s)
    : endpoint_url_(std::move(endpoint_url)),
      model_id_(std::move(model_id)),
      api_key_(std::move(api_key)),
      timeout_s_(timeout_s) {}

std::vector<std::vector<double>> HttpEmbeddingBackend::embed(const std::vector<std::string>& texts) {
  count_call();
  const auto ep = http::parse_endpoint(endpoint_url_);
  const json body = {{"model", model_id_}, {"input", texts}};
  const auto res = http::post_json(ep, "/embeddings", body, api_key_, timeout_s_);
  if (res.status != 200) {
    throw EndpointError("embeddings endpoint returned HTTP " + std::to_string(res.status));
  }
  std::vector<std::vector<double>> out;
  try {
    const auto j = json::parse(res.body);
    for (const auto& item : j.at("data")) {
      out.push_back(item.at("embedding").get<std::vector<double>>());
    }
  } catch (const json::exception& e) {
    throw EndpointError(std::string("malformed embeddings response: ") + e.what());
  }
  if (out.size() != texts.size()) {
    throw EndpointError("embeddings response has " + std::to_string(out.size()) + " vectors for " +
                        std::to_string(texts.size()) + " inputs");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cache: <dir>/manifest.json + <dir>/<id>.vec
//   .vec layout: "RJV1" | u32 dim | 64-byte hex text digest | dim x f64 (LE)

namespace {

constexpr char kMagic[4] = {'R', 'J', 'V', '1'};

class VectorCache {
 public:
  VectorCache(fs::path dir, const std::string& model_id) : dir_(std::move(dir)) {
    if (dir_.empty()) return;
    fs::create_directories(dir_);
    const json want = {{"model_id", model_id}, {"serialization_version", kSerializationVersion}};
    const auto manifest = dir_ / "manifest.json";
    bool valid = false;
    if (fs::exists(manifest)) {
      std::ifstream in(manifest);
      try {
        valid = json::parse(in) == want;
      } catch (const json::exception&) {
        valid = false;
      }
    }
    if (!valid) {
      for (const auto& entry : fs::directory_iterator(dir_)) {
        if (entry.path().extension() == ".vec") fs::remove(entry.path());
      }
      std::ofstream out(manifest, std::ios::trunc);
      out << want.dump(2) << '\n';
    }
  }

  std::optional<std::vector<double>> load(const ResumeId& id, const std::string& text_digest) const {
    if (dir_.empty()) return std::nullopt;
    std::ifstream in(dir_ / (id + ".vec"), std::ios::binary);
    if (!in) return std::nullopt;
    char magic[4];
    std::uint32_t dim = 0;
    char digest[64];
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
    in.read(digest, 64);
    if (!in || std::memcmp(magic, kMagic, 4) != 0 || std::string(digest, 64) != text_digest || dim == 0) {
      return std::nullopt;
    }
    std::vector<double> v(dim);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(dim * sizeof(double)));
    if (!in) return std::nullopt;
    return v;
  }

  void store(const ResumeId& id, const std::string& text_digest, const std::vector<double>& v) {
    if (dir_.empty()) return;
    static_assert(std::endian::native == std::endian::little, "cache format assumes little-endian");
    std::lock_guard lock(mu_);
    const auto tmp = dir_ / (id + ".vec.tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      const auto dim = static_cast<std::uint32_t>(v.size());
      out.write(kMagic, 4);
      out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
      out.write(text_digest.data(), 64);
      out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
      if (!out) {
        throw IoError("cannot write embedding cache entry " + tmp.string());
      }
    }
    fs::rename(tmp, dir_ / (id + ".vec"));
  }

 private:
  fs::path dir_;
  std::mutex mu_;
};

}  // namespace

EmbedResult embed_corpus(const std::vector<ResumeRecord>& records, EmbeddingBackend& backend,
                         const EmbedOptions& options) {
  if (records.empty()) {
    throw ValidationError("embed_corpus: no records");
  }
  VectorCache cache(options.cache_dir, backend.model_id());

  const auto n = records.size();
  std::vector<std::string> texts(n), digests(n);
  std::vector<std::optional<std::vector<double>>> vectors(n);
  EmbedResult result{CorpusEmbedding(backend.model_id())};

  // Unique texts that still need a request, and which records share each.
  std::map<std::string, std::vector<std::size_t>> pending;
  for (std::size_t i = 0; i < n; ++i) {
    texts[i] = serialize_for_embedding(records[i]);
    digests[i] = sha256_hex(texts[i]);
    vectors[i] = cache.load(records[i].id, digests[i]);
    if (vectors[i]) {
      ++result.from_cache;
    } else {
      pending[digests[i]].push_back(i);
    }
  }

  std::vector<const std::vector<std::size_t>*> jobs;
  for (const auto& [digest, members] : pending) jobs.push_back(&members);

  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::vector<std::string> errors;

  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const auto& members = *jobs[j];
      const auto first = members.front();
      std::string last_error;
      for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
        try {
          auto out = backend.embed({texts[first]});
          if (out.size() != 1) throw EndpointError("expected one vector");
          for (auto i : members) {
            vectors[i] = out.front();
            cache.store(records[i].id, digests[i], out.front());
          }
          last_error.clear();
          break;
        } catch (const EndpointError& e) {
          last_error = e.what();
        }
      }
      if (!last_error.empty()) {
        std::lock_guard lock(err_mu);
        for (auto i : members) errors.push_back(records[i].id + ": " + last_error);
      }
    }
  };

  const auto n_threads = std::max<std::size_t>(1, std::min(options.max_concurrency, jobs.size()));
  if (!jobs.empty()) {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  if (!errors.empty()) {
    std::sort(errors.begin(), errors.end());
    for (const auto& e : errors) spdlog::error("embedding failed for {}", e);
    throw EndpointError(std::to_string(errors.size()) + " record(s) could not be embedded; first: " +
                        errors.front());
  }

  for (std::size_t i = 0; i < n; ++i) {
    result.embedding.add(records[i].id, EmbeddingVector(std::move(*vectors[i]), backend.model_id()));
  }
  for (const auto& [digest, members] : pending) result.computed += members.size();
  return result;
}

void write_embedding_export(const fs::path& path, const CorpusEmbedding& ce) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  for (std::size_t i = 0; i < ce.size(); ++i) {
    auto vals = ce.vectors()[i].values();
    const json j = {{"id", ce.ids()[i]},
                    {"model_id", ce.model_id()},
                    {"embedding", std::vector<double>(vals.begin(), vals.end())}};
    out << j.dump() << '\n';
  }
}

CorpusEmbedding read_embedding_export(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot read " + path.string());
  }
  std::optional<CorpusEmbedding> ce;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    const auto model = j.at("model_id").get<std::string>();
    if (!ce) ce.emplace(model);
    ce->add(j.at("id").get<std::string>(), EmbeddingVector(j.at("embedding").get<std::vector<double>>(), model));
  }
  if (!ce) {
    throw ValidationError("embedding export " + path.string() + " is empty");
  }
  return std::move(*ce);
}

}  // namespace resume_judge
