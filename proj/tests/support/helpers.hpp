#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <span>
#include <deque>
#include <filesystem>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "resume_judge/corpus.hpp"
#include "resume_judge/embedding.hpp"
#include "resume_judge/judge.hpp"
#include "resume_judge/types.hpp"

namespace rj_test {

namespace rj = resume_judge;

inline rj::ResumeRecord make_record(const std::string& id, const std::string& position = "Engineer",
                                    const std::string& answer = "") {
  rj::ResumeRecord r;
  r.id = id;
  r.applied_position = position;
  const auto text = answer.empty() ? "Answer text for " + id + " describing a long project in some detail." : answer;
  r.items.push_back({"Why do you want to join us?", text, rj::utf8_length(text)});
  return r;
}

inline std::vector<rj::ResumeRecord> make_records(std::size_t n, const std::string& prefix = "r") {
  std::vector<rj::ResumeRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%03zu", prefix.c_str(), i);
    out.push_back(make_record(buf));
  }
  return out;
}

inline rj::CorpusEmbedding embedding_of(const std::vector<std::string>& ids,
                                        const std::vector<std::vector<double>>& points,
                                        const std::string& model = "test-model") {
  rj::CorpusEmbedding ce(model);
  for (std::size_t i = 0; i < ids.size(); ++i) ce.add(ids[i], rj::EmbeddingVector(points[i], model));
  return ce;
}

inline rj::CorpusEmbedding random_embedding(const std::vector<rj::ResumeRecord>& records, std::size_t dim,
                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  rj::CorpusEmbedding ce("test-model");
  for (const auto& r : records) {
    std::vector<double> v(dim);
    for (auto& x : v) x = nd(rng);
    v[0] += 3.0;  // keep the mean away from the origin
    ce.add(r.id, rj::EmbeddingVector(std::move(v), "test-model"));
  }
  return ce;
}

inline rj::GroundTruthSet ground_truth_of(const std::string& model, const std::vector<std::string>& ids,
                                          const std::vector<rj::Label>& labels) {
  rj::GroundTruthSet gt;
  gt.model_id = model;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    gt.labels[ids[i]] = labels[i];
    const int base = labels[i] == rj::Label::High ? 7 : 3;
    gt.dim_scores[ids[i]] = {base, base, base};
  }
  return gt;
}

/// Replies from a queue; the last reply repeats once the queue is drained.
class ScriptedChatBackend final : public rj::ChatBackend {
 public:
  explicit ScriptedChatBackend(std::vector<std::string> replies) : replies_(replies.begin(), replies.end()) {}

  rj::ChatReply complete(const rj::ChatRequest& request) override {
    count_call();
    std::lock_guard lock(mu_);
    requests.push_back(request.messages);
    std::string text = replies_.front();
    if (replies_.size() > 1) replies_.pop_front();
    return {text, 0.5};
  }

  std::vector<std::vector<rj::ChatMessage>> requests;

 private:
  std::mutex mu_;
  std::deque<std::string> replies_;
};

/// Fails the first `failures` calls with a transport error, then delegates.
class FlakyChatBackend final : public rj::ChatBackend {
 public:
  FlakyChatBackend(int failures, std::uint64_t seed) : failures_(failures), inner_(seed) {}

  rj::ChatReply complete(const rj::ChatRequest& request) override {
    count_call();
    if (failures_-- > 0) throw rj::EndpointError("connection refused");
    return inner_.complete(request);
  }

 private:
  std::atomic<int> failures_;
  rj::MockChatBackend inner_;
};

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("rj-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace rj_test

namespace rj_test {

struct Blobs {
  rj::CorpusEmbedding ce{"blobs"};
  std::vector<int> blob_of;  // per corpus entry
  std::vector<std::vector<double>> centers;
};

/// `k` Gaussian blobs in `dim` dimensions, `per_blob` points each, centers
/// `separation` apart along distinct axes, unit within-blob std.
inline Blobs make_blobs(std::size_t k, std::size_t per_blob, std::size_t dim, double separation,
                        std::uint64_t seed) {
  Blobs b;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> center(dim, 0.0);
    center[c % dim] = separation * static_cast<double>(1 + c / dim);
    b.centers.push_back(center);
  }
  std::size_t idx = 0;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < per_blob; ++i, ++idx) {
      std::vector<double> v(dim);
      for (std::size_t d = 0; d < dim; ++d) v[d] = b.centers[c][d] + nd(rng);
      char id[32];
      std::snprintf(id, sizeof(id), "p%03zu", idx);
      b.ce.add(id, rj::EmbeddingVector(std::move(v), "blobs"));
      b.blob_of.push_back(static_cast<int>(c));
    }
  }
  return b;
}

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

/// Brute-force centroid-similarity ranking: long-double mean and cosine,
/// full sort by (similarity desc, id asc).
inline std::vector<std::string> oracle_ranking(const rj::CorpusEmbedding& ce) {
  const auto dim = ce.dim();
  std::vector<long double> mean(dim, 0.0L);
  for (const auto& v : ce.vectors()) {
    for (std::size_t d = 0; d < dim; ++d) mean[d] += v.values()[d];
  }
  for (auto& m : mean) m /= static_cast<long double>(ce.size());
  std::vector<std::pair<long double, std::string>> scored;
  for (std::size_t i = 0; i < ce.size(); ++i) {
    long double dot = 0, nv = 0, nm = 0;
    for (std::size_t d = 0; d < dim; ++d) {
      const long double x = ce.vectors()[i].values()[d];
      dot += x * mean[d];
      nv += x * x;
      nm += mean[d] * mean[d];
    }
    scored.emplace_back(dot / (std::sqrt(nv) * std::sqrt(nm)), ce.ids()[i]);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::string> out;
  for (auto& s : scored) out.push_back(s.second);
  return out;
}

}  // namespace rj_test
