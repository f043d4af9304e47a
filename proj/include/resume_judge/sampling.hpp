#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "resume_judge/corpus.hpp"
#include "resume_judge/embedding.hpp"
#include "resume_judge/types.hpp"

namespace resume_judge {

enum class Strategy { Diversity, Similarity, Clustering };
enum class SampleType { HighOnly, HighAndLow };
enum class AttributeType { OverallOnly, OverallAndDimensions };
/// Where "high-quality" exemplars are drawn from.
enum class HighPool { GtHigh, FullCorpus };

std::string_view to_string(Strategy s);
std::string_view to_string(SampleType t);
std::string_view to_string(AttributeType a);
std::string_view to_string(HighPool p);
Strategy strategy_from_string(std::string_view s);
SampleType sample_type_from_string(std::string_view s);
AttributeType attribute_type_from_string(std::string_view s);
HighPool high_pool_from_string(std::string_view s);

struct SampleSpec {
  Strategy strategy = Strategy::Similarity;
  int n_shots = 3;
  SampleType sample_type = SampleType::HighOnly;
  AttributeType attribute_type = AttributeType::OverallOnly;
  double low_fraction = 0.3;
  std::uint64_t seed = 0;
  HighPool high_pool = HighPool::GtHigh;

  /// Throws ValidationError when the invariants do not hold.
  void validate() const;
  /// Short stable name, e.g. "similarity-n3-high_only-overall_only-s0".
  std::string key() const;
};

nlohmann::json to_json(const SampleSpec& spec);
SampleSpec sample_spec_from_json(const nlohmann::json& j);

struct FewShotExample {
  ResumeId resume_id;
  ResumeRecord record;
  Label overall = Label::High;
  std::optional<DimScores> dim_scores;
};

/// Corpus ids sorted by centroid similarity, descending; ties by id.
std::vector<ResumeId> rank_by_similarity(const CorpusEmbedding& ce);

/// 1-based ranks picked by the diversity strategy for a corpus of `corpus_size`.
/// Uses the ceil(|D|/N) interval, or evenly spaced ranks when the interval
/// would run past the end of the ranking.
std::vector<std::size_t> diversity_ranks(std::size_t corpus_size, std::size_t n);

std::vector<ResumeId> select_diversity(const CorpusEmbedding& ce, std::size_t n);
std::vector<ResumeId> select_similarity(const CorpusEmbedding& ce, std::size_t n);

struct ClusteringResult {
  std::vector<ResumeId> selected;               // one per cluster, cluster order
  std::vector<std::vector<double>> centroids;   // final centroids
  std::vector<std::size_t> assignment;          // cluster index per corpus entry
  int iterations = 0;
};

inline constexpr double kKMeansTolerance = 1e-6;
inline constexpr int kKMeansMaxIterations = 300;

/// k-means++ seeding plus Lloyd iterations; per cluster the member nearest to
/// its centroid (ties by id) is selected.
ClusteringResult cluster_and_select(const CorpusEmbedding& ce, std::size_t n, std::uint64_t seed);
std::vector<ResumeId> select_clustering(const CorpusEmbedding& ce, std::size_t n, std::uint64_t seed);

std::vector<ResumeId> select(Strategy strategy, const CorpusEmbedding& ce, std::size_t n, std::uint64_t seed);

/// floor(x + 1/2), tolerant to representation error just below a half.
long round_half_up(double x);

/// max(1, round_half_up(low_fraction * n)).
int low_quota(int n_shots, double low_fraction);

/// Builds the exemplar set: high exemplars by strategy, then (for mixed
/// sets) seeded uniform draws from the ground-truth Low pool. Labels and
/// dimension scores are copied from `gt`. Throws InfeasibleSpecError if a
/// pool is too small.
std::vector<FewShotExample> compose_sample_set(const SampleSpec& spec, const CorpusEmbedding& ce,
                                               const GroundTruthSet& gt,
                                               const std::vector<ResumeRecord>& records);

/// Auditable export of a composed set: spec, ids, attributes, seed.
nlohmann::json sample_set_to_json(const SampleSpec& spec, const std::string& gt_model_id,
                                  const std::vector<FewShotExample>& examples);
/// Replays an export against the corpus.
std::vector<FewShotExample> sample_set_from_json(const nlohmann::json& j, const std::vector<ResumeRecord>& records);

}  // namespace resume_judge
