#include "resume_judge/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "resume_judge/error.hpp"
#include "resume_judge/random.hpp"

namespace resume_judge {

using nlohmann::json;

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::Diversity:
      return "diversity";
    case Strategy::Similarity:
      return "similarity";
    case Strategy::Clustering:
      return "clustering";
  }
  return "?";
}

std::string_view to_string(SampleType t) {
  return t == SampleType::HighOnly ? "high_only" : "high_and_low";
}

std::string_view to_string(AttributeType a) {
  return a == AttributeType::OverallOnly ? "overall_only" : "overall_and_dimensions";
}

std::string_view to_string(HighPool p) { return p == HighPool::GtHigh ? "gt_high" : "full_corpus"; }

Strategy strategy_from_string(std::string_view s) {
  if (s == "diversity") return Strategy::Diversity;
  if (s == "similarity") return Strategy::Similarity;
  if (s == "clustering") return Strategy::Clustering;
  throw ValidationError("unknown sampling strategy: " + std::string(s));
}

SampleType sample_type_from_string(std::string_view s) {
  if (s == "high_only") return SampleType::HighOnly;
  if (s == "high_and_low") return SampleType::HighAndLow;
  throw ValidationError("unknown sample type: " + std::string(s));
}

AttributeType attribute_type_from_string(std::string_view s) {
  if (s == "overall_only") return AttributeType::OverallOnly;
  if (s == "overall_and_dimensions") return AttributeType::OverallAndDimensions;
  throw ValidationError("unknown attribute type: " + std::string(s));
}

HighPool high_pool_from_string(std::string_view s) {
  if (s == "gt_high") return HighPool::GtHigh;
  if (s == "full_corpus") return HighPool::FullCorpus;
  throw ValidationError("unknown high pool: " + std::string(s));
}

void SampleSpec::validate() const {
  if (n_shots < 1) {
    throw ValidationError("n_shots must be >= 1");
  }
  if (sample_type == SampleType::HighAndLow && !(low_fraction > 0.0 && low_fraction < 1.0)) {
    throw ValidationError("low_fraction must lie in (0, 1) for high_and_low samples");
  }
}

std::string SampleSpec::key() const {
  return std::string(to_string(strategy)) + "-n" + std::to_string(n_shots) + "-" +
         std::string(to_string(sample_type)) + "-" + std::string(to_string(attribute_type)) + "-s" +
         std::to_string(seed);
}

json to_json(const SampleSpec& spec) {
  return {{"strategy", to_string(spec.strategy)},
          {"n_shots", spec.n_shots},
          {"sample_type", to_string(spec.sample_type)},
          {"attribute_type", to_string(spec.attribute_type)},
          {"low_fraction", spec.low_fraction},
          {"seed", spec.seed},
          {"high_pool", to_string(spec.high_pool)}};
}

SampleSpec sample_spec_from_json(const json& j) {
  SampleSpec s;
  s.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  s.n_shots = j.at("n_shots").get<int>();
  s.sample_type = sample_type_from_string(j.at("sample_type").get<std::string>());
  s.attribute_type = attribute_type_from_string(j.at("attribute_type").get<std::string>());
  s.low_fraction = j.value("low_fraction", 0.3);
  s.seed = j.value("seed", std::uint64_t{0});
  s.high_pool = high_pool_from_string(j.value("high_pool", std::string("gt_high")));
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------

namespace {

void check_n(const CorpusEmbedding& ce, std::size_t n) {
  if (n < 1 || n > ce.size()) {
    throw ValidationError("cannot select " + std::to_string(n) + " of " + std::to_string(ce.size()) +
                          " resumes");
  }
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    d += t * t;
  }
  return d;
}

}  // namespace

std::vector<ResumeId> rank_by_similarity(const CorpusEmbedding& ce) {
  const auto sims = centroid_similarities(ce);
  std::vector<std::size_t> order(ce.size());
  std::iota(order.begin(), order.end(), 0);
  const auto& ids = ce.ids();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (sims[a] != sims[b]) return sims[a] > sims[b];
    return ids[a] < ids[b];
  });
  std::vector<ResumeId> ranked;
  ranked.reserve(order.size());
  for (auto i : order) ranked.push_back(ids[i]);
  return ranked;
}

std::vector<std::size_t> diversity_ranks(std::size_t corpus_size, std::size_t n) {
  if (n < 1 || n > corpus_size) {
    throw ValidationError("cannot select " + std::to_string(n) + " of " + std::to_string(corpus_size) +
                          " resumes");
  }
  std::vector<std::size_t> ranks;
  ranks.reserve(n);
  const std::size_t interval = (corpus_size + n - 1) / n;
  if (1 + (n - 1) * interval <= corpus_size) {
    for (std::size_t i = 0; i < n; ++i) ranks.push_back(1 + i * interval);
    return ranks;
  }
  // n >= 2 here: a single pick (rank 1) always fits.
  const double step = static_cast<double>(corpus_size - 1) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    ranks.push_back(static_cast<std::size_t>(round_half_up(1.0 + static_cast<double>(i) * step)));
  }
  return ranks;
}

std::vector<ResumeId> select_diversity(const CorpusEmbedding& ce, std::size_t n) {
  check_n(ce, n);
  const auto ranked = rank_by_similarity(ce);
  std::vector<ResumeId> out;
  for (auto r : diversity_ranks(ce.size(), n)) out.push_back(ranked[r - 1]);
  return out;
}

std::vector<ResumeId> select_similarity(const CorpusEmbedding& ce, std::size_t n) {
  check_n(ce, n);
  auto ranked = rank_by_similarity(ce);
  ranked.resize(n);
  return ranked;
}

ClusteringResult cluster_and_select(const CorpusEmbedding& ce, std::size_t k, std::uint64_t seed) {
  check_n(ce, k);
  const std::size_t n = ce.size();
  const std::size_t dim = ce.dim();
  const auto& ids = ce.ids();
  auto point = [&](std::size_t i) { return ce.vectors()[i].values(); };

  // k-means++ seeding with D^2 weighting.
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> centroids;
  std::vector<bool> chosen(n, false);
  auto take = [&](std::size_t i) {
    chosen[i] = true;
    auto p = point(i);
    centroids.emplace_back(p.begin(), p.end());
  };
  take(uniform_index(rng, n));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(point(i), centroids[0]);
  while (centroids.size() < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = n;
    if (total > 0.0) {
      const double r = uniform_unit(rng) * total;
      double cum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i] || d2[i] == 0.0) continue;
        cum += d2[i];
        pick = i;
        if (cum > r) break;
      }
    }
    if (pick == n) {
      // Every remaining point coincides with a centre; fall back to uniform.
      std::vector<std::size_t> rest;
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) rest.push_back(i);
      }
      pick = rest[uniform_index(rng, rest.size())];
    }
    take(pick);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(point(i), centroids.back()));
  }

  std::vector<std::size_t> assignment(n, 0);
  std::vector<double> assigned_d2(n, 0.0);
  auto assign = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_c = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_distance(point(i), centroids[c]);
        if (d < best) {
          best = d;
          best_c = c;
        }
      }
      assignment[i] = best_c;
      assigned_d2[i] = best;
    }
  };

  ClusteringResult result;
  for (int iter = 1; iter <= kKMeansMaxIterations; ++iter) {
    assign();
    std::vector<std::vector<double>> next(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto p = point(i);
      auto& c = next[assignment[i]];
      for (std::size_t d = 0; d < dim; ++d) c[d] += p[d];
      ++counts[assignment[i]];
    }
    std::vector<bool> reseeded(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (auto& v : next[c]) v /= static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: move it onto the point farthest from its own centroid.
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (reseeded[i]) continue;
        if (far == n || assigned_d2[i] > assigned_d2[far]) far = i;
      }
      reseeded[far] = true;
      auto p = point(far);
      next[c].assign(p.begin(), p.end());
    }
    double movement = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      movement = std::max(movement, std::sqrt(squared_distance(next[c], centroids[c])));
    }
    centroids = std::move(next);
    result.iterations = iter;
    if (movement < kKMeansTolerance) break;
  }
  assign();

  // Nearest member per cluster; empty clusters take the nearest unused point.
  std::vector<std::size_t> pick(k, n);
  std::vector<bool> used(n, false);
  auto better = [&](std::size_t i, std::size_t cur, std::size_t c) {
    if (cur == n) return true;
    const double di = squared_distance(point(i), centroids[c]);
    const double dc = squared_distance(point(cur), centroids[c]);
    return di < dc || (di == dc && ids[i] < ids[cur]);
  };
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = assignment[i];
    if (better(i, pick[c], c)) pick[c] = i;
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (pick[c] != n) used[pick[c]] = true;
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (pick[c] != n) continue;
    for (std::size_t i = 0; i < n; ++i) {
      if (!used[i] && better(i, pick[c], c)) pick[c] = i;
    }
    used[pick[c]] = true;
  }

  for (auto i : pick) result.selected.push_back(ids[i]);
  result.centroids = std::move(centroids);
  result.assignment = std::move(assignment);
  return result;
}

std::vector<ResumeId> select_clustering(const CorpusEmbedding& ce, std::size_t n, std::uint64_t seed) {
  return cluster_and_select(ce, n, seed).selected;
}

std::vector<ResumeId> select(Strategy strategy, const CorpusEmbedding& ce, std::size_t n, std::uint64_t seed) {
  switch (strategy) {
    case Strategy::Diversity:
      return select_diversity(ce, n);
    case Strategy::Similarity:
      return select_similarity(ce, n);
    case Strategy::Clustering:
      return select_clustering(ce, n, seed);
  }
  throw ValidationError("unknown strategy");
}

long round_half_up(double x) { return static_cast<long>(std::floor(x + 0.5 + 1e-9)); }

int low_quota(int n_shots, double low_fraction) {
  return static_cast<int>(std::max(1L, round_half_up(low_fraction * n_shots)));
}

// ---------------------------------------------------------------------------

std::vector<FewShotExample> compose_sample_set(const SampleSpec& spec, const CorpusEmbedding& ce,
                                               const GroundTruthSet& gt,
                                               const std::vector<ResumeRecord>& records) {
  spec.validate();
  const bool mixed = spec.sample_type == SampleType::HighAndLow;
  const int n_low = mixed ? low_quota(spec.n_shots, spec.low_fraction) : 0;
  const int n_high = spec.n_shots - n_low;
  if (n_high < 0) {
    throw InfeasibleSpecError("high", "n_shots too small for the low-quality quota");
  }

  std::vector<ResumeId> high_pool, low_pool;
  for (const auto& id : ce.ids()) {
    if (!gt.contains(id)) continue;  // excluded from this ground truth
    const auto label = gt.label(id);
    if (spec.high_pool == HighPool::FullCorpus || label == Label::High) high_pool.push_back(id);
    if (label == Label::Low) low_pool.push_back(id);
  }
  if (high_pool.size() < static_cast<std::size_t>(n_high)) {
    throw InfeasibleSpecError("high", "high-quality pool has " + std::to_string(high_pool.size()) +
                                          " resumes, need " + std::to_string(n_high));
  }

  std::vector<ResumeId> high_ids;
  if (n_high > 0) {
    high_ids = select(spec.strategy, ce.subset(high_pool), static_cast<std::size_t>(n_high),
                      derive_seed(spec.seed, "kmeans"));
  }

  std::vector<ResumeId> low_ids;
  if (n_low > 0) {
    const std::set<ResumeId> taken(high_ids.begin(), high_ids.end());
    std::vector<ResumeId> candidates;
    for (const auto& id : low_pool) {
      if (!taken.count(id)) candidates.push_back(id);
    }
    std::sort(candidates.begin(), candidates.end());
    if (candidates.size() < static_cast<std::size_t>(n_low)) {
      throw InfeasibleSpecError("low", "low-quality pool has " + std::to_string(candidates.size()) +
                                           " resumes, need " + std::to_string(n_low));
    }
    std::mt19937_64 rng(derive_seed(spec.seed, "low-draw"));
    for (int i = 0; i < n_low; ++i) {
      const auto j = static_cast<std::size_t>(i) + uniform_index(rng, candidates.size() - static_cast<std::size_t>(i));
      std::swap(candidates[static_cast<std::size_t>(i)], candidates[j]);
      low_ids.push_back(candidates[static_cast<std::size_t>(i)]);
    }
  }

  std::vector<FewShotExample> out;
  auto attach = [&](const ResumeId& id) {
    FewShotExample ex;
    ex.resume_id = id;
    ex.record = find_record(records, id);
    ex.overall = gt.label(id);
    if (spec.attribute_type == AttributeType::OverallAndDimensions) {
      ex.dim_scores = gt.scores(id);
      if (!ex.dim_scores) {
        throw ValidationError("ground truth " + gt.model_id + " has no dimension scores for " + id);
      }
    }
    out.push_back(std::move(ex));
  };
  for (const auto& id : high_ids) attach(id);
  for (const auto& id : low_ids) attach(id);
  return out;
}

json sample_set_to_json(const SampleSpec& spec, const std::string& gt_model_id,
                        const std::vector<FewShotExample>& examples) {
  json items = json::array();
  for (const auto& ex : examples) {
    json item = {{"id", ex.resume_id}, {"overall", to_string(ex.overall)}};
    if (ex.dim_scores) {
      item["dim_scores"] = {{"content", ex.dim_scores->content},
                            {"structure", ex.dim_scores->structure},
                            {"language", ex.dim_scores->language}};
    }
    items.push_back(std::move(item));
  }
  return {{"spec", to_json(spec)},
          {"seed", spec.seed},
          {"ground_truth", gt_model_id},
          {"kmeans", {{"tolerance", kKMeansTolerance}, {"max_iterations", kKMeansMaxIterations}}},
          {"examples", items}};
}

std::vector<FewShotExample> sample_set_from_json(const json& j, const std::vector<ResumeRecord>& records) {
  std::vector<FewShotExample> out;
  for (const auto& item : j.at("examples")) {
    FewShotExample ex;
    ex.resume_id = item.at("id").get<std::string>();
    ex.record = find_record(records, ex.resume_id);
    ex.overall = label_from_string(item.at("overall").get<std::string>());
    if (item.contains("dim_scores")) {
      const auto& d = item["dim_scores"];
      ex.dim_scores = DimScores{d.at("content").get<int>(), d.at("structure").get<int>(), d.at("language").get<int>()};
    }
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace resume_judge
