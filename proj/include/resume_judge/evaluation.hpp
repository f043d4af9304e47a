#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "resume_judge/corpus.hpp"
#include "resume_judge/embedding.hpp"
#include "resume_judge/judge.hpp"
#include "resume_judge/prompting.hpp"
#include "resume_judge/sampling.hpp"
#include "resume_judge/types.hpp"

namespace resume_judge {

// ---------------------------------------------------------------------------
// Ground truth

struct GroundTruthBuild {
  GroundTruthSet gt;
  std::vector<JudgeVerdict> verdicts;  // raw zero-shot verdicts, input order
  std::vector<ResumeId> excluded;      // unparsed after retries
};

/// Zero-shot judgement of every record by a reference judge. Resumes left
/// Unparsed are excluded from the set (with a warning).
GroundTruthBuild build_ground_truth(const std::vector<ResumeRecord>& records, const JudgeConfig& ref_cfg,
                                    const JudgeContext& ctx, const std::string& corpus_digest);

/// "<model>__<template_version>__<corpus digest prefix>.json", filesystem-safe.
std::string ground_truth_file_name(const GroundTruthSet& gt);

nlohmann::json to_json(const GroundTruthSet& gt);
GroundTruthSet ground_truth_from_json(const nlohmann::json& j);
void write_ground_truth(const std::filesystem::path& path, const GroundTruthSet& gt);
GroundTruthSet read_ground_truth(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Agreement

struct MatchCount {
  std::size_t matches = 0;
  std::size_t n = 0;
  double accuracy() const { return static_cast<double>(matches) / static_cast<double>(n); }
};

/// Exact-label agreement; Unparsed predictions never match. Throws
/// LookupError if a prediction's id is not in `gt`, ValidationError if empty.
MatchCount count_matches(const std::vector<JudgeVerdict>& preds, const GroundTruthSet& gt);
double accuracy(const std::vector<JudgeVerdict>& preds, const GroundTruthSet& gt);

/// Fraction of shared ids on which the sets do not all agree. Needs >= 2 sets
/// and a non-empty id intersection.
double disagreement_rate(const std::vector<GroundTruthSet>& gts);

// ---------------------------------------------------------------------------
// Score and timing statistics

struct DimensionStats {
  double mean = 0.0;
  std::array<std::size_t, 11> histogram{};  // bins for scores 0..10
  std::size_t count = 0;
};

struct ScoreStats {
  DimensionStats content;
  DimensionStats structure;
  DimensionStats language;
};

/// Over scored verdicts only; throws ValidationError if none is scored.
ScoreStats score_stats(const std::vector<JudgeVerdict>& verdicts);
ScoreStats score_stats(const GroundTruthSet& gt);
nlohmann::json to_json(const ScoreStats& s);

struct TimingStats {
  double mean_s = 0.0;
  double std_s = 0.0;  // sample standard deviation (n - 1)
};

/// Needs at least two latencies.
TimingStats timing_report(std::span<const double> latencies);
TimingStats timing_report(const std::vector<JudgeVerdict>& verdicts);

// ---------------------------------------------------------------------------
// Sweep

struct SweepGrid {
  std::vector<Strategy> strategies{Strategy::Diversity, Strategy::Similarity, Strategy::Clustering};
  std::vector<int> shots{3, 5, 10, 15, 20};
  std::vector<SampleType> sample_types{SampleType::HighOnly, SampleType::HighAndLow};
  std::vector<AttributeType> attribute_types{AttributeType::OverallOnly, AttributeType::OverallAndDimensions};
  std::vector<std::uint64_t> seeds{0};
  double low_fraction = 0.3;
  HighPool high_pool = HighPool::GtHigh;

  void validate() const;
  std::size_t size() const;
  /// Grid points in canonical order (strategy, shots, sample type, attribute, seed).
  std::vector<SampleSpec> points() const;
};

nlohmann::json to_json(const SweepGrid& grid);
SweepGrid sweep_grid_from_json(const nlohmann::json& j);

struct EvalReport {
  std::string gt_model_id;
  std::string judge_model_id;
  std::optional<SampleSpec> spec;  // nullopt = zero-shot
  double accuracy = 0.0;
  std::size_t matches = 0;
  std::size_t n = 0;
  std::size_t unparsed_count = 0;
  std::size_t gt_excluded = 0;        // absent from the ground truth
  std::size_t exemplar_excluded = 0;  // shown as exemplars in the prompt
  std::array<double, 3> per_dimension_means{};
  double timing_mean_s = 0.0;
  double timing_std_s = 0.0;
  std::vector<ResumeId> exemplar_ids;
};

struct SkippedPoint {
  std::string gt_model_id;
  SampleSpec spec;
  std::string reason;
};

struct SweepResult {
  std::vector<EvalReport> reports;
  std::vector<SkippedPoint> skipped;
  /// gt model id -> index into `reports` of its best configuration.
  std::map<std::string, std::size_t> best;
  /// Parallel to `reports` when SweepOptions::keep_verdicts is set.
  std::vector<std::vector<JudgeVerdict>> verdicts;
};

/// Index of the highest-accuracy report per ground truth; ties go to fewer
/// shots, then strategy order, then grid order.
std::map<std::string, std::size_t> best_per_ground_truth(const std::vector<EvalReport>& reports,
                                                         const SweepGrid& grid);

/// Judges the corpus outside the exemplar set with `judge_cfg` and scores it
/// against one ground truth.
EvalReport evaluate_configuration(const std::vector<ResumeRecord>& records, const GroundTruthSet& gt,
                                  const std::vector<FewShotExample>& examples, const std::optional<SampleSpec>& spec,
                                  const JudgeConfig& judge_cfg, const JudgeContext& ctx,
                                  std::vector<JudgeVerdict>* verdicts_out = nullptr);

struct SweepOptions {
  std::size_t parallelism = 1;  // grid points in flight
  bool keep_verdicts = false;
};

/// Every ground truth x grid point. Infeasible points are skipped and listed;
/// a judge failure at one point is recorded as a skip for that point only.
SweepResult run_sweep(const SweepGrid& grid, const std::vector<ResumeRecord>& records, const CorpusEmbedding& ce,
                      const std::vector<GroundTruthSet>& gts, const JudgeConfig& judge_cfg, const JudgeContext& ctx,
                      const SweepOptions& options = {});

/// Tab-separated table, one row per report, fixed column order.
std::string reports_to_tsv(const std::vector<EvalReport>& reports);
/// Markdown summary: best configuration per ground truth and skipped points.
std::string sweep_summary_markdown(const SweepResult& result);
nlohmann::json to_json(const EvalReport& r);
EvalReport eval_report_from_json(const nlohmann::json& j);

}  // namespace resume_judge
