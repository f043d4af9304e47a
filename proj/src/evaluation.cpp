#include "resume_judge/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>
#include <variant>

#include <spdlog/spdlog.h>

#include "resume_judge/error.hpp"

namespace resume_judge {

using nlohmann::json;

GroundTruthBuild build_ground_truth(const std::vector<ResumeRecord>& records, const JudgeConfig& ref_cfg,
                                    const JudgeContext& ctx, const std::string& corpus_digest) {
  GroundTruthBuild out;
  out.verdicts = judge_resumes(records, {}, AttributeType::OverallOnly, ref_cfg, ctx);
  out.gt.model_id = ref_cfg.model_id;
  out.gt.template_version = ctx.templates.template_version();
  out.gt.corpus_digest = corpus_digest;
  for (const auto& v : out.verdicts) {
    if (v.overall == Label::Unparsed) {
      spdlog::warn("ground truth {}: {} unparsed after {} attempts, excluded", ref_cfg.model_id, v.resume_id,
                   v.attempts);
      out.excluded.push_back(v.resume_id);
      continue;
    }
    out.gt.labels[v.resume_id] = v.overall;
    out.gt.dim_scores[v.resume_id] = *v.scores;
  }
  return out;
}

std::string ground_truth_file_name(const GroundTruthSet& gt) {
  auto safe = [](std::string s) {
    for (auto& c : s) {
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_')) c = '_';
    }
    return s;
  };
  return safe(gt.model_id) + "__" + safe(gt.template_version) + "__" + gt.corpus_digest.substr(0, 12) + ".json";
}

json to_json(const GroundTruthSet& gt) {
  json labels = json::object();
  json scores = json::object();
  for (const auto& [id, label] : gt.labels) labels[id] = to_string(label);
  for (const auto& [id, s] : gt.dim_scores) scores[id] = {s.content, s.structure, s.language};
  return {{"model_id", gt.model_id},
          {"template_version", gt.template_version},
          {"corpus_digest", gt.corpus_digest},
          {"labels", labels},
          {"dim_scores", scores}};
}

GroundTruthSet ground_truth_from_json(const json& j) {
  GroundTruthSet gt;
  gt.model_id = j.at("model_id").get<std::string>();
  gt.template_version = j.value("template_version", std::string());
  gt.corpus_digest = j.value("corpus_digest", std::string());
  for (const auto& [id, label] : j.at("labels").items()) {
    gt.labels[id] = label_from_string(label.get<std::string>());
  }
  for (const auto& [id, s] : j.at("dim_scores").items()) {
    DimScores d{s.at(0).get<int>(), s.at(1).get<int>(), s.at(2).get<int>()};
    if (!d.valid()) throw ValidationError("ground truth score out of range for " + id);
    gt.dim_scores[id] = d;
  }
  return gt;
}

void write_ground_truth(const std::filesystem::path& path, const GroundTruthSet& gt) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(gt).dump(2) << '\n';
}

GroundTruthSet read_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  return ground_truth_from_json(json::parse(in));
}

// ---------------------------------------------------------------------------

MatchCount count_matches(const std::vector<JudgeVerdict>& preds, const GroundTruthSet& gt) {
  if (preds.empty()) {
    throw ValidationError("accuracy: empty comparison set");
  }
  MatchCount m;
  for (const auto& p : preds) {
    const auto truth = gt.label(p.resume_id);
    ++m.n;
    if (p.overall != Label::Unparsed && p.overall == truth) ++m.matches;
  }
  return m;
}

double accuracy(const std::vector<JudgeVerdict>& preds, const GroundTruthSet& gt) {
  return count_matches(preds, gt).accuracy();
}

double disagreement_rate(const std::vector<GroundTruthSet>& gts) {
  if (gts.size() < 2) {
    throw ValidationError("disagreement_rate needs at least two ground-truth sets");
  }
  std::size_t shared = 0, disagree = 0;
  for (const auto& [id, label] : gts.front().labels) {
    bool in_all = true, same = true;
    for (std::size_t k = 1; k < gts.size() && in_all; ++k) {
      auto it = gts[k].labels.find(id);
      if (it == gts[k].labels.end()) {
        in_all = false;
      } else if (it->second != label) {
        same = false;
      }
    }
    if (!in_all) continue;
    ++shared;
    if (!same) ++disagree;
  }
  if (shared == 0) {
    throw ValidationError("disagreement_rate: ground-truth sets share no resume");
  }
  return static_cast<double>(disagree) / static_cast<double>(shared);
}

// ---------------------------------------------------------------------------

namespace {

ScoreStats stats_from_scores(const std::vector<DimScores>& scores) {
  if (scores.empty()) {
    throw ValidationError("score_stats: no scored verdicts");
  }
  ScoreStats s;
  auto add = [](DimensionStats& d, int v) {
    d.mean += v;
    ++d.histogram[static_cast<std::size_t>(v)];
    ++d.count;
  };
  for (const auto& d : scores) {
    if (!d.valid()) throw ValidationError("score_stats: score outside [0, 10]");
    add(s.content, d.content);
    add(s.structure, d.structure);
    add(s.language, d.language);
  }
  for (auto* d : {&s.content, &s.structure, &s.language}) d->mean /= static_cast<double>(d->count);
  return s;
}

}  // namespace

ScoreStats score_stats(const std::vector<JudgeVerdict>& verdicts) {
  std::vector<DimScores> scores;
  for (const auto& v : verdicts) {
    if (v.overall != Label::Unparsed && v.scores) scores.push_back(*v.scores);
  }
  return stats_from_scores(scores);
}

ScoreStats score_stats(const GroundTruthSet& gt) {
  std::vector<DimScores> scores;
  for (const auto& [id, s] : gt.dim_scores) scores.push_back(s);
  return stats_from_scores(scores);
}

json to_json(const ScoreStats& s) {
  auto dim = [](const DimensionStats& d) {
    return json{{"mean", d.mean}, {"histogram", d.histogram}, {"count", d.count}};
  };
  return {{"content", dim(s.content)}, {"structure", dim(s.structure)}, {"language", dim(s.language)}};
}

TimingStats timing_report(std::span<const double> latencies) {
  if (latencies.size() < 2) {
    throw ValidationError("timing_report needs at least two latencies");
  }
  const auto n = static_cast<double>(latencies.size());
  double sum = 0.0;
  for (double l : latencies) sum += l;
  const double mean = sum / n;
  double ss = 0.0;
  for (double l : latencies) ss += (l - mean) * (l - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

TimingStats timing_report(const std::vector<JudgeVerdict>& verdicts) {
  std::vector<double> l;
  l.reserve(verdicts.size());
  for (const auto& v : verdicts) l.push_back(v.latency_s);
  return timing_report(l);
}

// ---------------------------------------------------------------------------

void SweepGrid::validate() const {
  if (strategies.empty() || shots.empty() || sample_types.empty() || attribute_types.empty() || seeds.empty()) {
    throw ValidationError("sweep grid has an empty axis");
  }
  for (int n : shots) {
    if (n < 1) throw ValidationError("sweep shot counts must be >= 1");
  }
}

std::size_t SweepGrid::size() const {
  return strategies.size() * shots.size() * sample_types.size() * attribute_types.size() * seeds.size();
}

std::vector<SampleSpec> SweepGrid::points() const {
  validate();
  std::vector<SampleSpec> out;
  out.reserve(size());
  for (auto st : strategies) {
    for (int n : shots) {
      for (auto t : sample_types) {
        for (auto a : attribute_types) {
          for (auto seed : seeds) {
            SampleSpec s;
            s.strategy = st;
            s.n_shots = n;
            s.sample_type = t;
            s.attribute_type = a;
            s.low_fraction = low_fraction;
            s.seed = seed;
            s.high_pool = high_pool;
            out.push_back(s);
          }
        }
      }
    }
  }
  return out;
}

json to_json(const SweepGrid& g) {
  json st = json::array(), ty = json::array(), at = json::array();
  for (auto s : g.strategies) st.push_back(to_string(s));
  for (auto t : g.sample_types) ty.push_back(to_string(t));
  for (auto a : g.attribute_types) at.push_back(to_string(a));
  return {{"strategies", st},          {"shots", g.shots}, {"sample_types", ty}, {"attribute_types", at},
          {"seeds", g.seeds},          {"low_fraction", g.low_fraction},
          {"high_pool", to_string(g.high_pool)}};
}

SweepGrid sweep_grid_from_json(const json& j) {
  SweepGrid g;
  if (j.contains("strategies")) {
    g.strategies.clear();
    for (const auto& s : j["strategies"]) g.strategies.push_back(strategy_from_string(s.get<std::string>()));
  }
  if (j.contains("shots")) g.shots = j["shots"].get<std::vector<int>>();
  if (j.contains("sample_types")) {
    g.sample_types.clear();
    for (const auto& s : j["sample_types"]) g.sample_types.push_back(sample_type_from_string(s.get<std::string>()));
  }
  if (j.contains("attribute_types")) {
    g.attribute_types.clear();
    for (const auto& s : j["attribute_types"]) {
      g.attribute_types.push_back(attribute_type_from_string(s.get<std::string>()));
    }
  }
  if (j.contains("seeds")) g.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  g.low_fraction = j.value("low_fraction", g.low_fraction);
  g.high_pool = high_pool_from_string(j.value("high_pool", std::string("gt_high")));
  g.validate();
  return g;
}

std::map<std::string, std::size_t> best_per_ground_truth(const std::vector<EvalReport>& reports,
                                                         const SweepGrid& /*grid*/) {
  std::map<std::string, std::size_t> best;
  auto better = [&](const EvalReport& a, const EvalReport& b) {
    // Exact comparison of matches/n via cross-multiplication.
    const auto lhs = a.matches * b.n;
    const auto rhs = b.matches * a.n;
    if (lhs != rhs) return lhs > rhs;
    if (a.spec->n_shots != b.spec->n_shots) return a.spec->n_shots < b.spec->n_shots;
    return static_cast<int>(a.spec->strategy) < static_cast<int>(b.spec->strategy);
  };
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    if (!r.spec || r.n == 0) continue;
    auto it = best.find(r.gt_model_id);
    if (it == best.end()) {
      best.emplace(r.gt_model_id, i);
    } else if (better(r, reports[it->second])) {
      it->second = i;
    }
  }
  return best;
}

EvalReport evaluate_configuration(const std::vector<ResumeRecord>& records, const GroundTruthSet& gt,
                                  const std::vector<FewShotExample>& examples, const std::optional<SampleSpec>& spec,
                                  const JudgeConfig& judge_cfg, const JudgeContext& ctx,
                                  std::vector<JudgeVerdict>* verdicts_out) {
  EvalReport r;
  r.gt_model_id = gt.model_id;
  r.judge_model_id = judge_cfg.model_id;
  r.spec = spec;
  std::set<ResumeId> exemplar_ids;
  for (const auto& ex : examples) {
    exemplar_ids.insert(ex.resume_id);
    r.exemplar_ids.push_back(ex.resume_id);
  }

  std::vector<ResumeRecord> targets;
  for (const auto& rec : records) {
    if (exemplar_ids.count(rec.id)) {
      ++r.exemplar_excluded;
    } else if (!gt.contains(rec.id)) {
      ++r.gt_excluded;
    } else {
      targets.push_back(rec);
    }
  }
  if (targets.empty()) {
    throw ValidationError("no evaluation targets remain after exclusions");
  }

  const auto attribute_type = spec ? spec->attribute_type : AttributeType::OverallOnly;
  auto verdicts = judge_resumes(targets, examples, attribute_type, judge_cfg, ctx);
  const auto m = count_matches(verdicts, gt);
  r.matches = m.matches;
  r.n = m.n;
  r.accuracy = m.accuracy();
  r.unparsed_count = static_cast<std::size_t>(
      std::count_if(verdicts.begin(), verdicts.end(), [](const auto& v) { return v.overall == Label::Unparsed; }));
  if (r.unparsed_count < verdicts.size()) {
    const auto s = score_stats(verdicts);
    r.per_dimension_means = {s.content.mean, s.structure.mean, s.language.mean};
  }
  if (verdicts.size() >= 2) {
    const auto t = timing_report(verdicts);
    r.timing_mean_s = t.mean_s;
    r.timing_std_s = t.std_s;
  }
  if (verdicts_out) *verdicts_out = std::move(verdicts);
  return r;
}

SweepResult run_sweep(const SweepGrid& grid, const std::vector<ResumeRecord>& records, const CorpusEmbedding& ce,
                      const std::vector<GroundTruthSet>& gts, const JudgeConfig& judge_cfg, const JudgeContext& ctx,
                      const SweepOptions& options) {
  const auto points = grid.points();
  struct Task {
    const GroundTruthSet* gt;
    SampleSpec spec;
  };
  std::vector<Task> tasks;
  for (const auto& gt : gts) {
    for (const auto& p : points) tasks.push_back({&gt, p});
  }

  std::vector<std::variant<std::monostate, EvalReport, SkippedPoint>> outcomes(tasks.size());
  std::vector<std::vector<JudgeVerdict>> verdicts(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const auto& t = tasks[i];
      try {
        const auto examples = compose_sample_set(t.spec, ce, *t.gt, records);
        outcomes[i] = evaluate_configuration(records, *t.gt, examples, t.spec, judge_cfg, ctx,
                                             options.keep_verdicts ? &verdicts[i] : nullptr);
      } catch (const InfeasibleSpecError& e) {
        outcomes[i] = SkippedPoint{t.gt->model_id, t.spec, std::string("infeasible (") + e.pool() + "): " + e.what()};
      } catch (const Error& e) {
        outcomes[i] = SkippedPoint{t.gt->model_id, t.spec, std::string("failed: ") + e.what()};
      }
    }
  };
  {
    const auto n_threads = std::max<std::size_t>(1, std::min(options.parallelism, tasks.size()));
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < n_threads; ++k) pool.emplace_back(worker);
  }

  SweepResult result;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    auto& o = outcomes[i];
    if (auto* r = std::get_if<EvalReport>(&o)) {
      result.reports.push_back(std::move(*r));
      if (options.keep_verdicts) result.verdicts.push_back(std::move(verdicts[i]));
    } else if (auto* s = std::get_if<SkippedPoint>(&o)) {
      spdlog::info("sweep: skipped {} vs {}: {}", s->spec.key(), s->gt_model_id, s->reason);
      result.skipped.push_back(std::move(*s));
    }
  }
  result.best = best_per_ground_truth(result.reports, grid);
  return result;
}

namespace {

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::string reports_to_tsv(const std::vector<EvalReport>& reports) {
  std::string out =
      "# exemplar resumes are excluded from the evaluation targets of their own run; "
      "unparsed predictions count as mismatches\n";
  out +=
      "gt_model\tjudge_model\tstrategy\tshots\tsample_type\tattribute_type\tseed\taccuracy\tmatches\tn\t"
      "unparsed\tgt_excluded\texemplar_excluded\tmean_content\tmean_structure\tmean_language\ttime_mean_s\t"
      "time_std_s\texemplar_ids\n";
  for (const auto& r : reports) {
    std::string ids;
    for (const auto& id : r.exemplar_ids) {
      if (!ids.empty()) ids += ',';
      ids += id;
    }
    out += r.gt_model_id + "\t" + r.judge_model_id + "\t";
    if (r.spec) {
      out += std::string(to_string(r.spec->strategy)) + "\t" + std::to_string(r.spec->n_shots) + "\t" +
             std::string(to_string(r.spec->sample_type)) + "\t" + std::string(to_string(r.spec->attribute_type)) +
             "\t" + std::to_string(r.spec->seed) + "\t";
    } else {
      out += "zero_shot\t0\tn/a\tn/a\tn/a\t";
    }
    out += fmt6(r.accuracy) + "\t" + std::to_string(r.matches) + "\t" + std::to_string(r.n) + "\t" +
           std::to_string(r.unparsed_count) + "\t" + std::to_string(r.gt_excluded) + "\t" +
           std::to_string(r.exemplar_excluded) + "\t" + fmt6(r.per_dimension_means[0]) + "\t" +
           fmt6(r.per_dimension_means[1]) + "\t" + fmt6(r.per_dimension_means[2]) + "\t" + fmt6(r.timing_mean_s) +
           "\t" + fmt6(r.timing_std_s) + "\t" + ids + "\n";
  }
  return out;
}

std::string sweep_summary_markdown(const SweepResult& result) {
  std::string out = "# Sweep summary\n\n";
  out += "Grid points evaluated: " + std::to_string(result.reports.size()) +
         ", skipped: " + std::to_string(result.skipped.size()) + "\n\n";
  out += "Exemplar resumes are excluded from the evaluation targets of their own run.\n\n";
  out += "## Best configuration per ground truth\n\n";
  out += "| Ground truth | Judge | Strategy | Shots | Sample type | Attribute type | Acc. |\n";
  out += "|---|---|---|---|---|---|---|\n";
  for (const auto& [gt, idx] : result.best) {
    const auto& r = result.reports[idx];
    out += "| " + gt + " | " + r.judge_model_id + " | " + std::string(to_string(r.spec->strategy)) + " | " +
           std::to_string(r.spec->n_shots) + " | " + std::string(to_string(r.spec->sample_type)) + " | " +
           std::string(to_string(r.spec->attribute_type)) + " | " + fmt6(r.accuracy) + " |\n";
  }
  if (!result.skipped.empty()) {
    out += "\n## Skipped grid points\n\n";
    for (const auto& s : result.skipped) {
      out += "- " + s.gt_model_id + " / " + s.spec.key() + ": " + s.reason + "\n";
    }
  }
  return out;
}

json to_json(const EvalReport& r) {
  json j = {{"gt_model_id", r.gt_model_id},
            {"judge_model_id", r.judge_model_id},
            {"accuracy", r.accuracy},
            {"matches", r.matches},
            {"n", r.n},
            {"unparsed_count", r.unparsed_count},
            {"gt_excluded", r.gt_excluded},
            {"exemplar_excluded", r.exemplar_excluded},
            {"per_dimension_means", r.per_dimension_means},
            {"timing_mean_s", r.timing_mean_s},
            {"timing_std_s", r.timing_std_s},
            {"exemplar_ids", r.exemplar_ids}};
  j["spec"] = r.spec ? to_json(*r.spec) : json("zero_shot");
  return j;
}

EvalReport eval_report_from_json(const json& j) {
  EvalReport r;
  r.gt_model_id = j.at("gt_model_id").get<std::string>();
  r.judge_model_id = j.at("judge_model_id").get<std::string>();
  r.accuracy = j.at("accuracy").get<double>();
  r.matches = j.at("matches").get<std::size_t>();
  r.n = j.at("n").get<std::size_t>();
  r.unparsed_count = j.at("unparsed_count").get<std::size_t>();
  r.gt_excluded = j.at("gt_excluded").get<std::size_t>();
  r.exemplar_excluded = j.at("exemplar_excluded").get<std::size_t>();
  r.per_dimension_means = j.at("per_dimension_means").get<std::array<double, 3>>();
  r.timing_mean_s = j.at("timing_mean_s").get<double>();
  r.timing_std_s = j.at("timing_std_s").get<double>();
  r.exemplar_ids = j.at("exemplar_ids").get<std::vector<ResumeId>>();
  if (j.at("spec").is_object()) r.spec = sample_spec_from_json(j["spec"]);
  return r;
}

}  // namespace resume_judge
