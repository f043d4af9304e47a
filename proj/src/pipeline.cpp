#include "resume_judge/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "resume_judge/digest.hpp"
#include "resume_judge/error.hpp"
#include "resume_judge/http.hpp"

namespace resume_judge {

using nlohmann::json;
namespace fs = std::filesystem;

std::string safe_name(std::string_view name) {
  std::string s(name);
  for (auto& c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_')) c = '_';
  }
  return s;
}

// ---------------------------------------------------------------------------
// Configuration

std::vector<JudgeConfig> default_judges() {
  JudgeConfig qwen;
  qwen.name = "qwen3-8b";
  qwen.model_id = "Qwen/Qwen3-8B";
  qwen.temperature = 0.6;
  JudgeConfig llama;
  llama.name = "llama-3.1-8b-instruct";
  llama.model_id = "meta-llama/Llama-3.1-8B-Instruct";
  llama.temperature = 0.0;
  llama.mock_seed = 1;
  return {qwen, llama};
}

void PipelineConfig::validate() const {
  if (locale.empty()) throw ValidationError("locale must not be empty");
  if (embedding.mock_dim < 2) throw ValidationError("embedding.mock_dim must be >= 2");
  if (embedding.max_concurrency < 1) throw ValidationError("embedding.max_concurrency must be >= 1");
  if (sweep_parallelism < 1) throw ValidationError("sweep.parallelism must be >= 1");
  std::set<std::string> ref_models, names;
  for (const auto& r : reference_judges) {
    r.validate();
    if (!ref_models.insert(r.model_id).second) {
      throw ValidationError("duplicate reference judge model_id: " + r.model_id);
    }
    if (!names.insert(safe_name(r.name)).second) throw ValidationError("duplicate judge name: " + r.name);
  }
  for (const auto& j : judges) {
    j.validate();
    if (!names.insert(safe_name(j.name)).second) throw ValidationError("duplicate judge name: " + j.name);
  }
  sweep.validate();
}

namespace {

json embedding_to_json(const EmbeddingSettings& e) {
  return {{"backend", to_string(e.backend)},
          {"endpoint_url", e.endpoint_url},
          {"model_id", e.model_id},
          {"mock_dim", e.mock_dim},
          {"mock_seed", e.mock_seed},
          {"max_concurrency", e.max_concurrency},
          {"max_retries", e.max_retries},
          {"timeout_s", e.timeout_s},
          {"api_key_env", e.api_key_env}};
}

EmbeddingSettings embedding_from_json(const json& j) {
  EmbeddingSettings e;
  e.backend = backend_kind_from_string(j.value("backend", std::string(to_string(e.backend))));
  e.endpoint_url = j.value("endpoint_url", e.endpoint_url);
  e.model_id = j.value("model_id", e.model_id);
  e.mock_dim = j.value("mock_dim", e.mock_dim);
  e.mock_seed = j.value("mock_seed", e.mock_seed);
  e.max_concurrency = j.value("max_concurrency", e.max_concurrency);
  e.max_retries = j.value("max_retries", e.max_retries);
  e.timeout_s = j.value("timeout_s", e.timeout_s);
  e.api_key_env = j.value("api_key_env", e.api_key_env);
  return e;
}

json judges_to_json(const std::vector<JudgeConfig>& js) {
  json out = json::array();
  for (const auto& j : js) out.push_back(to_json(j));
  return out;
}

}  // namespace

json to_json(const PipelineConfig& c) {
  json sweep = to_json(c.sweep);
  sweep["parallelism"] = c.sweep_parallelism;
  return {{"run_id", c.run_id},
          {"seed", c.seed},
          {"ingest", {{"min_item_chars", c.ingest.min_item_chars}, {"salt", c.ingest.salt}}},
          {"embedding", embedding_to_json(c.embedding)},
          {"prompt", {{"locale", c.locale}, {"template_dir", c.template_dir.string()}}},
          {"reference_judges", judges_to_json(c.reference_judges)},
          {"judges", judges_to_json(c.judges)},
          {"sweep", sweep}};
}

PipelineConfig pipeline_config_from_json(const json& j) {
  PipelineConfig c;
  try {
    c.run_id = j.value("run_id", c.run_id);
    c.seed = j.value("seed", c.seed);
    if (j.contains("ingest")) {
      const auto& in = j["ingest"];
      c.ingest.min_item_chars = in.value("min_item_chars", c.ingest.min_item_chars);
      c.ingest.salt = in.value("salt", c.ingest.salt);
    }
    if (j.contains("embedding")) c.embedding = embedding_from_json(j["embedding"]);
    if (j.contains("prompt")) {
      c.locale = j["prompt"].value("locale", c.locale);
      c.template_dir = j["prompt"].value("template_dir", std::string());
    }
    if (j.contains("reference_judges")) {
      for (const auto& r : j["reference_judges"]) c.reference_judges.push_back(judge_config_from_json(r));
    }
    if (j.contains("judges")) {
      for (const auto& r : j["judges"]) c.judges.push_back(judge_config_from_json(r));
    } else {
      c.judges = default_judges();
    }
    if (j.contains("sweep")) {
      c.sweep = sweep_grid_from_json(j["sweep"]);
      c.sweep_parallelism = j["sweep"].value("parallelism", c.sweep_parallelism);
      if (!j["sweep"].contains("seeds")) c.sweep.seeds = {c.seed};
    } else {
      c.sweep.seeds = {c.seed};
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid config: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  auto cfg = pipeline_config_from_json(j);
  if (!cfg.template_dir.empty() && cfg.template_dir.is_relative()) {
    cfg.template_dir = path.parent_path() / cfg.template_dir;
  }
  return cfg;
}

std::string config_digest(const PipelineConfig& cfg) { return sha256_hex(to_json(cfg).dump()); }

std::string resolve_run_id(const PipelineConfig& cfg) {
  if (!cfg.run_id.empty()) {
    if (safe_name(cfg.run_id) != cfg.run_id) {
      throw ValidationError("run_id may only contain letters, digits, '.', '-' and '_'");
    }
    return cfg.run_id;
  }
  return "run-" + config_digest(cfg).substr(0, 12);
}

// ---------------------------------------------------------------------------
// Stages and manifest

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Ingest: return "ingest";
    case Stage::Embed: return "embed";
    case Stage::GroundTruth: return "ground-truth";
    case Stage::Select: return "select";
    case Stage::Judge: return "judge";
    case Stage::Sweep: return "sweep";
    case Stage::Report: return "report";
  }
  return "?";
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages{Stage::Ingest, Stage::Embed, Stage::GroundTruth, Stage::Select,
                                         Stage::Judge,  Stage::Sweep, Stage::Report};
  return stages;
}

Stage stage_from_string(std::string_view s) {
  for (auto st : all_stages()) {
    if (to_string(st) == s) return st;
  }
  throw ValidationError("unknown stage: " + std::string(s));
}

std::vector<Stage> stage_prerequisites(Stage s) {
  switch (s) {
    case Stage::Ingest: return {};
    case Stage::Embed: return {Stage::Ingest};
    case Stage::GroundTruth: return {Stage::Ingest};
    case Stage::Select: return {Stage::Ingest, Stage::Embed, Stage::GroundTruth};
    case Stage::Judge: return {Stage::Ingest, Stage::GroundTruth};
    case Stage::Sweep: return {Stage::Ingest, Stage::Embed, Stage::GroundTruth, Stage::Select};
    case Stage::Report:
      return {Stage::Ingest, Stage::Embed, Stage::GroundTruth, Stage::Select, Stage::Judge, Stage::Sweep};
  }
  return {};
}

json to_json(const RunManifest& m) {
  json stages = json::object();
  for (const auto& [name, rec] : m.stages) {
    stages[name] = {{"input_digest", rec.input_digest}, {"artifacts", rec.artifacts}};
  }
  return {{"run_id", m.run_id},
          {"corpus_digest", m.corpus_digest},
          {"embedding_model_id", m.embedding_model_id},
          {"template_version", m.template_version},
          {"seeds", m.seeds},
          {"config", m.config},
          {"parameters",
           {{"serialization_version", kSerializationVersion},
            {"kmeans", {{"tolerance", kKMeansTolerance}, {"max_iterations", kKMeansMaxIterations}}},
            {"embedding_cache", {{"dir", "cache/embeddings"}, {"layout", "manifest.json, <id>.vec"}}}}},
          {"stages", stages}};
}

RunManifest manifest_from_json(const json& j) {
  RunManifest m;
  m.run_id = j.at("run_id").get<std::string>();
  m.corpus_digest = j.value("corpus_digest", std::string());
  m.embedding_model_id = j.value("embedding_model_id", std::string());
  m.template_version = j.value("template_version", std::string());
  m.seeds = j.value("seeds", json::object());
  m.config = j.value("config", json::object());
  const auto stages = j.value("stages", json::object());
  for (const auto& [name, rec] : stages.items()) {
    m.stages[name] = {rec.at("input_digest").get<std::string>(),
                      rec.at("artifacts").get<std::map<std::string, std::string>>()};
  }
  return m;
}

// ---------------------------------------------------------------------------

struct Pipeline::StageWriter {
  const fs::path& root;
  std::map<std::string, std::string> artifacts;

  fs::path prepare(const std::string& rel) const {
    const auto p = root / rel;
    fs::create_directories(p.parent_path());
    return p;
  }
  /// Registers a file already written at `rel`.
  void add(const std::string& rel) { artifacts[rel] = file_sha256_hex(root / rel); }
  void text(const std::string& rel, const std::string& content) {
    std::ofstream out(prepare(rel), std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (root / rel).string());
    out << content;
    out.close();
    add(rel);
  }
  void json_file(const std::string& rel, const json& j) { text(rel, j.dump(2) + "\n"); }
  void verdicts(const std::string& rel, const std::vector<JudgeVerdict>& v) {
    write_verdicts(prepare(rel), v);
    add(rel);
  }
};

namespace {

constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kCorpusFile = "corpus/corpus.jsonl";
constexpr const char* kEmbeddingExport = "embeddings/embeddings.jsonl";
constexpr const char* kGroundTruthIndex = "ground_truth/index.json";
constexpr const char* kZeroShotReports = "judge/zero_shot.jsonl";
constexpr const char* kSweepReports = "sweep/reports.jsonl";
constexpr const char* kSweepBest = "sweep/best.json";

json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot read " + p.string());
  return json::parse(in);
}

std::string reports_to_jsonl(const std::vector<EvalReport>& reports) {
  std::string out;
  for (const auto& r : reports) out += to_json(r).dump() + "\n";
  return out;
}

std::vector<EvalReport> reports_from_jsonl(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot read " + p.string());
  std::vector<EvalReport> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(eval_report_from_json(json::parse(line)));
  }
  return out;
}

/// Zero-shot verdicts over the whole corpus, scored against one ground truth.
EvalReport score_zero_shot(const std::vector<JudgeVerdict>& verdicts, const GroundTruthSet& gt,
                           const std::string& judge_model_id) {
  EvalReport r;
  r.gt_model_id = gt.model_id;
  r.judge_model_id = judge_model_id;
  std::vector<JudgeVerdict> scored;
  for (const auto& v : verdicts) {
    if (gt.contains(v.resume_id)) {
      scored.push_back(v);
    } else {
      ++r.gt_excluded;
    }
  }
  const auto m = count_matches(scored, gt);
  r.matches = m.matches;
  r.n = m.n;
  r.accuracy = m.accuracy();
  r.unparsed_count = static_cast<std::size_t>(
      std::count_if(scored.begin(), scored.end(), [](const auto& v) { return v.overall == Label::Unparsed; }));
  if (r.unparsed_count < scored.size()) {
    const auto s = score_stats(scored);
    r.per_dimension_means = {s.content.mean, s.structure.mean, s.language.mean};
  }
  if (scored.size() >= 2) {
    const auto t = timing_report(scored);
    r.timing_mean_s = t.mean_s;
    r.timing_std_s = t.std_s;
  }
  return r;
}

json stats_json_or_null(const std::vector<JudgeVerdict>& verdicts) {
  json j = json::object();
  try {
    j["scores"] = to_json(score_stats(verdicts));
  } catch (const ValidationError&) {
    j["scores"] = nullptr;
  }
  if (verdicts.size() >= 2) {
    const auto t = timing_report(verdicts);
    j["timing"] = {{"mean_s", t.mean_s}, {"std_s", t.std_s}};
  } else {
    j["timing"] = nullptr;
  }
  j["count"] = verdicts.size();
  return j;
}

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string strategy_display(Strategy s) {
  switch (s) {
    case Strategy::Diversity: return "Diversity-based";
    case Strategy::Similarity: return "Similarity-based";
    case Strategy::Clustering: return "Clustering-based";
  }
  return "?";
}

std::string sample_type_display(SampleType t) {
  return t == SampleType::HighOnly ? "High-quality only" : "High- and Low-quality";
}

std::string attribute_display(AttributeType a) {
  return a == AttributeType::OverallOnly ? "Overall judgement" : "Overall judgement and dimension scores";
}

}  // namespace

Pipeline::Pipeline(PipelineConfig cfg, const fs::path& runs_root)
    : cfg_(std::move(cfg)),
      templates_(cfg_.template_dir.empty() ? builtin_templates(cfg_.locale)
                                           : load_templates(cfg_.template_dir, cfg_.locale)) {
  cfg_.validate();
  const auto run_id = resolve_run_id(cfg_);
  run_dir_ = runs_root / run_id;
  fs::create_directories(run_dir_);
  const auto mpath = run_dir_ / kManifestFile;
  if (fs::exists(mpath)) {
    manifest_ = manifest_from_json(read_json_file(mpath));
    if (manifest_.run_id != run_id) {
      throw ValidationError("manifest in " + run_dir_.string() + " belongs to run " + manifest_.run_id);
    }
  } else {
    manifest_.run_id = run_id;
    manifest_.template_version = templates_.template_version();
    manifest_.config = to_json(cfg_);
    save_manifest();
  }

  chat_factory_ = [](const JudgeConfig& j) { return make_chat_backend(j); };
  embed_factory_ = [](const EmbeddingSettings& e) -> std::unique_ptr<EmbeddingBackend> {
    if (e.backend == BackendKind::Mock) {
      return std::make_unique<MockEmbeddingBackend>(
          e.mock_dim, e.mock_seed,
          "mock-embedding-d" + std::to_string(e.mock_dim) + "-s" + std::to_string(e.mock_seed));
    }
    return std::make_unique<HttpEmbeddingBackend>(e.endpoint_url, e.model_id, http::env_or_empty(e.api_key_env),
                                                  e.timeout_s);
  };
}

void Pipeline::save_manifest() const {
  const auto tmp = run_dir_ / (std::string(kManifestFile) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << to_json(manifest_).dump(2) << '\n';
  }
  fs::rename(tmp, run_dir_ / kManifestFile);
}

std::string Pipeline::artifact_digest(Stage stage) const {
  const auto it = manifest_.stages.find(std::string(to_string(stage)));
  if (it == manifest_.stages.end()) return {};
  return sha256_hex(json(it->second.artifacts).dump());
}

void Pipeline::require(Stage stage) const {
  const auto prereqs = stage_prerequisites(stage);
  for (auto p : prereqs) {
    if (!manifest_.completed(p)) {
      const std::string name(to_string(p));
      throw MissingStageError(name, "run `" + name + "` first");
    }
  }
  for (auto p : prereqs) {
    const std::string name(to_string(p));
    for (const auto& [rel, digest] : manifest_.stages.at(name).artifacts) {
      const auto path = run_dir_ / rel;
      if (!fs::exists(path) || file_sha256_hex(path) != digest) {
        throw StaleArtifactError("artifact " + rel + " from `" + name +
                                 "` is missing or was modified; rerun `" + name + "` with --force");
      }
    }
  }
}

std::optional<StageResult> Pipeline::check_cached(Stage stage, const std::string& input_digest, bool force) {
  const std::string name(to_string(stage));
  if (force || !manifest_.completed(stage)) {
    drop_downstream(stage);
    return std::nullopt;
  }
  const auto& rec = manifest_.stages.at(name);
  if (rec.input_digest != input_digest) {
    throw StaleArtifactError("inputs of `" + name +
                             "` changed since it ran (config or upstream artifacts); rerun `" + name +
                             "` with --force or use a new run id");
  }
  for (const auto& [rel, digest] : rec.artifacts) {
    const auto path = run_dir_ / rel;
    if (!fs::exists(path) || file_sha256_hex(path) != digest) {
      throw StaleArtifactError("artifact " + rel + " no longer matches the manifest; rerun `" + name +
                               "` with --force");
    }
  }
  spdlog::info("{}: cached, inputs unchanged", name);
  return StageResult{stage, StageOutcome::Cached, name + ": cached, inputs unchanged; nothing to do"};
}

void Pipeline::drop_downstream(Stage stage) {
  bool changed = false;
  for (auto t : all_stages()) {
    const auto pre = stage_prerequisites(t);
    const bool affected = t == stage || std::find(pre.begin(), pre.end(), stage) != pre.end();
    const std::string name(to_string(t));
    auto it = manifest_.stages.find(name);
    if (!affected || it == manifest_.stages.end()) continue;
    for (const auto& [rel, digest] : it->second.artifacts) {
      std::error_code ec;
      fs::remove(run_dir_ / rel, ec);
    }
    manifest_.stages.erase(it);
    changed = true;
  }
  if (changed) save_manifest();
}

void Pipeline::commit(Stage stage, const std::string& input_digest, StageWriter& writer) {
  manifest_.stages[std::string(to_string(stage))] = {input_digest, writer.artifacts};
  manifest_.config = to_json(cfg_);
  manifest_.template_version = templates_.template_version();
  json judges = json::object(), refs = json::object();
  for (const auto& j : cfg_.judges) judges[j.name] = j.mock_seed;
  for (const auto& j : cfg_.reference_judges) refs[j.name] = j.mock_seed;
  manifest_.seeds = {{"master", cfg_.seed},
                     {"sweep", cfg_.sweep.seeds},
                     {"embedding_mock", cfg_.embedding.mock_seed},
                     {"judge_mock", judges},
                     {"reference_mock", refs},
                     {"sub_seed_tags", {"kmeans", "low-draw"}}};
  save_manifest();
}

std::vector<ResumeRecord> Pipeline::load_corpus() const { return read_corpus(run_dir_ / kCorpusFile); }

CorpusEmbedding Pipeline::load_embedding() const { return read_embedding_export(run_dir_ / kEmbeddingExport); }

std::vector<GroundTruthSet> Pipeline::load_ground_truths() const {
  std::vector<GroundTruthSet> out;
  for (const auto& e : read_json_file(run_dir_ / kGroundTruthIndex)) {
    out.push_back(read_ground_truth(run_dir_ / e.at("file").get<std::string>()));
  }
  return out;
}

JudgeContext Pipeline::context_for(ChatBackend& backend, AuditLog* audit) const {
  return JudgeContext{templates_, backend, audit};
}

StageResult Pipeline::run(Stage stage, const fs::path& source, bool force) {
  switch (stage) {
    case Stage::Ingest: return ingest(source, force);
    case Stage::Embed: return embed(force);
    case Stage::GroundTruth: return ground_truth(force);
    case Stage::Select: return select(force);
    case Stage::Judge: return judge(force);
    case Stage::Sweep: return sweep(force);
    case Stage::Report: return report(force);
  }
  throw ValidationError("unknown stage");
}

// ---------------------------------------------------------------------------

StageResult Pipeline::ingest(const fs::path& source, bool force) {
  if (source.empty()) throw ValidationError("ingest needs an input corpus path");
  if (!fs::exists(source)) throw IoError("input corpus not found: " + source.string());
  const auto input = sha256_hex(json{{"stage", "ingest"},
                                     {"source_sha256", file_sha256_hex(source)},
                                     {"min_item_chars", cfg_.ingest.min_item_chars},
                                     {"salt", cfg_.ingest.salt}}
                                    .dump());
  if (auto cached = check_cached(Stage::Ingest, input, force)) return *cached;

  auto result = resume_judge::ingest(source, cfg_.ingest);
  if (result.records.empty()) {
    throw ValidationError("ingest retained no records from " + source.string());
  }
  StageWriter w{run_dir_, {}};
  write_corpus(w.prepare(kCorpusFile), result.records);
  w.add(kCorpusFile);
  write_ingest_report(w.prepare("corpus/ingest_report.json"), result.report);
  w.add("corpus/ingest_report.json");
  write_id_map(w.prepare("private/id_map.tsv"), result.id_map);
  w.add("private/id_map.tsv");
  manifest_.corpus_digest = corpus_digest(result.records);
  commit(Stage::Ingest, input, w);

  const auto& s = result.report.stats;
  return {Stage::Ingest, StageOutcome::Ran,
          "ingest: retained " + std::to_string(s.retained) + " of " + std::to_string(s.total_ingested) +
              " records (" + std::to_string(s.dropped_records) + " records and " +
              std::to_string(s.dropped_items) + " items dropped)"};
}

StageResult Pipeline::embed(bool force) {
  require(Stage::Embed);
  const auto input = sha256_hex(json{{"stage", "embed"},
                                     {"ingest", artifact_digest(Stage::Ingest)},
                                     {"embedding", embedding_to_json(cfg_.embedding)}}
                                    .dump());
  if (auto cached = check_cached(Stage::Embed, input, force)) return *cached;

  const auto records = load_corpus();
  auto backend = embed_factory_(cfg_.embedding);
  EmbedOptions opts;
  opts.cache_dir = run_dir_ / "cache" / "embeddings";
  opts.max_concurrency = cfg_.embedding.max_concurrency;
  opts.max_retries = cfg_.embedding.max_retries;
  const auto result = embed_corpus(records, *backend, opts);
  backend_calls_ += backend->calls();

  StageWriter w{run_dir_, {}};
  write_embedding_export(w.prepare(kEmbeddingExport), result.embedding);
  w.add(kEmbeddingExport);
  manifest_.embedding_model_id = backend->model_id();
  commit(Stage::Embed, input, w);
  return {Stage::Embed, StageOutcome::Ran,
          "embed: " + std::to_string(result.computed) + " computed, " + std::to_string(result.from_cache) +
              " from cache (model " + backend->model_id() + ")"};
}

StageResult Pipeline::ground_truth(bool force) {
  require(Stage::GroundTruth);
  if (cfg_.reference_judges.empty()) throw ValidationError("config has no reference_judges");
  const auto input = sha256_hex(json{{"stage", "ground-truth"},
                                     {"ingest", artifact_digest(Stage::Ingest)},
                                     {"reference_judges", judges_to_json(cfg_.reference_judges)},
                                     {"template_version", templates_.template_version()}}
                                    .dump());
  if (auto cached = check_cached(Stage::GroundTruth, input, force)) return *cached;

  const auto records = load_corpus();
  const auto digest = corpus_digest(records);
  fs::create_directories(run_dir_ / "logs");
  StageWriter w{run_dir_, {}};
  json index = json::array();
  std::vector<GroundTruthSet> gts;
  std::size_t excluded_total = 0;
  for (const auto& ref : cfg_.reference_judges) {
    auto backend = chat_factory_(ref);
    AuditLog audit(run_dir_ / "logs" / ("ground-truth-" + safe_name(ref.name) + ".jsonl"));
    const auto ctx = context_for(*backend, &audit);
    const auto build = build_ground_truth(records, ref, ctx, digest);
    backend_calls_ += backend->calls();

    const auto file = "ground_truth/" + ground_truth_file_name(build.gt);
    const auto dump = "ground_truth/" + safe_name(ref.name) + ".verdicts.jsonl";
    const auto stats = "ground_truth/" + safe_name(ref.name) + ".stats.json";
    write_ground_truth(w.prepare(file), build.gt);
    w.add(file);
    w.verdicts(dump, build.verdicts);
    w.json_file(stats, stats_json_or_null(build.verdicts));
    index.push_back({{"name", ref.name},
                     {"model_id", ref.model_id},
                     {"file", file},
                     {"verdicts", dump},
                     {"stats", stats},
                     {"excluded", build.excluded}});
    excluded_total += build.excluded.size();
    gts.push_back(build.gt);
  }
  w.json_file(kGroundTruthIndex, index);
  if (gts.size() >= 2) {
    json sets = json::array();
    for (const auto& g : gts) sets.push_back(g.model_id);
    w.json_file("ground_truth/disagreement.json", {{"sets", sets}, {"disagreement_rate", disagreement_rate(gts)}});
  }
  commit(Stage::GroundTruth, input, w);
  return {Stage::GroundTruth, StageOutcome::Ran,
          "ground-truth: " + std::to_string(gts.size()) + " set(s) built, " + std::to_string(excluded_total) +
              " unparsed resume(s) excluded"};
}

StageResult Pipeline::select(bool force) {
  require(Stage::Select);
  const auto input = sha256_hex(json{{"stage", "select"},
                                     {"embed", artifact_digest(Stage::Embed)},
                                     {"ground-truth", artifact_digest(Stage::GroundTruth)},
                                     {"sweep", to_json(cfg_.sweep)}}
                                    .dump());
  if (auto cached = check_cached(Stage::Select, input, force)) return *cached;

  const auto records = load_corpus();
  const auto ce = load_embedding();
  const auto gts = load_ground_truths();
  StageWriter w{run_dir_, {}};
  json index = json::array();
  std::string skipped = "gt_model\tspec\tpool\treason\n";
  std::size_t n_written = 0, n_skipped = 0;
  for (const auto& gt : gts) {
    for (const auto& spec : cfg_.sweep.points()) {
      try {
        const auto examples = compose_sample_set(spec, ce, gt, records);
        const auto rel = "selections/" + safe_name(gt.model_id) + "/" + spec.key() + ".json";
        w.json_file(rel, sample_set_to_json(spec, gt.model_id, examples));
        index.push_back({{"gt_model_id", gt.model_id}, {"spec", to_json(spec)}, {"path", rel}});
        ++n_written;
      } catch (const InfeasibleSpecError& e) {
        skipped += gt.model_id + "\t" + spec.key() + "\t" + e.pool() + "\t" + e.what() + "\n";
        ++n_skipped;
      }
    }
  }
  w.json_file("selections/index.json", index);
  w.text("selections/skipped.tsv", skipped);
  commit(Stage::Select, input, w);
  return {Stage::Select, StageOutcome::Ran,
          "select: " + std::to_string(n_written) + " sample set(s) written, " + std::to_string(n_skipped) +
              " infeasible"};
}

StageResult Pipeline::judge(bool force) {
  require(Stage::Judge);
  if (cfg_.judges.empty()) throw ValidationError("config has no judges");
  const auto input = sha256_hex(json{{"stage", "judge"},
                                     {"ingest", artifact_digest(Stage::Ingest)},
                                     {"ground-truth", artifact_digest(Stage::GroundTruth)},
                                     {"judges", judges_to_json(cfg_.judges)},
                                     {"template_version", templates_.template_version()}}
                                    .dump());
  if (auto cached = check_cached(Stage::Judge, input, force)) return *cached;

  const auto records = load_corpus();
  const auto gts = load_ground_truths();
  fs::create_directories(run_dir_ / "logs");
  StageWriter w{run_dir_, {}};
  std::vector<EvalReport> reports;
  for (const auto& jc : cfg_.judges) {
    auto backend = chat_factory_(jc);
    AuditLog audit(run_dir_ / "logs" / ("judge-" + safe_name(jc.name) + ".jsonl"));
    const auto verdicts =
        judge_resumes(records, {}, AttributeType::OverallOnly, jc, context_for(*backend, &audit));
    backend_calls_ += backend->calls();
    w.verdicts("judge/" + safe_name(jc.name) + ".verdicts.jsonl", verdicts);
    w.json_file("judge/" + safe_name(jc.name) + ".stats.json", stats_json_or_null(verdicts));
    for (const auto& gt : gts) reports.push_back(score_zero_shot(verdicts, gt, jc.model_id));
  }
  w.text(kZeroShotReports, reports_to_jsonl(reports));
  w.text("judge/zero_shot.tsv", reports_to_tsv(reports));
  commit(Stage::Judge, input, w);
  return {Stage::Judge, StageOutcome::Ran,
          "judge: " + std::to_string(cfg_.judges.size()) + " judge(s) x " + std::to_string(gts.size()) +
              " ground truth(s), zero-shot"};
}

StageResult Pipeline::sweep(bool force) {
  require(Stage::Sweep);
  if (cfg_.judges.empty()) throw ValidationError("config has no judges");
  const auto input = sha256_hex(json{{"stage", "sweep"},
                                     {"ingest", artifact_digest(Stage::Ingest)},
                                     {"embed", artifact_digest(Stage::Embed)},
                                     {"ground-truth", artifact_digest(Stage::GroundTruth)},
                                     {"select", artifact_digest(Stage::Select)},
                                     {"judges", judges_to_json(cfg_.judges)},
                                     {"sweep", to_json(cfg_.sweep)},
                                     {"template_version", templates_.template_version()}}
                                    .dump());
  if (auto cached = check_cached(Stage::Sweep, input, force)) return *cached;

  const auto records = load_corpus();
  const auto ce = load_embedding();
  const auto gts = load_ground_truths();
  fs::create_directories(run_dir_ / "logs");
  StageWriter w{run_dir_, {}};
  std::vector<EvalReport> all;
  json best = json::array();
  std::string skipped = "judge\tgt_model\tspec\treason\n";
  std::size_t n_skipped = 0;
  for (const auto& jc : cfg_.judges) {
    auto backend = chat_factory_(jc);
    AuditLog audit(run_dir_ / "logs" / ("sweep-" + safe_name(jc.name) + ".jsonl"));
    SweepOptions opts;
    opts.parallelism = cfg_.sweep_parallelism;
    opts.keep_verdicts = true;
    const auto result = run_sweep(cfg_.sweep, records, ce, gts, jc, context_for(*backend, &audit), opts);
    backend_calls_ += backend->calls();

    for (const auto& s : result.skipped) {
      skipped += jc.name + "\t" + s.gt_model_id + "\t" + s.spec.key() + "\t" + s.reason + "\n";
      ++n_skipped;
    }
    for (const auto& [gt_id, idx] : result.best) {
      const auto& r = result.reports[idx];
      const auto stem = "sweep/best/" + safe_name(jc.name) + "__" + safe_name(gt_id);
      w.verdicts(stem + ".verdicts.jsonl", result.verdicts[idx]);
      w.json_file(stem + ".stats.json", stats_json_or_null(result.verdicts[idx]));
      best.push_back({{"judge", jc.name},
                      {"gt_model_id", gt_id},
                      {"report", to_json(r)},
                      {"verdicts", stem + ".verdicts.jsonl"},
                      {"stats", stem + ".stats.json"}});
    }
    w.text("sweep/" + safe_name(jc.name) + ".summary.md", sweep_summary_markdown(result));
    all.insert(all.end(), result.reports.begin(), result.reports.end());
  }
  w.text("sweep/reports.tsv", reports_to_tsv(all));
  w.text(kSweepReports, reports_to_jsonl(all));
  w.text("sweep/skipped.tsv", skipped);
  w.json_file(kSweepBest, best);
  commit(Stage::Sweep, input, w);
  return {Stage::Sweep, StageOutcome::Ran,
          "sweep: " + std::to_string(all.size()) + " grid point(s) evaluated, " + std::to_string(n_skipped) +
              " skipped"};
}

std::vector<std::string> Pipeline::integrity_problems() const {
  std::vector<std::string> problems;
  std::set<std::string> known;
  for (const auto& [stage, rec] : manifest_.stages) {
    for (const auto& [rel, digest] : rec.artifacts) {
      known.insert(rel);
      const auto path = run_dir_ / rel;
      if (!fs::exists(path)) {
        problems.push_back("missing artifact: " + rel + " (from `" + stage + "`)");
      } else if (file_sha256_hex(path) != digest) {
        problems.push_back("modified artifact: " + rel + " (from `" + stage + "`)");
      }
    }
  }
  std::vector<std::string> orphans;
  for (const auto& entry : fs::recursive_directory_iterator(run_dir_)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), run_dir_).generic_string();
    if (rel == kManifestFile || rel.rfind("cache/", 0) == 0 || rel.rfind("logs/", 0) == 0) continue;
    if (!known.count(rel)) orphans.push_back("orphan artifact: " + rel);
  }
  std::sort(orphans.begin(), orphans.end());
  problems.insert(problems.end(), orphans.begin(), orphans.end());
  return problems;
}

StageResult Pipeline::report(bool force) {
  require(Stage::Report);
  json upstream = json::object();
  for (auto p : stage_prerequisites(Stage::Report)) upstream[std::string(to_string(p))] = artifact_digest(p);
  const auto input = sha256_hex(json{{"stage", "report"}, {"upstream", upstream}}.dump());
  if (auto cached = check_cached(Stage::Report, input, force)) return *cached;

  if (const auto problems = integrity_problems(); !problems.empty()) {
    std::string msg = "integrity check failed:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw IntegrityError(msg);
  }

  const auto gts = load_ground_truths();
  const auto zero_shot = reports_from_jsonl(run_dir_ / kZeroShotReports);
  const auto best = read_json_file(run_dir_ / kSweepBest);
  const auto gt_index = read_json_file(run_dir_ / kGroundTruthIndex);

  std::map<std::string, std::string> judge_names;  // model id -> configured name
  for (const auto& jc : cfg_.judges) judge_names[jc.model_id] = jc.name;
  auto judge_name = [&](const std::string& model_id) {
    auto it = judge_names.find(model_id);
    return it == judge_names.end() ? model_id : it->second;
  };

  std::string md = "# Evaluation report\n\nRun: " + manifest_.run_id + "\n\n";
  md += "Exemplar resumes are excluded from the evaluation targets of their own run; unparsed predictions count "
        "as mismatches.\n";
  std::string acc_tsv =
      "gt_model\tjudge\tfew_shot\tstrategy\tshots\tsample_type\tattribute_type\taccuracy\tmatches\tn\n";
  for (const auto& gt : gts) {
    md += "\n## Accuracy with " + gt.model_id + " as the ground truth\n\n";
    md += "| Model | Few-shot | Sampling strategy | Shots | Sample type | Attribute type | Acc. |\n";
    md += "|---|---|---|---|---|---|---|\n";
    for (const auto& r : zero_shot) {
      if (r.gt_model_id != gt.model_id) continue;
      md += "| " + judge_name(r.judge_model_id) + " |  | N/A | 0 | N/A | N/A | " + fmt4(r.accuracy) + " |\n";
      acc_tsv += gt.model_id + "\t" + judge_name(r.judge_model_id) + "\t0\tn/a\t0\tn/a\tn/a\t" + fmt4(r.accuracy) +
                 "\t" + std::to_string(r.matches) + "\t" + std::to_string(r.n) + "\n";
    }
    for (const auto& b : best) {
      if (b.at("gt_model_id") != gt.model_id) continue;
      const auto r = eval_report_from_json(b.at("report"));
      const auto& s = *r.spec;
      md += "| " + b.at("judge").get<std::string>() + " | yes | " + strategy_display(s.strategy) + " | " +
            std::to_string(s.n_shots) + " | " + sample_type_display(s.sample_type) + " | " +
            attribute_display(s.attribute_type) + " | " + fmt4(r.accuracy) + " |\n";
      acc_tsv += gt.model_id + "\t" + b.at("judge").get<std::string>() + "\t1\t" +
                 std::string(to_string(s.strategy)) + "\t" + std::to_string(s.n_shots) + "\t" +
                 std::string(to_string(s.sample_type)) + "\t" + std::string(to_string(s.attribute_type)) + "\t" +
                 fmt4(r.accuracy) + "\t" + std::to_string(r.matches) + "\t" + std::to_string(r.n) + "\n";
    }
  }

  // Per-resume time: zero-shot over the whole corpus, few-shot at the best
  // configuration against the first ground truth.
  md += "\n## Per-resume judge time (s), mean ± std\n\n| Model | Few-shot | Time per resume (s) |\n|---|---|---|\n";
  std::string time_tsv = "judge\tfew_shot\tmean_s\tstd_s\n";
  StageWriter w{run_dir_, {}};
  json score_exports = json::object();
  json dumps = json::array();
  for (const auto& e : gt_index) {
    const auto v = read_verdicts(run_dir_ / e.at("verdicts").get<std::string>());
    score_exports["ground_truth/" + e.at("name").get<std::string>()] = stats_json_or_null(v);
    dumps.push_back({{"kind", "ground_truth"}, {"judge", e.at("name")}, {"path", e.at("verdicts")}});
  }
  for (const auto& jc : cfg_.judges) {
    const auto rel = "judge/" + safe_name(jc.name) + ".verdicts.jsonl";
    const auto v = read_verdicts(run_dir_ / rel);
    const auto stats = stats_json_or_null(v);
    score_exports["zero_shot/" + jc.name] = stats;
    dumps.push_back({{"kind", "zero_shot"}, {"judge", jc.name}, {"path", rel}});
    if (!stats["timing"].is_null()) {
      md += "| " + jc.name + " |  | " + fmt2(stats["timing"]["mean_s"]) + " ± " + fmt2(stats["timing"]["std_s"]) +
            " |\n";
      time_tsv += jc.name + "\t0\t" + fmt4(stats["timing"]["mean_s"]) + "\t" + fmt4(stats["timing"]["std_s"]) + "\n";
    }
  }
  std::set<std::string> timed;
  for (const auto& b : best) {
    const auto judge = b.at("judge").get<std::string>();
    const auto v = read_verdicts(run_dir_ / b.at("verdicts").get<std::string>());
    const auto stats = stats_json_or_null(v);
    score_exports["few_shot/" + judge + "/" + b.at("gt_model_id").get<std::string>()] = stats;
    dumps.push_back({{"kind", "few_shot"}, {"judge", judge}, {"gt_model_id", b.at("gt_model_id")},
                     {"path", b.at("verdicts")}});
    if (!gts.empty() && b.at("gt_model_id") == gts.front().model_id && !stats["timing"].is_null() &&
        timed.insert(judge).second) {
      md += "| " + judge + " | yes | " + fmt2(stats["timing"]["mean_s"]) + " ± " + fmt2(stats["timing"]["std_s"]) +
            " |\n";
      time_tsv += judge + "\t1\t" + fmt4(stats["timing"]["mean_s"]) + "\t" + fmt4(stats["timing"]["std_s"]) + "\n";
    }
  }
  if (gts.size() >= 2) {
    md += "\nGround-truth disagreement rate: " + fmt4(disagreement_rate(gts)) + "\n";
  }

  w.text("report/tables.md", md);
  w.text("report/accuracy.tsv", acc_tsv);
  w.text("report/timing.tsv", time_tsv);
  w.json_file("analysis/score_stats.json", score_exports);
  w.json_file("analysis/index.json", {{"run_id", manifest_.run_id},
                                      {"manifest", kManifestFile},
                                      {"embedding_export", kEmbeddingExport},
                                      {"score_stats", "analysis/score_stats.json"},
                                      {"verdict_dumps", dumps},
                                      {"selections", "selections/index.json"}});
  commit(Stage::Report, input, w);
  return {Stage::Report, StageOutcome::Ran, "report: written to " + (run_dir_ / "report").string()};
}

}  // namespace resume_judge
