#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "resume_judge/corpus.hpp"
#include "resume_judge/embedding.hpp"
#include "resume_judge/evaluation.hpp"
#include "resume_judge/judge.hpp"
#include "resume_judge/prompting.hpp"

namespace resume_judge {

struct EmbeddingSettings {
  BackendKind backend = BackendKind::Mock;
  std::string endpoint_url = "http://localhost:8001/v1";
  std::string model_id = "Qwen/Qwen3-Embedding-8B";
  std::size_t mock_dim = 64;
  std::uint64_t mock_seed = 0;
  std::size_t max_concurrency = 4;
  int max_retries = 3;
  double timeout_s = 60.0;
  std::string api_key_env;
};

struct PipelineConfig {
  std::string run_id;  // empty: derived from the config digest
  std::uint64_t seed = 0;
  IngestOptions ingest;
  EmbeddingSettings embedding;
  std::string locale = "ja";
  std::filesystem::path template_dir;  // empty: built-in templates
  std::vector<JudgeConfig> reference_judges;
  std::vector<JudgeConfig> judges;
  SweepGrid sweep;
  std::size_t sweep_parallelism = 1;

  void validate() const;
};

/// Two evaluated judges mirroring the reference setup (Qwen3-8B at
/// temperature 0.6, Llama-3.1-8B-Instruct at 0), both on the mock backend.
std::vector<JudgeConfig> default_judges();

nlohmann::json to_json(const PipelineConfig& cfg);
/// Missing keys keep their defaults. When `seed` is given and the grid has
/// no explicit seeds, the grid uses it.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
std::string config_digest(const PipelineConfig& cfg);
/// `cfg.run_id`, or "run-" plus a config digest prefix.
std::string resolve_run_id(const PipelineConfig& cfg);

enum class Stage { Ingest, Embed, GroundTruth, Select, Judge, Sweep, Report };

std::string_view to_string(Stage s);
Stage stage_from_string(std::string_view s);
const std::vector<Stage>& all_stages();
/// Stages that must have completed first, in pipeline order.
std::vector<Stage> stage_prerequisites(Stage s);

struct StageRecord {
  std::string input_digest;
  std::map<std::string, std::string> artifacts;  // run-relative path -> sha256
};

struct RunManifest {
  std::string run_id;
  std::string corpus_digest;
  std::string embedding_model_id;
  std::string template_version;
  nlohmann::json seeds = nlohmann::json::object();
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, StageRecord> stages;

  bool completed(Stage s) const { return stages.count(std::string(to_string(s))) != 0; }
};

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

enum class StageOutcome { Ran, Cached };

struct StageResult {
  Stage stage = Stage::Ingest;
  StageOutcome outcome = StageOutcome::Ran;
  std::string message;
};

/// One run directory and its manifest. Each stage checks its prerequisites,
/// skips itself when its inputs are unchanged, and records every artifact it
/// writes with a digest.
class Pipeline {
 public:
  using ChatBackendFactory = std::function<std::unique_ptr<ChatBackend>(const JudgeConfig&)>;
  using EmbeddingBackendFactory = std::function<std::unique_ptr<EmbeddingBackend>(const EmbeddingSettings&)>;

  /// Opens (or creates) `runs_root/<run id>`.
  Pipeline(PipelineConfig cfg, const std::filesystem::path& runs_root);

  const PipelineConfig& config() const { return cfg_; }
  const RunManifest& manifest() const { return manifest_; }
  const std::filesystem::path& run_dir() const { return run_dir_; }

  void set_chat_backend_factory(ChatBackendFactory f) { chat_factory_ = std::move(f); }
  void set_embedding_backend_factory(EmbeddingBackendFactory f) { embed_factory_ = std::move(f); }

  /// Backend calls made by this object so far (chat + embedding).
  std::uint64_t backend_calls() const { return backend_calls_; }

  StageResult ingest(const std::filesystem::path& source, bool force = false);
  StageResult embed(bool force = false);
  StageResult ground_truth(bool force = false);
  StageResult select(bool force = false);
  StageResult judge(bool force = false);
  StageResult sweep(bool force = false);
  StageResult report(bool force = false);

  /// `source` is only used by ingest.
  StageResult run(Stage stage, const std::filesystem::path& source = {}, bool force = false);

  /// Problems found in the run directory: missing or modified artifacts and
  /// files no manifest entry accounts for. Empty means intact.
  std::vector<std::string> integrity_problems() const;

 private:
  struct StageWriter;

  void require(Stage stage) const;
  std::optional<StageResult> check_cached(Stage stage, const std::string& input_digest, bool force);
  void commit(Stage stage, const std::string& input_digest, StageWriter& writer);
  void drop_downstream(Stage stage);
  void save_manifest() const;
  std::string artifact_digest(Stage stage) const;

  std::vector<ResumeRecord> load_corpus() const;
  CorpusEmbedding load_embedding() const;
  std::vector<GroundTruthSet> load_ground_truths() const;
  JudgeContext context_for(ChatBackend& backend, AuditLog* audit) const;

  PipelineConfig cfg_;
  std::filesystem::path run_dir_;
  RunManifest manifest_;
  TemplateSet templates_;
  ChatBackendFactory chat_factory_;
  EmbeddingBackendFactory embed_factory_;
  std::uint64_t backend_calls_ = 0;
};

/// Filesystem-safe form of a judge or model name.
std::string safe_name(std::string_view name);

}  // namespace resume_judge
