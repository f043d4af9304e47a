// rjudge: run the resume-judging pipeline stage by stage.

#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "resume_judge/error.hpp"
#include "resume_judge/pipeline.hpp"
#include "resume_judge/synthetic.hpp"

namespace rj = resume_judge;

namespace {

struct JudgeOverrides {
  std::optional<std::string> endpoint_url;
  std::optional<std::string> model_id;
  std::optional<double> temperature;
  std::optional<int> batch_size;
  std::optional<int> max_retries;
  std::optional<double> timeout_s;
  std::optional<std::string> backend;
  std::optional<std::string> batch_mode;
  std::optional<std::string> api_key_env;
  std::vector<std::string> only;  // restrict evaluated judges by name

  void apply(rj::JudgeConfig& j) const {
    if (endpoint_url) j.endpoint_url = *endpoint_url;
    if (model_id) j.model_id = *model_id;
    if (temperature) j.temperature = *temperature;
    if (batch_size) j.batch_size = *batch_size;
    if (max_retries) j.max_retries = *max_retries;
    if (timeout_s) j.timeout_s = *timeout_s;
    if (backend) j.backend = rj::backend_kind_from_string(*backend);
    if (batch_mode) j.batch_mode = rj::batch_mode_from_string(*batch_mode);
    if (api_key_env) j.api_key_env = *api_key_env;
  }
};

struct Options {
  std::string config_path;
  std::string runs_dir = "runs";
  std::optional<std::string> run_id;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> sweep_parallelism;
  std::optional<std::string> locale;
  std::optional<std::string> embedding_backend;
  std::optional<std::string> embedding_endpoint;
  std::optional<std::string> embedding_model;
  bool force = false;
  bool verbose = false;
  JudgeOverrides judge;
};

rj::PipelineConfig build_config(const Options& o) {
  rj::PipelineConfig cfg;
  if (!o.config_path.empty()) {
    cfg = rj::load_pipeline_config(o.config_path);
  } else {
    cfg.judges = rj::default_judges();
  }
  if (o.run_id) cfg.run_id = *o.run_id;
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.sweep.seeds = {*o.seed};
  }
  if (o.sweep_parallelism) cfg.sweep_parallelism = *o.sweep_parallelism;
  if (o.locale) cfg.locale = *o.locale;
  if (o.embedding_backend) cfg.embedding.backend = rj::backend_kind_from_string(*o.embedding_backend);
  if (o.embedding_endpoint) cfg.embedding.endpoint_url = *o.embedding_endpoint;
  if (o.embedding_model) cfg.embedding.model_id = *o.embedding_model;
  if (!o.judge.only.empty()) {
    std::vector<rj::JudgeConfig> kept;
    for (const auto& j : cfg.judges) {
      if (std::find(o.judge.only.begin(), o.judge.only.end(), j.name) != o.judge.only.end()) kept.push_back(j);
    }
    if (kept.empty()) throw rj::ValidationError("--judge matched no configured judge");
    cfg.judges = std::move(kept);
  }
  for (auto& j : cfg.judges) o.judge.apply(j);
  cfg.validate();
  return cfg;
}

void add_judge_flags(CLI::App& app, JudgeOverrides& j) {
  app.add_option("--judge", j.only, "Only evaluate the named judge(s)");
  app.add_option("--judge-endpoint", j.endpoint_url, "Chat endpoint base URL for evaluated judges");
  app.add_option("--judge-model", j.model_id, "Model id for evaluated judges");
  app.add_option("--temperature", j.temperature, "Sampling temperature");
  app.add_option("--batch-size", j.batch_size, "Resumes in flight (or per prompt in packed mode)");
  app.add_option("--max-retries", j.max_retries, "Format-reminder retries before a verdict is Unparsed");
  app.add_option("--timeout", j.timeout_s, "Request timeout in seconds");
  app.add_option("--backend", j.backend, "http or mock")->check(CLI::IsMember({"http", "mock"}));
  app.add_option("--batch-mode", j.batch_mode, "concurrent or packed")->check(CLI::IsMember({"concurrent", "packed"}));
  app.add_option("--api-key-env", j.api_key_env, "Environment variable holding the API key");
}

int run_stages(const Options& o, const std::vector<rj::Stage>& stages, const std::string& input) {
  rj::Pipeline pipeline(build_config(o), o.runs_dir);
  for (auto stage : stages) {
    const auto result = pipeline.run(stage, input, o.force);
    std::cout << result.message << '\n';
  }
  std::cout << "run directory: " << pipeline.run_dir().string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot LLM resume judging: ingest, embed, select exemplars, judge and evaluate."};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("-c,--config", o.config_path, "Pipeline config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--runs-dir", o.runs_dir, "Directory holding run directories");
  app.add_option("--run-id", o.run_id, "Run id (default: derived from the config digest)");
  app.add_option("--seed", o.seed, "Master seed");
  app.add_option("--sweep-parallelism", o.sweep_parallelism, "Grid points evaluated concurrently");
  app.add_option("--locale", o.locale, "Prompt template locale (en, ja)");
  app.add_option("--embedding-backend", o.embedding_backend, "http or mock")
      ->check(CLI::IsMember({"http", "mock"}));
  app.add_option("--embedding-endpoint", o.embedding_endpoint, "Embeddings endpoint base URL");
  app.add_option("--embedding-model", o.embedding_model, "Embedding model id");
  app.add_flag("-f,--force", o.force, "Re-run the stage even if its inputs are unchanged");
  app.add_flag("-v,--verbose", o.verbose, "Debug logging");
  add_judge_flags(app, o.judge);

  std::string input;
  auto* ingest = app.add_subcommand("ingest", "Ingest a raw JSONL corpus into the run directory");
  ingest->add_option("-i,--input", input, "Raw corpus (JSONL)")->required()->check(CLI::ExistingFile);
  app.add_subcommand("embed", "Embed every resume (cached per record)");
  app.add_subcommand("ground-truth", "Zero-shot labels from each reference judge");
  app.add_subcommand("select", "Compose exemplar sets for every grid point");
  app.add_subcommand("judge", "Zero-shot verdicts from each evaluated judge");
  app.add_subcommand("sweep", "Few-shot grid search against every ground truth");
  app.add_subcommand("report", "Integrity check, accuracy tables and analysis exports");
  auto* all = app.add_subcommand("run", "Every stage in order");
  all->add_option("-i,--input", input, "Raw corpus (JSONL)")->required()->check(CLI::ExistingFile);
  app.add_subcommand("verify", "Check the run directory against its manifest");

  std::size_t synth_n = 50;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic raw corpus");
  synth->add_option("-n,--count", synth_n, "Number of resumes");
  synth->add_option("--synth-seed", synth_seed, "Generator seed");
  synth->add_option("-o,--output", synth_out, "Output JSONL path")->required();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(o.verbose ? spdlog::level::debug : spdlog::level::warn);

  try {
    auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "synth") {
      std::ofstream out(synth_out, std::ios::trunc);
      if (!out) throw rj::IoError("cannot write " + synth_out);
      for (const auto& line : rj::generate_synthetic_corpus(synth_n, synth_seed)) out << line << '\n';
      std::cout << "wrote " << synth_n << " synthetic resumes to " << synth_out << '\n';
      return 0;
    }
    if (name == "verify") {
      rj::Pipeline pipeline(build_config(o), o.runs_dir);
      const auto problems = pipeline.integrity_problems();
      for (const auto& p : problems) std::cerr << p << '\n';
      if (problems.empty()) std::cout << "intact: " << pipeline.run_dir().string() << '\n';
      return problems.empty() ? 0 : 1;
    }
    if (name == "run") return run_stages(o, rj::all_stages(), input);
    return run_stages(o, {rj::stage_from_string(name)}, input);
  } catch (const rj::MissingStageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const rj::StaleArtifactError& e) {
    std::cerr << "stale artifact: " << e.what() << '\n';
    return 3;
  } catch (const rj::IntegrityError& e) {
    std::cerr << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
