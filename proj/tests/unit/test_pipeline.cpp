#include <doctest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "helpers.hpp"
#include "resume_judge/error.hpp"
#include "resume_judge/pipeline.hpp"

using namespace resume_judge;
namespace fs = std::filesystem;

namespace {

const fs::path kCorpus = fs::path(RJ_DATA_DIR) / "synthetic_50.jsonl";

PipelineConfig small_config(const std::string& run_id) {
  auto cfg = load_pipeline_config(fs::path(RJ_CONFIG_DIR) / "mock.json");
  cfg.run_id = run_id;
  cfg.sweep.shots = {3, 5};
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> data_lines(const fs::path& p) {
  std::vector<std::string> out;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line[0] != '#') out.push_back(line);
  }
  return out;
}

void run_all(Pipeline& p) {
  for (auto s : all_stages()) p.run(s, kCorpus);
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("stages refuse to run before their prerequisites") {
    const auto root = rj_test::temp_dir("order");
    Pipeline p(small_config("order"), root);
    try {
      p.report();
      FAIL("expected MissingStageError");
    } catch (const MissingStageError& e) {
      CHECK(e.required_stage() == "ingest");
    }
    p.ingest(kCorpus);
    try {
      p.sweep();
      FAIL("expected MissingStageError");
    } catch (const MissingStageError& e) {
      CHECK(e.required_stage() == "embed");
      CHECK(std::string(e.what()).find("run `embed` first") != std::string::npos);
    }
    CHECK_THROWS_AS(p.select(), MissingStageError);
    CHECK_THROWS_AS(p.judge(), MissingStageError);
    fs::remove_all(root);
  }

  TEST_CASE("stage prerequisites are transitive") {
    for (auto s : all_stages()) {
      for (auto pre : stage_prerequisites(s)) {
        for (auto pp : stage_prerequisites(pre)) {
          const auto list = stage_prerequisites(s);
          CHECK(std::find(list.begin(), list.end(), pp) != list.end());
        }
      }
      CHECK(stage_from_string(to_string(s)) == s);
    }
  }

  TEST_CASE("an unchanged stage is a cached no-op") {
    const auto root = rj_test::temp_dir("cached");
    {
      Pipeline p(small_config("cached"), root);
      p.ingest(kCorpus);
      CHECK(p.embed().outcome == StageOutcome::Ran);
      const auto calls = p.backend_calls();
      CHECK(calls > 0);
      const auto again = p.embed();
      CHECK(again.outcome == StageOutcome::Cached);
      CHECK(again.message.find("nothing to do") != std::string::npos);
      CHECK(p.backend_calls() == calls);
      CHECK(p.ingest(kCorpus).outcome == StageOutcome::Cached);
    }
    Pipeline reopened(small_config("cached"), root);
    CHECK(reopened.embed().outcome == StageOutcome::Cached);
    CHECK(reopened.backend_calls() == 0);
    // Forcing re-embeds from the per-record cache.
    const auto forced = reopened.embed(true);
    CHECK(forced.outcome == StageOutcome::Ran);
    CHECK(forced.message.find("0 computed") != std::string::npos);
    CHECK(reopened.backend_calls() == 0);
    fs::remove_all(root);
  }

  TEST_CASE("changed config or artifacts are reported as stale") {
    const auto root = rj_test::temp_dir("stale");
    {
      Pipeline p(small_config("stale"), root);
      p.ingest(kCorpus);
      p.embed();
      p.ground_truth();
      p.select();
    }
    auto changed = small_config("stale");
    changed.embedding.mock_seed = 99;
    Pipeline p(changed, root);
    CHECK_THROWS_AS(p.embed(), StaleArtifactError);
    CHECK(p.embed(true).outcome == StageOutcome::Ran);
    CHECK_FALSE(p.manifest().completed(Stage::Select));
    CHECK(p.manifest().completed(Stage::GroundTruth));
    CHECK_FALSE(fs::exists(p.run_dir() / "selections" / "index.json"));

    std::ofstream(p.run_dir() / "corpus" / "corpus.jsonl", std::ios::app) << "\n";
    CHECK_THROWS_AS(p.select(), StaleArtifactError);
    const auto problems = p.integrity_problems();
    REQUIRE(problems.size() == 1);
    CHECK(problems[0].find("modified artifact: corpus/corpus.jsonl") != std::string::npos);
    fs::remove_all(root);
  }

  TEST_CASE("full mock run") {
    const auto root = rj_test::temp_dir("full");
    Pipeline p(small_config("full"), root);
    run_all(p);
    const auto dir = p.run_dir();
    CHECK(p.integrity_problems().empty());
    for (auto s : all_stages()) CHECK(p.manifest().completed(s));

    const auto reports = data_lines(dir / "sweep" / "reports.jsonl");
    const auto tsv_rows = data_lines(dir / "sweep" / "reports.tsv");
    const auto skipped_rows = data_lines(dir / "sweep" / "skipped.tsv");
    const std::size_t points = p.config().sweep.size() * p.config().judges.size() * p.config().reference_judges.size();
    CHECK(tsv_rows.size() == reports.size() + 1);  // header row
    CHECK(reports.size() + skipped_rows.size() - 1 == points);

    // Same-seed judge reproduces its reference labels exactly.
    for (const auto& line : reports) {
      const auto r = eval_report_from_json(nlohmann::json::parse(line));
      if (r.judge_model_id == "Qwen/Qwen3-8B" && r.gt_model_id == "mock-reference-a") CHECK(r.accuracy == 1.0);
    }

    // Selection exports agree with the exemplars the sweep used.
    std::map<std::string, std::vector<std::string>> used;
    for (const auto& line : reports) {
      const auto r = eval_report_from_json(nlohmann::json::parse(line));
      used[r.gt_model_id + "|" + r.spec->key()] = r.exemplar_ids;
    }
    const auto sel_index = nlohmann::json::parse(slurp(dir / "selections" / "index.json"));
    CHECK(!sel_index.empty());
    for (const auto& e : sel_index) {
      const auto set = nlohmann::json::parse(slurp(dir / e["path"].get<std::string>()));
      const auto spec = sample_spec_from_json(e["spec"]);
      const auto examples = sample_set_from_json(set, read_corpus(dir / "corpus" / "corpus.jsonl"));
      std::vector<std::string> ids;
      for (const auto& ex : examples) ids.push_back(ex.resume_id);
      CHECK(used.at(e["gt_model_id"].get<std::string>() + "|" + spec.key()) == ids);
    }

    // Analysis exports.
    const auto index = nlohmann::json::parse(slurp(dir / "analysis" / "index.json"));
    const auto corpus = read_corpus(dir / "corpus" / "corpus.jsonl");
    const auto ce = read_embedding_export(dir / index["embedding_export"].get<std::string>());
    CHECK(ce.size() == corpus.size());
    CHECK(ce.dim() == 64);
    const auto stats = nlohmann::json::parse(slurp(dir / index["score_stats"].get<std::string>()));
    CHECK(stats.is_object());
    CHECK(!index["verdict_dumps"].empty());
    for (const auto& d : index["verdict_dumps"]) {
      const auto vs = read_verdicts(dir / d["path"].get<std::string>());
      CHECK(!vs.empty());
    }
    CHECK(fs::exists(dir / index["selections"].get<std::string>()));

    const auto tables = slurp(dir / "report" / "tables.md");
    CHECK(tables.find("## Accuracy with mock-reference-a as the ground truth") != std::string::npos);
    CHECK(tables.find("Ground-truth disagreement rate") != std::string::npos);
    CHECK(p.report().outcome == StageOutcome::Cached);
    fs::remove_all(root);
  }

  TEST_CASE("orphan files fail the report") {
    const auto root = rj_test::temp_dir("orphan");
    Pipeline p(small_config("orphan"), root);
    for (auto s : all_stages()) {
      if (s != Stage::Report) p.run(s, kCorpus);
    }
    std::ofstream(p.run_dir() / "sweep" / "leftover.tsv") << "x\n";
    try {
      p.report();
      FAIL("expected IntegrityError");
    } catch (const IntegrityError& e) {
      CHECK(std::string(e.what()).find("orphan artifact: sweep/leftover.tsv") != std::string::npos);
    }
    fs::remove(p.run_dir() / "sweep" / "leftover.tsv");
    CHECK(p.report().outcome == StageOutcome::Ran);
    fs::remove_all(root);
  }

  TEST_CASE("config round-trip and run ids") {
    auto cfg = small_config("");
    const auto back = pipeline_config_from_json(to_json(cfg));
    CHECK(config_digest(back) == config_digest(cfg));
    CHECK(resolve_run_id(cfg).rfind("run-", 0) == 0);
    auto other = cfg;
    other.seed = 5;
    CHECK(config_digest(other) != config_digest(cfg));
    cfg.run_id = "../escape";
    CHECK_THROWS_AS(resolve_run_id(cfg), ValidationError);
    cfg.run_id = "";
    cfg.judges.push_back(cfg.judges.front());
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    CHECK(safe_name("Qwen/Qwen3-8B").find('/') == std::string::npos);
  }
}
