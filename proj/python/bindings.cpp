#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "resume_judge/error.hpp"
#include "resume_judge/evaluation.hpp"
#include "resume_judge/pipeline.hpp"
#include "resume_judge/synthetic.hpp"

namespace py = pybind11;
namespace rj = resume_judge;
using nlohmann::json;

namespace {

py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::handle& obj) {
  return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

rj::CorpusEmbedding embedding_from(const std::vector<std::string>& ids, const std::vector<std::vector<double>>& vectors) {
  if (ids.size() != vectors.size()) throw rj::ValidationError("ids and vectors differ in length");
  rj::CorpusEmbedding ce("python");
  for (std::size_t i = 0; i < ids.size(); ++i) ce.add(ids[i], rj::EmbeddingVector(vectors[i], "python"));
  return ce;
}

rj::GroundTruthSet gt_from(const std::map<std::string, std::string>& labels) {
  rj::GroundTruthSet gt;
  gt.model_id = "python";
  for (const auto& [id, l] : labels) gt.labels[id] = rj::label_from_string(l);
  return gt;
}

std::vector<rj::JudgeVerdict> verdicts_from(const std::map<std::string, std::string>& preds) {
  std::vector<rj::JudgeVerdict> out;
  for (const auto& [id, l] : preds) {
    rj::JudgeVerdict v;
    v.resume_id = id;
    v.overall = rj::label_from_string(l);
    out.push_back(v);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Few-shot LLM resume judging core";

  auto base = py::register_exception<rj::Error>(m, "Error");
  py::register_exception<rj::ValidationError>(m, "ValidationError", base);
  py::register_exception<rj::ParseError>(m, "ParseError", base);
  py::register_exception<rj::InfeasibleSpecError>(m, "InfeasibleSpecError", base);
  py::register_exception<rj::MissingStageError>(m, "MissingStageError", base);
  py::register_exception<rj::StaleArtifactError>(m, "StaleArtifactError", base);
  py::register_exception<rj::IntegrityError>(m, "IntegrityError", base);

  m.def("ingest", [](const std::filesystem::path& source, std::size_t min_item_chars, const std::string& salt) {
    rj::IngestOptions opts{min_item_chars, salt};
    const auto res = rj::ingest(source, opts);
    json records = json::array();
    for (const auto& r : res.records) records.push_back(rj::to_json(r));
    return to_py(records);
  }, py::arg("source"), py::arg("min_item_chars") = 100, py::arg("salt") = "resume-judge");

  m.def("synthetic_corpus", &rj::generate_synthetic_corpus, py::arg("n"), py::arg("seed") = 0,
        "Raw JSONL lines of a seeded synthetic corpus");

  m.def("diversity_ranks", &rj::diversity_ranks, py::arg("corpus_size"), py::arg("n"));
  m.def("low_quota", &rj::low_quota, py::arg("n_shots"), py::arg("low_fraction") = 0.3);

  m.def("select", [](const std::string& strategy, const std::vector<std::string>& ids,
                     const std::vector<std::vector<double>>& vectors, std::size_t n, std::uint64_t seed) {
    return rj::select(rj::strategy_from_string(strategy), embedding_from(ids, vectors), n, seed);
  }, py::arg("strategy"), py::arg("ids"), py::arg("vectors"), py::arg("n"), py::arg("seed") = 0);

  m.def("rank_by_similarity", [](const std::vector<std::string>& ids, const std::vector<std::vector<double>>& vectors) {
    return rj::rank_by_similarity(embedding_from(ids, vectors));
  }, py::arg("ids"), py::arg("vectors"));

  m.def("parse_verdict", [](const std::string& raw, const std::string& locale) {
    const auto v = rj::parse_verdict(raw, rj::builtin_templates(locale).strings.vocabulary);
    py::dict d;
    d["overall"] = std::string(rj::to_string(v.overall));
    d["content"] = v.scores.content;
    d["structure"] = v.scores.structure;
    d["language"] = v.scores.language;
    d["rationale"] = v.rationale ? py::object(py::str(*v.rationale)) : py::object(py::none());
    return d;
  }, py::arg("raw"), py::arg("locale") = "en");

  m.def("accuracy", [](const std::map<std::string, std::string>& preds, const std::map<std::string, std::string>& gt) {
    return rj::accuracy(verdicts_from(preds), gt_from(gt));
  }, py::arg("predictions"), py::arg("ground_truth"));

  m.def("disagreement_rate", [](const std::vector<std::map<std::string, std::string>>& sets) {
    std::vector<rj::GroundTruthSet> gts;
    for (const auto& s : sets) gts.push_back(gt_from(s));
    return rj::disagreement_rate(gts);
  }, py::arg("ground_truths"));

  m.def("timing_report", [](const std::vector<double>& latencies) {
    const auto t = rj::timing_report(latencies);
    return std::make_pair(t.mean_s, t.std_s);
  }, py::arg("latencies"), "(mean, sample std) in seconds");

  m.def("read_verdicts", [](const std::filesystem::path& path) {
    json out = json::array();
    for (const auto& v : rj::read_verdicts(path)) out.push_back(rj::to_json(v));
    return to_py(out);
  }, py::arg("path"));

  m.def("mock_judge", [](const py::dict& record, std::uint64_t seed) {
    const auto v = rj::mock_judge(rj::record_from_json(from_py(record)), seed);
    py::dict d;
    d["overall"] = std::string(rj::to_string(v.overall));
    d["content"] = v.scores.content;
    d["structure"] = v.scores.structure;
    d["language"] = v.scores.language;
    d["latency_s"] = v.latency_s;
    return d;
  }, py::arg("record"), py::arg("seed") = 0);

  m.def("stages", [] {
    std::vector<std::string> out;
    for (auto s : rj::all_stages()) out.emplace_back(rj::to_string(s));
    return out;
  });

  py::class_<rj::Pipeline>(m, "Pipeline")
      .def(py::init([](const py::object& config, const std::filesystem::path& runs_root,
                       const std::optional<std::string>& run_id) {
             rj::PipelineConfig cfg;
             if (py::isinstance<py::dict>(config)) {
               cfg = rj::pipeline_config_from_json(from_py(config));
             } else if (!config.is_none()) {
               cfg = rj::load_pipeline_config(config.cast<std::filesystem::path>());
             } else {
               cfg.judges = rj::default_judges();
             }
             if (run_id) cfg.run_id = *run_id;
             cfg.validate();
             return std::make_unique<rj::Pipeline>(cfg, runs_root);
           }),
           py::arg("config") = py::none(), py::arg("runs_root") = "runs", py::arg("run_id") = py::none())
      .def_property_readonly("run_dir", [](const rj::Pipeline& p) { return p.run_dir(); })
      .def_property_readonly("manifest", [](const rj::Pipeline& p) { return to_py(rj::to_json(p.manifest())); })
      .def("run", [](rj::Pipeline& p, const std::string& stage, const std::filesystem::path& source, bool force) {
             py::gil_scoped_release release;
             const auto r = p.run(rj::stage_from_string(stage), source, force);
             return std::make_pair(r.outcome == rj::StageOutcome::Cached ? std::string("cached") : std::string("ran"),
                                   r.message);
           },
           py::arg("stage"), py::arg("source") = std::filesystem::path(), py::arg("force") = false)
      .def("run_all", [](rj::Pipeline& p, const std::filesystem::path& source) {
             std::vector<std::string> messages;
             py::gil_scoped_release release;
             for (auto s : rj::all_stages()) messages.push_back(p.run(s, source).message);
             return messages;
           },
           py::arg("source"))
      .def("integrity_problems", &rj::Pipeline::integrity_problems);
}
