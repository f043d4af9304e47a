#include <doctest.h>

#include <numeric>
#include <random>
#include <set>

#include "helpers.hpp"
#include "resume_judge/evaluation.hpp"

using namespace resume_judge;

namespace {

JudgeVerdict verdict(const std::string& id, Label label, std::optional<DimScores> s = std::nullopt,
                     double latency = 1.0) {
  JudgeVerdict v;
  v.resume_id = id;
  v.overall = label;
  if (label != Label::Unparsed) v.scores = s ? s : DimScores{5, 5, 5};
  v.latency_s = latency;
  return v;
}

GroundTruthSet labelled(const std::string& model, const std::vector<std::pair<std::string, Label>>& labels) {
  std::vector<std::string> ids;
  std::vector<Label> ls;
  for (const auto& [id, l] : labels) ids.push_back(id), ls.push_back(l);
  return rj_test::ground_truth_of(model, ids, ls);
}

// Labels from mock_judge so a mock judge with the same seed agrees exactly.
GroundTruthSet mock_gt(const std::string& model, const std::vector<ResumeRecord>& recs, std::uint64_t seed) {
  GroundTruthSet gt;
  gt.model_id = model;
  for (const auto& r : recs) {
    const auto m = mock_judge(r, seed);
    gt.labels[r.id] = m.overall;
    gt.dim_scores[r.id] = m.scores;
  }
  return gt;
}

JudgeConfig mock_cfg(std::uint64_t seed) {
  JudgeConfig c;
  c.name = "mock";
  c.model_id = "mock-model";
  c.mock_seed = seed;
  c.batch_size = 8;
  return c;
}

}  // namespace

TEST_SUITE("evaluation") {
  TEST_CASE("accuracy on a hand example") {
    const auto gt = labelled("g", {{"a", Label::High}, {"b", Label::Low}, {"c", Label::High}, {"d", Label::Low}});
    const std::vector<JudgeVerdict> preds{verdict("a", Label::High), verdict("b", Label::High),
                                          verdict("c", Label::Unparsed), verdict("d", Label::Low)};
    const auto m = count_matches(preds, gt);
    CHECK(m.matches == 2);
    CHECK(m.n == 4);
    CHECK(accuracy(preds, gt) == 0.5);
    CHECK_THROWS_AS(count_matches({}, gt), ValidationError);
    CHECK_THROWS_AS(count_matches({verdict("zz", Label::High)}, gt), LookupError);
  }

  TEST_CASE("property: accuracy equals an independent count") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t n = 1 + rng() % 40;
      std::vector<std::pair<std::string, Label>> truth;
      std::vector<JudgeVerdict> preds;
      std::size_t expected = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto id = "x" + std::to_string(i);
        const Label t = rng() % 2 ? Label::High : Label::Low;
        const Label p = static_cast<Label>(rng() % 3);
        truth.emplace_back(id, t);
        preds.push_back(verdict(id, p));
        expected += (p == t);
      }
      const auto gt = labelled("g", truth);
      CHECK(count_matches(preds, gt).matches == expected);
      CHECK(accuracy(preds, gt) == doctest::Approx(static_cast<double>(expected) / static_cast<double>(n)));
      const double a = accuracy(preds, gt);
      CHECK(a >= 0.0);
      CHECK(a <= 1.0);
    }
  }

  TEST_CASE("disagreement rate") {
    const auto a = labelled("a", {{"1", Label::High}, {"2", Label::High}, {"3", Label::Low}, {"4", Label::Low}});
    const auto b = labelled("b", {{"1", Label::High}, {"2", Label::Low}, {"3", Label::Low}, {"4", Label::Low}});
    const auto c = labelled("c", {{"1", Label::High}, {"2", Label::High}, {"3", Label::Low}, {"4", Label::Low},
                                  {"5", Label::High}});
    CHECK(disagreement_rate({a, b}) == 0.25);
    CHECK(disagreement_rate({a, b, c}) == 0.25);
    CHECK(disagreement_rate({c, a, b}) == 0.25);
    CHECK(disagreement_rate({b, c, a}) == 0.25);
    CHECK(disagreement_rate({a, c}) == 0.0);
    CHECK_THROWS_AS(disagreement_rate({a}), ValidationError);
    const auto d = labelled("d", {{"9", Label::High}});
    CHECK_THROWS_AS(disagreement_rate({a, d}), ValidationError);
  }

  TEST_CASE("score statistics") {
    const std::vector<JudgeVerdict> vs{verdict("a", Label::High, DimScores{8, 7, 9}),
                                       verdict("b", Label::Low, DimScores{6, 5, 7}),
                                       verdict("c", Label::Unparsed)};
    const auto s = score_stats(vs);
    CHECK(s.content.mean == 7.0);
    CHECK(s.structure.mean == 6.0);
    CHECK(s.language.mean == 8.0);
    CHECK(s.content.count == 2);
    CHECK(s.content.histogram[8] == 1);
    CHECK(s.content.histogram[6] == 1);
    CHECK(std::accumulate(s.language.histogram.begin(), s.language.histogram.end(), std::size_t{0}) == 2);
    CHECK_THROWS_AS(score_stats(std::vector<JudgeVerdict>{verdict("c", Label::Unparsed)}), ValidationError);
    const auto j = to_json(s);
    CHECK(j["content"]["mean"] == 7.0);
    CHECK(j["content"]["histogram"].size() == 11);
  }

  TEST_CASE("timing") {
    const std::vector<double> flat{1, 1, 1}, pair{1, 3};
    const auto t1 = timing_report(flat);
    CHECK(t1.mean_s == 1.0);
    CHECK(t1.std_s == 0.0);
    const auto t2 = timing_report(pair);
    CHECK(t2.mean_s == 2.0);
    CHECK(std::abs(t2.std_s - std::sqrt(2.0)) < 1e-9);
    const std::vector<double> one{1};
    CHECK_THROWS_AS(timing_report(one), ValidationError);
  }

  TEST_CASE("ground truth build excludes unparsed resumes") {
    const auto t = builtin_templates("en");
    const auto recs = rj_test::make_records(3);
    // Replies are handed out in request order; one wave of a single request
    // at a time keeps that order fixed.
    rj_test::ScriptedChatBackend backend({"```verdict\ncontent: 9\nstructure: 9\nlanguage: 9\noverall: High\n```",
                                          "nonsense", "nonsense",
                                          "```verdict\ncontent: 1\nstructure: 1\nlanguage: 1\noverall: Low\n```"});
    JudgeConfig cfg;
    cfg.name = "ref";
    cfg.model_id = "ref/model";
    cfg.batch_size = 1;
    cfg.max_retries = 1;
    const auto build = build_ground_truth(recs, cfg, {t, backend}, "abcdef0123456789");
    CHECK(build.verdicts.size() == 3);
    CHECK(build.excluded == std::vector<std::string>{"r001"});
    CHECK(build.gt.labels.size() == 2);
    CHECK(build.gt.label("r000") == Label::High);
    CHECK(build.gt.label("r002") == Label::Low);
    CHECK(build.gt.scores("r002") == DimScores{1, 1, 1});
    CHECK(build.gt.template_version == t.template_version());

    const auto name = ground_truth_file_name(build.gt);
    CHECK(name.find('/') == std::string::npos);
    CHECK(name.find("abcdef012345") != std::string::npos);
    const auto dir = rj_test::temp_dir("gt");
    write_ground_truth(dir / name, build.gt);
    const auto back = read_ground_truth(dir / name);
    CHECK(back.labels == build.gt.labels);
    CHECK(back.dim_scores == build.gt.dim_scores);
    CHECK(back.corpus_digest == "abcdef0123456789");
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("evaluation excludes exemplars and resumes without ground truth") {
    const auto t = builtin_templates("en");
    const auto recs = rj_test::make_records(20);
    auto gt = mock_gt("g", recs, 4);
    gt.labels.erase("r005");
    gt.dim_scores.erase("r005");
    MockChatBackend backend(4);
    std::vector<FewShotExample> ex(2);
    ex[0] = {"r000", recs[0], gt.label("r000"), std::nullopt};
    ex[1] = {"r001", recs[1], gt.label("r001"), std::nullopt};
    SampleSpec spec;
    spec.n_shots = 2;
    std::vector<JudgeVerdict> vs;
    const auto r = evaluate_configuration(recs, gt, ex, spec, mock_cfg(4), {t, backend}, &vs);
    CHECK(r.exemplar_excluded == 2);
    CHECK(r.gt_excluded == 1);
    CHECK(r.n == 17);
    CHECK(r.n + r.exemplar_excluded + r.gt_excluded == recs.size());
    CHECK(r.accuracy == 1.0);
    CHECK(vs.size() == 17);
    for (const auto& v : vs) {
      CHECK(v.resume_id != "r000");
      CHECK(v.resume_id != "r005");
    }
    CHECK(r.exemplar_ids == std::vector<std::string>{"r000", "r001"});
    const auto timing = timing_report(vs);
    CHECK(r.timing_mean_s == timing.mean_s);
    CHECK(r.timing_std_s == timing.std_s);
    CHECK(r.per_dimension_means[0] == score_stats(vs).content.mean);
  }

  TEST_CASE("grid") {
    SweepGrid g;
    CHECK(g.size() == 60);
    const auto pts = g.points();
    CHECK(pts.size() == 60);
    CHECK(pts.front().key() == "diversity-n3-high_only-overall_only-s0");
    CHECK(pts[1].attribute_type == AttributeType::OverallAndDimensions);
    CHECK(pts[2].sample_type == SampleType::HighAndLow);
    CHECK(pts[4].n_shots == 5);
    CHECK(pts[20].strategy == Strategy::Similarity);
    std::set<std::string> keys;
    for (const auto& p : pts) keys.insert(p.key());
    CHECK(keys.size() == 60);
    g.seeds = {1, 2};
    CHECK(g.size() == 120);
    CHECK(sweep_grid_from_json(to_json(g)).points().size() == 120);
    g.shots = {};
    CHECK_THROWS_AS(g.validate(), ValidationError);
  }

  TEST_CASE("property: best configuration equals a brute-force argmax") {
    std::mt19937_64 rng(77);
    SweepGrid grid;
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<EvalReport> reports;
      const auto pts = grid.points();
      for (int i = 0; i < 25; ++i) {
        EvalReport r;
        r.gt_model_id = rng() % 2 ? "g1" : "g2";
        if (rng() % 6 == 0) {
          r.spec = std::nullopt;
        } else {
          r.spec = pts[rng() % pts.size()];
        }
        r.n = 2 + rng() % 3;  // small denominators make ties common
        r.matches = rng() % (r.n + 1);
        r.accuracy = static_cast<double>(r.matches) / static_cast<double>(r.n);
        reports.push_back(r);
      }
      const auto best = best_per_ground_truth(reports, grid);
      for (const std::string g : {"g1", "g2"}) {
        std::optional<std::size_t> oracle;
        for (std::size_t i = 0; i < reports.size(); ++i) {
          const auto& r = reports[i];
          if (r.gt_model_id != g || !r.spec) continue;
          if (!oracle) {
            oracle = i;
            continue;
          }
          const auto& o = reports[*oracle];
          const long double ra = static_cast<long double>(r.matches) / r.n;
          const long double oa = static_cast<long double>(o.matches) / o.n;
          const bool same_acc = r.matches * o.n == o.matches * r.n;
          if (!same_acc ? ra > oa
                        : (r.spec->n_shots != o.spec->n_shots ? r.spec->n_shots < o.spec->n_shots
                                                              : r.spec->strategy < o.spec->strategy))
            oracle = i;
        }
        if (oracle) {
          REQUIRE(best.count(g) == 1);
          CHECK(best.at(g) == *oracle);
        } else {
          CHECK(best.count(g) == 0);
        }
      }
    }
  }

  TEST_CASE("sweep is deterministic and independent of parallelism") {
    const auto t = builtin_templates("en");
    const auto recs = rj_test::make_records(40);
    const auto ce = rj_test::random_embedding(recs, 6, 8);
    const std::vector<GroundTruthSet> gts{mock_gt("g-same", recs, 5), mock_gt("g-other", recs, 6)};
    SweepGrid grid;
    grid.shots = {3, 5};
    grid.strategies = {Strategy::Similarity, Strategy::Clustering};
    MockChatBackend b1(5), b2(5);
    const auto r1 = run_sweep(grid, recs, ce, gts, mock_cfg(5), {t, b1}, {1, true});
    const auto r2 = run_sweep(grid, recs, ce, gts, mock_cfg(5), {t, b2}, {3, true});
    CHECK(r1.reports.size() + r1.skipped.size() == gts.size() * grid.size());
    CHECK(reports_to_tsv(r1.reports) == reports_to_tsv(r2.reports));
    CHECK(sweep_summary_markdown(r1) == sweep_summary_markdown(r2));
    CHECK(r1.best == r2.best);
    REQUIRE(r1.verdicts.size() == r1.reports.size());
    for (std::size_t i = 0; i < r1.reports.size(); ++i) {
      const auto& r = r1.reports[i];
      CHECK(r1.verdicts[i].size() == r.n);
      CHECK(r.n + r.exemplar_excluded + r.gt_excluded == recs.size());
      CHECK(r.exemplar_excluded == static_cast<std::size_t>(r.spec->n_shots));
      if (r.gt_model_id == "g-same") CHECK(r.accuracy == 1.0);
      CHECK(eval_report_from_json(to_json(r)).exemplar_ids == r.exemplar_ids);
    }
  }

  TEST_CASE("infeasible points are skipped, not fatal") {
    const auto t = builtin_templates("en");
    const auto recs = rj_test::make_records(12);
    const auto ce = rj_test::random_embedding(recs, 4, 1);
    std::vector<std::pair<std::string, Label>> labels;
    for (std::size_t i = 0; i < recs.size(); ++i) labels.emplace_back(recs[i].id, i < 4 ? Label::High : Label::Low);
    SweepGrid grid;
    grid.strategies = {Strategy::Diversity};
    grid.shots = {3, 5};
    grid.sample_types = {SampleType::HighOnly};
    grid.attribute_types = {AttributeType::OverallOnly};
    MockChatBackend b(0);
    const auto res = run_sweep(grid, recs, ce, {labelled("g", labels)}, mock_cfg(0), {t, b});
    CHECK(res.reports.size() == 1);
    REQUIRE(res.skipped.size() == 1);
    CHECK(res.skipped[0].spec.n_shots == 5);
    CHECK(res.skipped[0].reason.find("high") != std::string::npos);
    CHECK(sweep_summary_markdown(res).find("5") != std::string::npos);
  }

  TEST_CASE("report table layout") {
    EvalReport zero;
    zero.gt_model_id = "g";
    zero.judge_model_id = "j";
    zero.n = 10;
    zero.matches = 7;
    zero.accuracy = 0.7;
    EvalReport few = zero;
    SampleSpec spec;
    spec.strategy = Strategy::Clustering;
    spec.n_shots = 5;
    few.spec = spec;
    few.exemplar_ids = {"a", "b"};
    const auto tsv = reports_to_tsv({zero, few});
    std::vector<std::string> lines;
    std::size_t start = 0;
    for (auto pos = tsv.find('\n'); pos != std::string::npos; start = pos + 1, pos = tsv.find('\n', start))
      lines.push_back(tsv.substr(start, pos - start));
    REQUIRE(lines.size() == 4);
    CHECK(lines[0].rfind("# ", 0) == 0);
    CHECK(lines[1].rfind("gt_model\tjudge_model\tstrategy\tshots\t", 0) == 0);
    CHECK(lines[2].find("\tzero_shot\t0\t") != std::string::npos);
    CHECK(lines[2].find("\t0.700000\t7\t10\t") != std::string::npos);
    CHECK(lines[3].find("\tclustering\t5\t") != std::string::npos);
    const auto cols = [](const std::string& l) { return std::count(l.begin(), l.end(), '\t'); };
    CHECK(cols(lines[1]) == cols(lines[2]));
    CHECK(cols(lines[1]) == cols(lines[3]));
  }
}
