#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "resume_judge/answer_format.hpp"
#include "resume_judge/prompting.hpp"

using namespace resume_judge;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path parser_dir() { return fs::path(RJ_FIXTURE_DIR) / "parser"; }

}  // namespace

TEST_SUITE("answer_format") {
  TEST_CASE("fixture corpus") {
    const auto expect = nlohmann::json::parse(slurp(parser_dir() / "expectations.json"));
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(parser_dir())) files += e.path().extension() == ".txt";
    CHECK(files == expect.size());
    CHECK(files >= 20);

    for (const auto& [name, want] : expect.items()) {
      CAPTURE(name);
      const auto raw = slurp(parser_dir() / name);
      const auto vocab = builtin_templates(want.value("locale", "en")).strings.vocabulary;
      if (want.contains("error")) {
        try {
          parse_verdict(raw, vocab);
          FAIL("expected a parse error");
        } catch (const ParseError& err) {
          CHECK(err.field() == want["error"].get<std::string>());
          CHECK(err.raw() == raw);
        }
      } else {
        const auto v = parse_verdict(raw, vocab);
        CHECK(to_string(v.overall) == want["overall"].get<std::string>());
        CHECK(v.scores.content == want["content"].get<int>());
        CHECK(v.scores.structure == want["structure"].get<int>());
        CHECK(v.scores.language == want["language"].get<int>());
      }
    }
  }

  TEST_CASE("rendered blocks round-trip") {
    for (int c = 0; c <= 10; c += 5) {
      for (auto label : {Label::High, Label::Low}) {
        VerdictFields v{label, {c, 10 - c, 3}, std::string("fine")};
        CHECK(parse_verdict(render_verdict_block(v)) == v);
        CHECK(parse_verdict("Some thoughts first.\n\n" + render_verdict_block(v) + "\nThanks.") == v);
      }
    }
    ExampleAttributes a{Label::Low, DimScores{1, 2, 3}};
    CHECK(parse_example_attributes(render_attributes_block(a)) == a);
    ExampleAttributes b{Label::High, std::nullopt};
    CHECK(parse_example_attributes(render_attributes_block(b)) == b);
  }

  TEST_CASE("packed responses") {
    VerdictFields one{Label::High, {8, 8, 8}, std::nullopt};
    VerdictFields three{Label::Low, {2, 2, 2}, std::nullopt};
    const auto raw = render_verdict_block(three, 3) + "\n\n" + render_verdict_block(one, 1) + "\n";
    const auto out = parse_packed_verdicts(raw, 3);
    REQUIRE(out.size() == 3);
    REQUIRE(std::holds_alternative<VerdictFields>(out[0]));
    CHECK(std::get<VerdictFields>(out[0]) == one);
    CHECK(std::holds_alternative<ParseError>(out[1]));
    REQUIRE(std::holds_alternative<VerdictFields>(out[2]));
    CHECK(std::get<VerdictFields>(out[2]) == three);
  }

  TEST_CASE("packed response with nothing usable") {
    const auto out = parse_packed_verdicts("I cannot evaluate these.", 2);
    REQUIRE(out.size() == 2);
    for (const auto& o : out) CHECK(std::holds_alternative<ParseError>(o));
  }

  TEST_CASE("the answer-format skeleton is not itself a verdict") {
    CHECK_THROWS_AS(parse_verdict(answer_format_template(false)), ParseError);
  }
}
