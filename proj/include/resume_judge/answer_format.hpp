#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "resume_judge/error.hpp"
#include "resume_judge/types.hpp"

namespace resume_judge {

// The judge answers with a fenced key-value block:
//
//   ```verdict
//   content: 8
//   structure: 7
//   language: 9
//   overall: High
//   rationale: clear conclusion, few concrete numbers
//   ```
//
// Exemplars in the prompt use the same fence and keys for their attributes,
// so what the model is shown is what the parser accepts.

inline constexpr std::string_view kBlockTag = "verdict";

struct VerdictFields {
  Label overall = Label::Unparsed;
  DimScores scores;
  std::optional<std::string> rationale;

  friend bool operator==(const VerdictFields&, const VerdictFields&) = default;
};

/// Attributes carried by a rendered exemplar.
struct ExampleAttributes {
  Label overall = Label::High;
  std::optional<DimScores> scores;

  friend bool operator==(const ExampleAttributes&, const ExampleAttributes&) = default;
};

/// Accepted spellings of the two labels; defaults to the English set.
struct LabelVocabulary {
  std::vector<std::string> high{"High", "high", "HIGH", "H"};
  std::vector<std::string> low{"Low", "low", "LOW", "L"};
};

std::string render_verdict_block(const VerdictFields& v, std::optional<int> target = std::nullopt);
std::string render_attributes_block(const ExampleAttributes& a);

/// The block skeleton shown to the judge in the instruction.
std::string answer_format_template(bool with_target);

/// Extracts one verdict from a full response. Prefers a fenced block; falls
/// back to labelled lines anywhere in the text. Throws ParseError naming the
/// offending field ("block" when nothing usable was found).
VerdictFields parse_verdict(std::string_view raw, const LabelVocabulary& vocab = {});

/// One entry per target slot (1-based slots map to index slot-1) for a
/// response that answers several targets with `target: k` blocks.
std::vector<std::variant<VerdictFields, ParseError>> parse_packed_verdicts(std::string_view raw, std::size_t n_targets,
                                                                           const LabelVocabulary& vocab = {});

/// Parses an exemplar attribute block (overall, optional three scores).
ExampleAttributes parse_example_attributes(std::string_view block, const LabelVocabulary& vocab = {});

}  // namespace resume_judge
