#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace resume_judge {

using ResumeId = std::string;

enum class Label { High, Low, Unparsed };

std::string_view to_string(Label label);

/// Parses "High" / "Low" / "Unparsed". Throws ValidationError otherwise.
Label label_from_string(std::string_view text);

/// Per-dimension integer scores, each in [0, 10].
struct DimScores {
  int content = 0;
  int structure = 0;
  int language = 0;

  int sum() const { return content + structure + language; }
  bool valid() const;

  friend bool operator==(const DimScores&, const DimScores&) = default;
};

/// One reference judge's verdicts over a corpus. Resumes the reference judge
/// failed to score are absent from `labels`.
struct GroundTruthSet {
  std::string model_id;
  std::string template_version;
  std::string corpus_digest;
  std::map<ResumeId, Label> labels;
  std::map<ResumeId, DimScores> dim_scores;

  bool contains(const ResumeId& id) const { return labels.count(id) != 0; }
  Label label(const ResumeId& id) const;
  std::optional<DimScores> scores(const ResumeId& id) const;
};

}  // namespace resume_judge
