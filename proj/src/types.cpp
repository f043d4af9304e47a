#include "resume_judge/types.hpp"

#include "resume_judge/error.hpp"

namespace resume_judge {

std::string_view to_string(Label label) {
  switch (label) {
    case Label::High:
      return "High";
    case Label::Low:
      return "Low";
    case Label::Unparsed:
      return "Unparsed";
  }
  return "Unparsed";
}

Label label_from_string(std::string_view text) {
  if (text == "High") return Label::High;
  if (text == "Low") return Label::Low;
  if (text == "Unparsed") return Label::Unparsed;
  throw ValidationError("unknown label: " + std::string(text));
}

bool DimScores::valid() const {
  auto in_range = [](int v) { return v >= 0 && v <= 10; };
  return in_range(content) && in_range(structure) && in_range(language);
}

Label GroundTruthSet::label(const ResumeId& id) const {
  auto it = labels.find(id);
  if (it == labels.end()) {
    throw LookupError("ground truth " + model_id + " has no label for " + id);
  }
  return it->second;
}

std::optional<DimScores> GroundTruthSet::scores(const ResumeId& id) const {
  auto it = dim_scores.find(id);
  if (it == dim_scores.end()) return std::nullopt;
  return it->second;
}

}  // namespace resume_judge
