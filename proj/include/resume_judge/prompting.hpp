#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "resume_judge/answer_format.hpp"
#include "resume_judge/corpus.hpp"
#include "resume_judge/sampling.hpp"

namespace resume_judge {

struct Perspective {
  std::string name;
  std::vector<std::string> criteria;

  friend bool operator==(const Perspective&, const Perspective&) = default;
};

struct Dimension {
  std::string name;  // Content | Structure | Language
  std::vector<Perspective> perspectives;

  friend bool operator==(const Dimension&, const Dimension&) = default;
};

struct CriteriaTable {
  std::vector<Dimension> dimensions;

  /// Content, Structure, Language in that order with 2/3/3 perspectives and
  /// no empty criterion. Throws ValidationError otherwise.
  void validate() const;

  friend bool operator==(const CriteriaTable&, const CriteriaTable&) = default;
};

nlohmann::json to_json(const CriteriaTable& table);
CriteriaTable criteria_from_json(const nlohmann::json& j);

/// Locale-specific headings and labels used when rendering.
struct PromptStrings {
  std::string heading_persona;
  std::string heading_criteria;
  std::string heading_instruction;
  std::string heading_examples;
  std::string heading_targets;
  std::string example_label;
  std::string target_label;
  std::string position_label;
  std::string question_label;
  std::string answer_label;
  std::string attributes_label;
  std::map<std::string, std::string> dimension_display;
  LabelVocabulary vocabulary;
};

/// A versioned set of prompt assets: persona, instruction, format reminder,
/// criteria and strings. Text assets may use {{placeholder}} tokens.
struct TemplateSet {
  std::string locale;
  std::string version;   // asset-declared version
  std::string persona;
  std::string instruction;
  std::string reminder;
  CriteriaTable criteria;
  PromptStrings strings;

  /// "<locale>-v<version>-<digest8>", the digest covering every asset.
  std::string template_version() const;
};

/// Assets compiled into the library ("en" or "ja").
TemplateSet builtin_templates(std::string_view locale);

/// Loads persona.txt, instruction.txt, reminder.txt, criteria.json and
/// strings.json from `dir`. Lines starting with "#!" are asset comments.
TemplateSet load_templates(const std::filesystem::path& dir, std::string locale);

/// Replaces every {{name}} token. Throws ValidationError on an unknown or
/// unterminated token.
std::string fill_placeholders(std::string_view text, const std::map<std::string, std::string>& values);

/// The resume's position and question/answer items.
std::string render_resume(const ResumeRecord& record, const PromptStrings& strings);

/// Resume followed by its attribute block. Throws ValidationError if
/// `attribute_type` asks for dimension scores the example does not carry.
std::string render_example(const FewShotExample& ex, AttributeType attribute_type, const PromptStrings& strings);

std::string render_criteria(const CriteriaTable& table, const PromptStrings& strings);

struct PromptBundle {
  std::string persona;
  std::string instruction;  // with placeholders filled
  CriteriaTable criteria;
  std::vector<FewShotExample> examples;
  AttributeType attribute_type = AttributeType::OverallOnly;
  std::vector<ResumeRecord> targets;
  PromptStrings strings;
  std::string rendered;
  std::string template_version;
};

/// Persona, criteria, instruction, optional examples, numbered targets.
/// Throws ValidationError when `targets` is empty.
PromptBundle build_prompt(const TemplateSet& templates, const std::vector<FewShotExample>& examples,
                          AttributeType attribute_type, const std::vector<ResumeRecord>& targets);

/// Re-renders a bundle from its parts.
std::string render_bundle(const PromptBundle& bundle);

/// The one-message reminder appended on a retry.
std::string format_reminder(const TemplateSet& templates, bool with_target);

}  // namespace resume_judge
