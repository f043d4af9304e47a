#include "resume_judge/prompting.hpp"

#include <fstream>
#include <sstream>

#include "resume_judge/digest.hpp"
#include "resume_judge/error.hpp"

namespace resume_judge {

namespace detail {
const std::map<std::string, std::string>& builtin_asset_files();
}

using nlohmann::json;

namespace {

constexpr std::array<std::pair<const char*, std::size_t>, 3> kDimensionShape = {
    {{"Content", 2}, {"Structure", 3}, {"Language", 3}}};

std::string strip_asset_comments(std::string_view text) {
  std::string out;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("#!", 0) == 0) continue;
    out += line;
    out += '\n';
  }
  while (!out.empty() && (out.back() == '\n' || out.back() == ' ')) out.pop_back();
  return out;
}

PromptStrings strings_from_json(const json& j) {
  PromptStrings s;
  s.heading_persona = j.at("heading_persona").get<std::string>();
  s.heading_criteria = j.at("heading_criteria").get<std::string>();
  s.heading_instruction = j.at("heading_instruction").get<std::string>();
  s.heading_examples = j.at("heading_examples").get<std::string>();
  s.heading_targets = j.at("heading_targets").get<std::string>();
  s.example_label = j.at("example_label").get<std::string>();
  s.target_label = j.at("target_label").get<std::string>();
  s.position_label = j.at("position_label").get<std::string>();
  s.question_label = j.at("question_label").get<std::string>();
  s.answer_label = j.at("answer_label").get<std::string>();
  s.attributes_label = j.at("attributes_label").get<std::string>();
  s.dimension_display = j.value("dimension_display", std::map<std::string, std::string>{});
  s.vocabulary.high = j.at("high_synonyms").get<std::vector<std::string>>();
  s.vocabulary.low = j.at("low_synonyms").get<std::vector<std::string>>();
  return s;
}

json strings_to_json(const PromptStrings& s) {
  return {{"heading_persona", s.heading_persona},
          {"heading_criteria", s.heading_criteria},
          {"heading_instruction", s.heading_instruction},
          {"heading_examples", s.heading_examples},
          {"heading_targets", s.heading_targets},
          {"example_label", s.example_label},
          {"target_label", s.target_label},
          {"position_label", s.position_label},
          {"question_label", s.question_label},
          {"answer_label", s.answer_label},
          {"attributes_label", s.attributes_label},
          {"dimension_display", s.dimension_display},
          {"high_synonyms", s.vocabulary.high},
          {"low_synonyms", s.vocabulary.low}};
}

TemplateSet assemble(std::string locale, const std::string& persona, const std::string& instruction,
                     const std::string& reminder, const std::string& criteria, const std::string& strings) {
  TemplateSet t;
  t.locale = std::move(locale);
  t.persona = strip_asset_comments(persona);
  t.instruction = strip_asset_comments(instruction);
  t.reminder = strip_asset_comments(reminder);
  try {
    t.criteria = criteria_from_json(json::parse(criteria));
    const auto sj = json::parse(strings);
    t.version = sj.at("version").get<std::string>();
    t.strings = strings_from_json(sj);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid template asset: ") + e.what());
  }
  return t;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) {
    throw IoError("cannot read template asset " + p.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void CriteriaTable::validate() const {
  if (dimensions.size() != kDimensionShape.size()) {
    throw ValidationError("criteria table must have exactly 3 dimensions");
  }
  for (std::size_t i = 0; i < kDimensionShape.size(); ++i) {
    const auto& [name, count] = kDimensionShape[i];
    const auto& d = dimensions[i];
    if (d.name != name) {
      throw ValidationError("criteria dimension " + std::to_string(i + 1) + " must be " + name);
    }
    if (d.perspectives.size() != count) {
      throw ValidationError(std::string(name) + " must have " + std::to_string(count) + " perspectives");
    }
    for (const auto& p : d.perspectives) {
      if (p.name.empty() || p.criteria.empty()) {
        throw ValidationError("empty perspective under " + d.name);
      }
      for (const auto& c : p.criteria) {
        if (c.empty()) throw ValidationError("empty criterion under " + d.name + "/" + p.name);
      }
    }
  }
}

json to_json(const CriteriaTable& table) {
  json dims = json::array();
  for (const auto& d : table.dimensions) {
    json ps = json::array();
    for (const auto& p : d.perspectives) ps.push_back({{"name", p.name}, {"criteria", p.criteria}});
    dims.push_back({{"name", d.name}, {"perspectives", ps}});
  }
  return {{"dimensions", dims}};
}

CriteriaTable criteria_from_json(const json& j) {
  CriteriaTable t;
  for (const auto& d : j.at("dimensions")) {
    Dimension dim;
    dim.name = d.at("name").get<std::string>();
    for (const auto& p : d.at("perspectives")) {
      dim.perspectives.push_back({p.at("name").get<std::string>(), p.at("criteria").get<std::vector<std::string>>()});
    }
    t.dimensions.push_back(std::move(dim));
  }
  t.validate();
  return t;
}

std::string TemplateSet::template_version() const {
  const json all = {{"locale", locale},           {"version", version},   {"persona", persona},
                    {"instruction", instruction}, {"reminder", reminder}, {"criteria", to_json(criteria)},
                    {"strings", strings_to_json(strings)}};
  return locale + "-v" + version + "-" + sha256_hex(all.dump()).substr(0, 8);
}

TemplateSet builtin_templates(std::string_view locale) {
  const auto& files = detail::builtin_asset_files();
  const std::string loc(locale);
  auto get = [&](const std::string& name) -> const std::string& {
    auto it = files.find(loc + "/" + name);
    if (it == files.end()) {
      throw ValidationError("no built-in templates for locale '" + loc + "'");
    }
    return it->second;
  };
  return assemble(loc, get("persona.txt"), get("instruction.txt"), get("reminder.txt"), get("criteria.json"),
                  get("strings.json"));
}

TemplateSet load_templates(const std::filesystem::path& dir, std::string locale) {
  return assemble(std::move(locale), read_file(dir / "persona.txt"), read_file(dir / "instruction.txt"),
                  read_file(dir / "reminder.txt"), read_file(dir / "criteria.json"), read_file(dir / "strings.json"));
}

std::string fill_placeholders(std::string_view text, const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto open = text.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      return out;
    }
    const auto close = text.find("}}", open + 2);
    if (close == std::string_view::npos) {
      throw ValidationError("unterminated placeholder in template");
    }
    const std::string name(text.substr(open + 2, close - open - 2));
    auto it = values.find(name);
    if (it == values.end()) {
      throw ValidationError("unknown template placeholder {{" + name + "}}");
    }
    out.append(text.substr(pos, open - pos));
    out.append(it->second);
    pos = close + 2;
  }
}

std::string render_resume(const ResumeRecord& record, const PromptStrings& strings) {
  std::string out = strings.position_label + ": " + record.applied_position + "\n";
  for (const auto& qa : record.items) {
    out += "\n" + strings.question_label + ": " + qa.question + "\n";
    out += strings.answer_label + ": " + qa.answer + "\n";
  }
  return out;
}

std::string render_example(const FewShotExample& ex, AttributeType attribute_type, const PromptStrings& strings) {
  ExampleAttributes attrs{ex.overall, std::nullopt};
  if (attribute_type == AttributeType::OverallAndDimensions) {
    if (!ex.dim_scores) {
      throw ValidationError("example " + ex.resume_id + " has no dimension scores to render");
    }
    if (!ex.dim_scores->valid()) {
      throw ValidationError("example " + ex.resume_id + " has a score outside [0, 10]");
    }
    attrs.scores = ex.dim_scores;
  }
  if (ex.overall == Label::Unparsed) {
    throw ValidationError("example " + ex.resume_id + " has no overall label");
  }
  return render_resume(ex.record, strings) + "\n" + strings.attributes_label + ":\n" +
         render_attributes_block(attrs) + "\n";
}

std::string render_criteria(const CriteriaTable& table, const PromptStrings& strings) {
  std::string out;
  for (const auto& d : table.dimensions) {
    auto disp = strings.dimension_display.find(d.name);
    out += "## " + (disp != strings.dimension_display.end() ? disp->second : d.name) + "\n";
    for (const auto& p : d.perspectives) {
      out += "- " + p.name + "\n";
      for (const auto& c : p.criteria) out += "  - " + c + "\n";
    }
  }
  return out;
}

std::string render_bundle(const PromptBundle& b) {
  const auto& s = b.strings;
  std::string out;
  out += s.heading_persona + "\n" + b.persona + "\n\n";
  out += s.heading_criteria + "\n" + render_criteria(b.criteria, s) + "\n";
  out += s.heading_instruction + "\n" + b.instruction + "\n\n";
  if (!b.examples.empty()) {
    out += s.heading_examples + "\n";
    for (std::size_t i = 0; i < b.examples.size(); ++i) {
      out += "## " + s.example_label + " " + std::to_string(i + 1) + "\n";
      out += render_example(b.examples[i], b.attribute_type, s) + "\n";
    }
  }
  out += s.heading_targets + "\n";
  for (std::size_t i = 0; i < b.targets.size(); ++i) {
    if (i > 0) out += "\n";
    out += "## " + s.target_label + " " + std::to_string(i + 1) + "\n";
    out += render_resume(b.targets[i], s);
  }
  return out;
}

PromptBundle build_prompt(const TemplateSet& templates, const std::vector<FewShotExample>& examples,
                          AttributeType attribute_type, const std::vector<ResumeRecord>& targets) {
  if (targets.empty()) {
    throw ValidationError("build_prompt: no target resumes");
  }
  PromptBundle b;
  b.persona = templates.persona;
  b.instruction = fill_placeholders(templates.instruction,
                                    {{"n_targets", std::to_string(targets.size())},
                                     {"answer_format", answer_format_template(targets.size() > 1)}});
  b.criteria = templates.criteria;
  b.examples = examples;
  b.attribute_type = attribute_type;
  b.targets = targets;
  b.strings = templates.strings;
  b.template_version = templates.template_version();
  b.rendered = render_bundle(b);
  return b;
}

std::string format_reminder(const TemplateSet& templates, bool with_target) {
  return fill_placeholders(templates.reminder, {{"answer_format", answer_format_template(with_target)}});
}

}  // namespace resume_judge
