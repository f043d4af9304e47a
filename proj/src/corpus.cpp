#include "resume_judge/corpus.hpp"

#include <cctype>
#include <algorithm>
#include <fstream>
#include <set>

#include "resume_judge/digest.hpp"
#include "resume_judge/error.hpp"

namespace resume_judge {

using nlohmann::json;

namespace {

constexpr std::string_view kIdPrefix = "rs-";
constexpr std::size_t kIdHexChars = 20;

std::string required_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw ValidationError(std::string("missing field '") + key + "'");
  }
  if (!it->is_string()) {
    throw ValidationError(std::string("field '") + key + "' is not a string");
  }
  return it->get<std::string>();
}

}  // namespace

std::size_t utf8_length(std::string_view text) {
  std::size_t count = 0;
  std::size_t i = 0;
  const auto n = text.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t len;
    if (c < 0x80) {
      len = 1;
    } else if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
      len = 2;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
    } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
      len = 4;
    } else {
      throw ValidationError("invalid UTF-8 lead byte at offset " + std::to_string(i));
    }
    if (i + len > n) {
      throw ValidationError("truncated UTF-8 sequence at offset " + std::to_string(i));
    }
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) {
        throw ValidationError("invalid UTF-8 continuation at offset " + std::to_string(i + k));
      }
    }
    i += len;
    ++count;
  }
  return count;
}

ResumeId anonymize_id(std::string_view original_name, std::string_view salt) {
  if (original_name.empty()) {
    throw ValidationError("anonymize_id: original name is empty");
  }
  const auto hex = to_hex(hmac_sha256(salt, original_name));
  return std::string(kIdPrefix) + hex.substr(0, kIdHexChars);
}

bool is_anonymized_id(std::string_view id) {
  if (id.size() != kIdPrefix.size() + kIdHexChars || id.substr(0, kIdPrefix.size()) != kIdPrefix) {
    return false;
  }
  return std::all_of(id.begin() + kIdPrefix.size(), id.end(),
                     [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
}

IngestResult ingest_lines(const std::vector<std::string>& lines, std::string_view source_name,
                          const IngestOptions& options) {
  IngestResult result;
  auto& stats = result.report.stats;
  std::set<ResumeId> seen;

  for (std::size_t lineno = 1; lineno <= lines.size(); ++lineno) {
    const auto& line = lines[lineno - 1];
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    ++stats.total_ingested;
    try {
      const auto j = json::parse(line);
      if (!j.is_object()) {
        throw ValidationError("record is not an object");
      }
      ResumeRecord record;
      record.applied_position = required_string(j, "applied_position");

      auto content = j.find("content");
      if (content == j.end()) {
        throw ValidationError("missing field 'content'");
      }
      if (!content->is_array()) {
        throw ValidationError("field 'content' is not a list");
      }

      std::string original;
      if (auto id = j.find("id"); id != j.end() && id->is_string() && !id->get<std::string>().empty()) {
        original = id->get<std::string>();
      } else {
        original = std::string(source_name) + "#" + std::to_string(lineno);
      }
      record.id = is_anonymized_id(original) ? original : anonymize_id(original, options.salt);
      if (!seen.insert(record.id).second) {
        throw ValidationError("duplicate record id");
      }

      std::size_t dropped_here = 0;
      for (const auto& item : *content) {
        if (!item.is_object()) {
          throw ValidationError("content item is not an object");
        }
        QAItem qa;
        qa.question = required_string(item, "question");
        qa.answer = required_string(item, "answer");
        qa.char_count = utf8_length(qa.answer);
        utf8_length(qa.question);
        if (qa.char_count > options.min_item_chars) {
          record.items.push_back(std::move(qa));
        } else {
          ++dropped_here;
        }
      }
      utf8_length(record.applied_position);

      stats.dropped_items += dropped_here;
      if (record.items.empty()) {
        ++stats.dropped_records;
        continue;
      }
      if (original != record.id) {
        result.id_map.emplace(original, record.id);
      }
      result.records.push_back(std::move(record));
      ++stats.retained;
    } catch (const std::exception& e) {
      ++stats.dropped_records;
      result.report.errors.push_back({lineno, e.what()});
    }
  }
  return result;
}

IngestResult ingest(const std::filesystem::path& source, const IngestOptions& options) {
  std::ifstream in(source);
  if (!in) {
    throw IoError("cannot read corpus source " + source.string());
  }
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  if (in.bad()) {
    throw IoError("error while reading " + source.string());
  }
  return ingest_lines(lines, source.filename().string(), options);
}

json to_json(const ResumeRecord& record) {
  json items = json::array();
  for (const auto& qa : record.items) {
    items.push_back({{"question", qa.question}, {"answer", qa.answer}, {"char_count", qa.char_count}});
  }
  return {{"id", record.id}, {"applied_position", record.applied_position}, {"content", items}};
}

ResumeRecord record_from_json(const json& j) {
  ResumeRecord r;
  r.id = j.at("id").get<std::string>();
  r.applied_position = j.at("applied_position").get<std::string>();
  for (const auto& item : j.at("content")) {
    QAItem qa;
    qa.question = item.at("question").get<std::string>();
    qa.answer = item.at("answer").get<std::string>();
    qa.char_count = utf8_length(qa.answer);
    r.items.push_back(std::move(qa));
  }
  return r;
}

void write_corpus(const std::filesystem::path& path, const std::vector<ResumeRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  for (const auto& r : records) {
    out << to_json(r).dump() << '\n';
  }
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

std::vector<ResumeRecord> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot read corpus " + path.string());
  }
  std::vector<ResumeRecord> out;
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_ingest_report(const std::filesystem::path& path, const IngestReport& report) {
  json errors = json::array();
  for (const auto& e : report.errors) {
    errors.push_back({{"line", e.line}, {"message", e.message}});
  }
  const json j = {{"total_ingested", report.stats.total_ingested},
                  {"retained", report.stats.retained},
                  {"dropped_records", report.stats.dropped_records},
                  {"dropped_items", report.stats.dropped_items},
                  {"errors", errors}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out << j.dump(2) << '\n';
}

void write_id_map(const std::filesystem::path& path, const std::map<std::string, ResumeId>& id_map) {
  {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
      throw IoError("cannot write " + path.string());
    }
  }
  namespace fs = std::filesystem;
  fs::permissions(path, fs::perms::owner_read | fs::perms::owner_write, fs::perm_options::replace);
  std::ofstream out(path, std::ios::trunc);
  for (const auto& [original, id] : id_map) {
    out << id << '\t' << original << '\n';
  }
}

std::string corpus_digest(const std::vector<ResumeRecord>& records) {
  std::string buf;
  for (const auto& r : records) {
    buf += to_json(r).dump();
    buf += '\n';
  }
  return sha256_hex(buf);
}

const ResumeRecord& find_record(const std::vector<ResumeRecord>& records, const ResumeId& id) {
  auto it = std::find_if(records.begin(), records.end(), [&](const auto& r) { return r.id == id; });
  if (it == records.end()) {
    throw LookupError("unknown resume id " + id);
  }
  return *it;
}

}  // namespace resume_judge
