#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "resume_judge/types.hpp"

namespace resume_judge {

struct QAItem {
  std::string question;
  std::string answer;
  std::size_t char_count = 0;  // Unicode scalar values in `answer`

  friend bool operator==(const QAItem&, const QAItem&) = default;
};

struct ResumeRecord {
  ResumeId id;
  std::string applied_position;
  std::vector<QAItem> items;

  friend bool operator==(const ResumeRecord&, const ResumeRecord&) = default;
};

struct CorpusStats {
  std::size_t total_ingested = 0;
  std::size_t retained = 0;
  std::size_t dropped_records = 0;
  std::size_t dropped_items = 0;
};

struct LineError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct IngestReport {
  CorpusStats stats;
  std::vector<LineError> errors;
};

struct IngestOptions {
  std::size_t min_item_chars = 100;
  std::string salt = "resume-judge";
};

struct IngestResult {
  std::vector<ResumeRecord> records;
  IngestReport report;
  /// original name -> anonymized id, for the operator-only sidecar file.
  std::map<std::string, ResumeId> id_map;
};

/// Number of Unicode scalar values in UTF-8 text. Throws ValidationError on
/// malformed UTF-8.
std::size_t utf8_length(std::string_view text);

/// Salted one-way identifier. Ids already in anonymized form are recognised by
/// `is_anonymized_id` and passed through unchanged by `ingest`.
ResumeId anonymize_id(std::string_view original_name, std::string_view salt);
bool is_anonymized_id(std::string_view id);

/// Reads a line-delimited record file, keeps applied_position and content,
/// drops items with char_count <= min_item_chars and records left empty.
/// Malformed lines are reported and skipped. Throws IoError if unreadable.
IngestResult ingest(const std::filesystem::path& source, const IngestOptions& options = {});

/// Same as `ingest` over already-loaded lines; `source_name` seeds ids for
/// records that carry none.
IngestResult ingest_lines(const std::vector<std::string>& lines, std::string_view source_name,
                          const IngestOptions& options = {});

nlohmann::json to_json(const ResumeRecord& record);
ResumeRecord record_from_json(const nlohmann::json& j);

/// Canonical corpus file: one compact JSON object per line.
void write_corpus(const std::filesystem::path& path, const std::vector<ResumeRecord>& records);
std::vector<ResumeRecord> read_corpus(const std::filesystem::path& path);

void write_ingest_report(const std::filesystem::path& path, const IngestReport& report);

/// Writes the original-name mapping with owner-only permissions.
void write_id_map(const std::filesystem::path& path, const std::map<std::string, ResumeId>& id_map);

/// Digest over the canonical serialization of every record, in order.
std::string corpus_digest(const std::vector<ResumeRecord>& records);

const ResumeRecord& find_record(const std::vector<ResumeRecord>& records, const ResumeId& id);

}  // namespace resume_judge
