#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "resume_judge/answer_format.hpp"
#include "resume_judge/corpus.hpp"
#include "resume_judge/error.hpp"
#include "resume_judge/prompting.hpp"
#include "resume_judge/sampling.hpp"

namespace resume_judge {

enum class BackendKind { Http, Mock };
/// Concurrent: one resume per request, `batch_size` requests in flight.
/// Packed: `batch_size` resumes in one prompt.
enum class BatchMode { Concurrent, Packed };

std::string_view to_string(BackendKind k);
std::string_view to_string(BatchMode m);
BackendKind backend_kind_from_string(std::string_view s);
BatchMode batch_mode_from_string(std::string_view s);

struct JudgeConfig {
  std::string name = "judge";
  std::string endpoint_url = "http://localhost:8000/v1";
  std::string model_id = "Qwen/Qwen3-8B";
  double temperature = 0.6;
  int batch_size = 5;
  int max_retries = 3;
  double timeout_s = 120.0;
  BackendKind backend = BackendKind::Mock;
  BatchMode batch_mode = BatchMode::Concurrent;
  std::uint64_t mock_seed = 0;
  std::string api_key_env;  // name of the env var holding the API key

  void validate() const;
};

nlohmann::json to_json(const JudgeConfig& cfg);
/// Missing keys keep their defaults.
JudgeConfig judge_config_from_json(const nlohmann::json& j);

struct JudgeVerdict {
  ResumeId resume_id;
  Label overall = Label::Unparsed;
  std::optional<DimScores> scores;  // present iff overall != Unparsed
  std::optional<std::string> rationale;
  double latency_s = 0.0;
  int attempts = 1;

  friend bool operator==(const JudgeVerdict&, const JudgeVerdict&) = default;
};

nlohmann::json to_json(const JudgeVerdict& v);
JudgeVerdict verdict_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::string model;
  double temperature = 0.0;
  std::vector<ChatMessage> messages;
  /// The resumes the prompt asks about, for backends that judge offline.
  std::vector<const ResumeRecord*> targets;
};

struct ChatReply {
  std::string text;
  /// Set by simulated backends; otherwise latency is wall-clock time.
  std::optional<double> simulated_latency_s;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  /// Throws EndpointError on transport failure.
  virtual ChatReply complete(const ChatRequest& request) = 0;
  std::uint64_t calls() const { return calls_.load(); }

 protected:
  void count_call() { ++calls_; }

 private:
  std::atomic<std::uint64_t> calls_{0};
};

/// OpenAI-compatible `/chat/completions` client.
class HttpChatBackend final : public ChatBackend {
 public:
  HttpChatBackend(std::string endpoint_url, std::string api_key, double timeout_s);
  ChatReply complete(const ChatRequest& request) override;

 private:
  std::string endpoint_url_;
  std::string api_key_;
  double timeout_s_;
};

struct MockVerdict {
  DimScores scores;
  Label overall = Label::Low;
  double latency_s = 0.0;
};

inline constexpr int kMockHighThreshold = 15;

/// Deterministic verdict from a keyed digest of the record text: each score
/// is digest-derived in [0, 10], overall is High iff the sum >= 15.
MockVerdict mock_judge(const ResumeRecord& record, std::uint64_t seed);

/// Answers every target with `mock_judge`, rendered in the answer grammar.
class MockChatBackend final : public ChatBackend {
 public:
  explicit MockChatBackend(std::uint64_t seed) : seed_(seed) {}
  ChatReply complete(const ChatRequest& request) override;

 private:
  std::uint64_t seed_;
};

/// Builds the backend a config asks for; the API key comes from the
/// configured env var.
std::unique_ptr<ChatBackend> make_chat_backend(const JudgeConfig& cfg);

// ---------------------------------------------------------------------------

/// Append-only JSONL record of every request: prompt digest, raw response,
/// latency, attempt. Safe to share across threads.
class AuditLog {
 public:
  AuditLog() = default;  // discards records
  explicit AuditLog(const std::filesystem::path& path);

  void append(const nlohmann::json& record);
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::ofstream out_;
  std::size_t count_ = 0;
};

/// Thrown when the endpoint stays unreachable; carries verdicts completed
/// before the failure.
class JudgeAbortedError : public EndpointError {
 public:
  JudgeAbortedError(const std::string& message, std::vector<JudgeVerdict> partial)
      : EndpointError(message), partial_(std::move(partial)) {}
  const std::vector<JudgeVerdict>& partial() const noexcept { return partial_; }

 private:
  std::vector<JudgeVerdict> partial_;
};

struct JudgeContext {
  const TemplateSet& templates;
  ChatBackend& backend;
  AuditLog* audit = nullptr;
};

/// One verdict per record, in input order. Malformed answers are retried
/// with a format reminder up to `max_retries` times, then marked Unparsed.
std::vector<JudgeVerdict> judge_resumes(const std::vector<ResumeRecord>& records,
                                        const std::vector<FewShotExample>& examples, AttributeType attribute_type,
                                        const JudgeConfig& cfg, const JudgeContext& ctx);

void write_verdicts(const std::filesystem::path& path, const std::vector<JudgeVerdict>& verdicts);
std::vector<JudgeVerdict> read_verdicts(const std::filesystem::path& path);

}  // namespace resume_judge
