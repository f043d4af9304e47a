#include "resume_judge/judge.hpp"

#include <chrono>
#include <thread>

#include <spdlog/spdlog.h>

#include "resume_judge/digest.hpp"
#include "resume_judge/embedding.hpp"
#include "resume_judge/http.hpp"

namespace resume_judge {

using nlohmann::json;

std::string_view to_string(BackendKind k) { return k == BackendKind::Http ? "http" : "mock"; }
std::string_view to_string(BatchMode m) { return m == BatchMode::Concurrent ? "concurrent" : "packed"; }

BackendKind backend_kind_from_string(std::string_view s) {
  if (s == "http") return BackendKind::Http;
  if (s == "mock") return BackendKind::Mock;
  throw ValidationError("unknown backend: " + std::string(s));
}

BatchMode batch_mode_from_string(std::string_view s) {
  if (s == "concurrent") return BatchMode::Concurrent;
  if (s == "packed") return BatchMode::Packed;
  throw ValidationError("unknown batch mode: " + std::string(s));
}

void JudgeConfig::validate() const {
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (max_retries < 0) throw ValidationError("max_retries must be >= 0");
  if (temperature < 0.0) throw ValidationError("temperature must be >= 0");
  if (timeout_s <= 0.0) throw ValidationError("timeout_s must be > 0");
}

json to_json(const JudgeConfig& c) {
  return {{"name", c.name},
          {"endpoint_url", c.endpoint_url},
          {"model_id", c.model_id},
          {"temperature", c.temperature},
          {"batch_size", c.batch_size},
          {"max_retries", c.max_retries},
          {"timeout_s", c.timeout_s},
          {"backend", to_string(c.backend)},
          {"batch_mode", to_string(c.batch_mode)},
          {"mock_seed", c.mock_seed},
          {"api_key_env", c.api_key_env}};
}

JudgeConfig judge_config_from_json(const json& j) {
  JudgeConfig c;
  c.name = j.value("name", c.name);
  c.endpoint_url = j.value("endpoint_url", c.endpoint_url);
  c.model_id = j.value("model_id", c.model_id);
  c.temperature = j.value("temperature", c.temperature);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.timeout_s = j.value("timeout_s", c.timeout_s);
  c.backend = backend_kind_from_string(j.value("backend", std::string(to_string(c.backend))));
  c.batch_mode = batch_mode_from_string(j.value("batch_mode", std::string(to_string(c.batch_mode))));
  c.mock_seed = j.value("mock_seed", c.mock_seed);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.validate();
  return c;
}

json to_json(const JudgeVerdict& v) {
  json j = {{"id", v.resume_id},
            {"overall", to_string(v.overall)},
            {"latency_s", v.latency_s},
            {"attempts", v.attempts}};
  if (v.scores) {
    j["content"] = v.scores->content;
    j["structure"] = v.scores->structure;
    j["language"] = v.scores->language;
  }
  if (v.rationale) j["rationale"] = *v.rationale;
  return j;
}

JudgeVerdict verdict_from_json(const json& j) {
  JudgeVerdict v;
  v.resume_id = j.at("id").get<std::string>();
  v.overall = label_from_string(j.at("overall").get<std::string>());
  v.latency_s = j.at("latency_s").get<double>();
  v.attempts = j.at("attempts").get<int>();
  if (j.contains("content")) {
    v.scores = DimScores{j.at("content").get<int>(), j.at("structure").get<int>(), j.at("language").get<int>()};
  }
  if (j.contains("rationale")) v.rationale = j["rationale"].get<std::string>();
  return v;
}

// ---------------------------------------------------------------------------

HttpChatBackend::HttpChatBackend(std::string endpoint_url, std::string api_key, double timeout_s)
    : endpoint_url_(std::move(endpoint_url)), api_key_(std::move(api_key)), timeout_s_(timeout_s) {}

ChatReply HttpChatBackend::complete(const ChatRequest& request) {
  count_call();
  json messages = json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  const json body = {{"model", request.model}, {"messages", messages}, {"temperature", request.temperature}};
  const auto res = http::post_json(http::parse_endpoint(endpoint_url_), "/chat/completions", body, api_key_, timeout_s_);
  if (res.status != 200) {
    throw EndpointError("chat endpoint returned HTTP " + std::to_string(res.status));
  }
  try {
    const auto j = json::parse(res.body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    return {content.is_null() ? std::string() : content.get<std::string>(), std::nullopt};
  } catch (const json::exception& e) {
    throw EndpointError(std::string("malformed chat response: ") + e.what());
  }
}

MockVerdict mock_judge(const ResumeRecord& record, std::uint64_t seed) {
  const auto d = hmac_sha256("mock-judge/" + std::to_string(seed), serialize_for_embedding(record));
  MockVerdict v;
  v.scores = {d[0] % 11, d[1] % 11, d[2] % 11};
  v.overall = v.scores.sum() >= kMockHighThreshold ? Label::High : Label::Low;
  v.latency_s = 0.5 + static_cast<double>((d[3] << 8) | d[4]) / 65535.0;
  return v;
}

ChatReply MockChatBackend::complete(const ChatRequest& request) {
  count_call();
  ChatReply reply;
  double latency = 0.0;
  const bool packed = request.targets.size() > 1;
  for (std::size_t i = 0; i < request.targets.size(); ++i) {
    const auto m = mock_judge(*request.targets[i], seed_);
    VerdictFields f{m.overall, m.scores, std::string("mock verdict")};
    if (i > 0) reply.text += "\n";
    reply.text += render_verdict_block(f, packed ? std::optional<int>(static_cast<int>(i + 1)) : std::nullopt);
    latency += m.latency_s;
  }
  reply.simulated_latency_s = latency;
  return reply;
}

std::unique_ptr<ChatBackend> make_chat_backend(const JudgeConfig& cfg) {
  if (cfg.backend == BackendKind::Mock) {
    return std::make_unique<MockChatBackend>(cfg.mock_seed);
  }
  return std::make_unique<HttpChatBackend>(cfg.endpoint_url, http::env_or_empty(cfg.api_key_env), cfg.timeout_s);
}

// ---------------------------------------------------------------------------

AuditLog::AuditLog(const std::filesystem::path& path) : out_(path, std::ios::app) {
  if (!out_) {
    throw IoError("cannot open audit log " + path.string());
  }
}

void AuditLog::append(const json& record) {
  std::lock_guard lock(mu_);
  ++count_;
  if (out_.is_open()) {
    out_ << record.dump() << '\n';
    out_.flush();
  }
}

std::size_t AuditLog::size() const {
  std::lock_guard lock(mu_);
  return count_;
}

namespace {

using Clock = std::chrono::steady_clock;

struct Exchange {
  ChatReply reply;
  double latency_s = 0.0;
};

/// One request with transport retries (exponential backoff).
Exchange exchange(const JudgeConfig& cfg, const JudgeContext& ctx, const ChatRequest& request) {
  for (int failure = 0;; ++failure) {
    const auto start = Clock::now();
    try {
      auto reply = ctx.backend.complete(request);
      const double wall = std::chrono::duration<double>(Clock::now() - start).count();
      const double latency = reply.simulated_latency_s.value_or(wall);
      return {std::move(reply), latency};
    } catch (const EndpointError& e) {
      if (failure >= cfg.max_retries) throw;
      spdlog::warn("{}: request failed ({}), retrying", cfg.name, e.what());
      std::this_thread::sleep_for(std::chrono::duration<double>(std::min(0.2 * (1 << failure), 2.0)));
    }
  }
}

void audit(const JudgeContext& ctx, const JudgeConfig& cfg, const std::vector<const ResumeRecord*>& targets,
           int attempt, const std::string& prompt_digest, const Exchange& ex, const std::string& parse_error) {
  if (!ctx.audit) return;
  json ids = json::array();
  for (const auto* r : targets) ids.push_back(r->id);
  json rec = {{"judge", cfg.name},           {"model", cfg.model_id},  {"resume_ids", ids},
              {"attempt", attempt},          {"prompt_digest", prompt_digest},
              {"raw_response", ex.reply.text}, {"latency_s", ex.latency_s}};
  if (!parse_error.empty()) rec["parse_error"] = parse_error;
  ctx.audit->append(rec);
}

JudgeVerdict judge_one(const ResumeRecord& record, const std::vector<FewShotExample>& examples,
                       AttributeType attribute_type, const JudgeConfig& cfg, const JudgeContext& ctx) {
  const auto bundle = build_prompt(ctx.templates, examples, attribute_type, {record});
  const auto digest = sha256_hex(bundle.rendered);
  const auto reminder = format_reminder(ctx.templates, false);

  ChatRequest request{cfg.model_id, cfg.temperature, {{"user", bundle.rendered}}, {&record}};
  JudgeVerdict v;
  v.resume_id = record.id;
  for (int attempt = 1; attempt <= cfg.max_retries + 1; ++attempt) {
    if (attempt == 2) request.messages.push_back({"user", reminder});
    const auto ex = exchange(cfg, ctx, request);
    v.latency_s += ex.latency_s;
    v.attempts = attempt;
    try {
      const auto f = parse_verdict(ex.reply.text, ctx.templates.strings.vocabulary);
      audit(ctx, cfg, request.targets, attempt, digest, ex, "");
      v.overall = f.overall;
      v.scores = f.scores;
      v.rationale = f.rationale;
      return v;
    } catch (const ParseError& e) {
      audit(ctx, cfg, request.targets, attempt, digest, ex, e.what());
    }
  }
  spdlog::warn("{}: no parsable answer for {} after {} attempts", cfg.name, record.id, v.attempts);
  return v;
}

std::vector<JudgeVerdict> judge_packed(const std::vector<ResumeRecord>& records,
                                       const std::vector<FewShotExample>& examples, AttributeType attribute_type,
                                       const JudgeConfig& cfg, const JudgeContext& ctx) {
  std::vector<JudgeVerdict> out;
  const auto chunk = static_cast<std::size_t>(cfg.batch_size);
  for (std::size_t begin = 0; begin < records.size(); begin += chunk) {
    const std::vector<ResumeRecord> targets(records.begin() + static_cast<std::ptrdiff_t>(begin),
                                            records.begin() + static_cast<std::ptrdiff_t>(std::min(records.size(), begin + chunk)));
    const auto bundle = build_prompt(ctx.templates, examples, attribute_type, targets);
    const auto digest = sha256_hex(bundle.rendered);
    ChatRequest request{cfg.model_id, cfg.temperature, {{"user", bundle.rendered}}, {}};
    for (const auto& r : targets) request.targets.push_back(&r);

    std::vector<JudgeVerdict> verdicts(targets.size());
    std::vector<bool> done(targets.size(), false);
    double total_latency = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) verdicts[i].resume_id = targets[i].id;

    for (int attempt = 1; attempt <= cfg.max_retries + 1; ++attempt) {
      if (attempt == 2) request.messages.push_back({"user", format_reminder(ctx.templates, targets.size() > 1)});
      const auto ex = exchange(cfg, ctx, request);
      total_latency += ex.latency_s;
      std::vector<std::variant<VerdictFields, ParseError>> parsed;
      if (targets.size() == 1) {
        try {
          parsed.emplace_back(parse_verdict(ex.reply.text, ctx.templates.strings.vocabulary));
        } catch (const ParseError& e) {
          parsed.emplace_back(e);
        }
      } else {
        parsed = parse_packed_verdicts(ex.reply.text, targets.size(), ctx.templates.strings.vocabulary);
      }
      std::string errors;
      for (std::size_t i = 0; i < targets.size(); ++i) {
        if (done[i]) continue;
        verdicts[i].attempts = attempt;
        if (const auto* f = std::get_if<VerdictFields>(&parsed[i])) {
          verdicts[i].overall = f->overall;
          verdicts[i].scores = f->scores;
          verdicts[i].rationale = f->rationale;
          done[i] = true;
        } else {
          errors += std::get<ParseError>(parsed[i]).what();
          errors += "; ";
        }
      }
      audit(ctx, cfg, request.targets, attempt, digest, ex, errors);
      if (std::all_of(done.begin(), done.end(), [](bool d) { return d; })) break;
    }
    for (auto& v : verdicts) {
      v.latency_s = total_latency / static_cast<double>(targets.size());
      out.push_back(std::move(v));
    }
  }
  return out;
}

}  // namespace

std::vector<JudgeVerdict> judge_resumes(const std::vector<ResumeRecord>& records,
                                        const std::vector<FewShotExample>& examples, AttributeType attribute_type,
                                        const JudgeConfig& cfg, const JudgeContext& ctx) {
  cfg.validate();
  if (records.empty()) {
    throw ValidationError("judge_resumes: no records");
  }
  if (cfg.batch_mode == BatchMode::Packed) {
    return judge_packed(records, examples, attribute_type, cfg, ctx);
  }

  std::vector<std::optional<JudgeVerdict>> slots(records.size());
  const auto wave = static_cast<std::size_t>(cfg.batch_size);
  for (std::size_t begin = 0; begin < records.size(); begin += wave) {
    const auto end = std::min(records.size(), begin + wave);
    std::mutex err_mu;
    std::string failure;
    {
      std::vector<std::jthread> pool;
      for (std::size_t i = begin; i < end; ++i) {
        pool.emplace_back([&, i] {
          try {
            slots[i] = judge_one(records[i], examples, attribute_type, cfg, ctx);
          } catch (const EndpointError& e) {
            std::lock_guard lock(err_mu);
            if (failure.empty()) failure = e.what();
          }
        });
      }
    }
    if (!failure.empty()) {
      std::vector<JudgeVerdict> partial;
      for (auto& s : slots) {
        if (s) partial.push_back(std::move(*s));
      }
      throw JudgeAbortedError(cfg.name + ": endpoint unreachable: " + failure, std::move(partial));
    }
  }
  std::vector<JudgeVerdict> out;
  out.reserve(records.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

void write_verdicts(const std::filesystem::path& path, const std::vector<JudgeVerdict>& verdicts) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  for (const auto& v : verdicts) out << to_json(v).dump() << '\n';
}

std::vector<JudgeVerdict> read_verdicts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot read " + path.string());
  }
  std::vector<JudgeVerdict> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(verdict_from_json(json::parse(line)));
  }
  return out;
}

}  // namespace resume_judge
