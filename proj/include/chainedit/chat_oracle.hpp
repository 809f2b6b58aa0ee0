#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "chainedit/oracle.hpp"

namespace httplib {
class Server;
}

namespace chainedit::oracle {

struct OracleConfig {
  /// Full chat-completion URL, e.g. http://localhost:8000/v1/chat/completions.
  std::string endpoint;
  std::string model;
  double temperature = 0.0;
  int max_retries = 3;
  std::chrono::milliseconds timeout{30000};
  /// Requests per second across all threads; 0 disables the cap.
  double max_requests_per_second = 0.0;
  /// Bearer token; CHAINEDIT_ORACLE_TOKEN is used when empty.
  std::string token;
  std::vector<std::string> refusal_phrases = default_refusal_phrases();
  /// When set, every exchange is appended here as a replay fixture line.
  std::optional<std::filesystem::path> record_fixture;
  std::chrono::milliseconds backoff{200};

  void validate() const;
};

/// Reads a JSON config file ({endpoint, model, temperature, max_retries,
/// timeout_ms, max_requests_per_second, token, refusal_phrases}); the token
/// falls back to the environment.
OracleConfig load_oracle_config(const std::filesystem::path& path);

/// Canonical request body and its fixture hash.
std::string request_body(const OracleConfig& cfg, const std::vector<ChatMessage>& messages);
std::string request_hash(const std::string& body);

/// Client for the chat-completion wire protocol: POST {model, messages,
/// temperature}, read choices[0].message.content.
class ChatOracle : public Oracle {
 public:
  explicit ChatOracle(OracleConfig cfg);

  OracleAnswer answer_query(const KnowledgeQuery& query, const RelationMeta& meta) override;
  OracleAnswer answer_inverse_query(const std::string& relation, const std::string& object_entity,
                                    const RelationMeta& meta) override;
  Judgment judge_rule(const std::string& nl_rule) override;

  /// Raw completion text for a message list. Retries connection failures,
  /// 429 and 5xx with exponential backoff; throws TransportError after
  /// max_retries or on any other non-200 status.
  std::string complete(const std::vector<ChatMessage>& messages);

 private:
  void throttle();

  OracleConfig cfg_;
  std::string scheme_host_port_;
  std::string path_;
  std::mutex rate_mutex_;
  std::chrono::steady_clock::time_point next_slot_{};
  std::mutex record_mutex_;
};

/// Fixture lines {request_hash, response_text}.
std::map<std::string, std::string> load_fixture(const std::filesystem::path& path);

/// Local chat-completion endpoint answering from recorded fixtures; unknown
/// requests get HTTP 404.
class ReplayServer {
 public:
  explicit ReplayServer(std::map<std::string, std::string> responses);
  ~ReplayServer();
  ReplayServer(const ReplayServer&) = delete;
  ReplayServer& operator=(const ReplayServer&) = delete;

  /// Binds to 127.0.0.1 on an ephemeral port and serves in the background.
  void start();
  void stop();
  int port() const { return port_; }
  std::string endpoint() const;
  std::size_t hits() const;

 private:
  std::map<std::string, std::string> responses_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  mutable std::mutex mutex_;
  std::size_t hits_ = 0;
};

struct OracleOptions {
  std::optional<std::filesystem::path> labels;       // mock: label file for the store
  std::optional<std::filesystem::path> judge_table;  // mock: rule text -> raw response
  std::optional<std::filesystem::path> config;       // live: JSON config file
};

/// `mock:<triples.tsv>` builds a MockOracle; `http://` / `https://` a
/// ChatOracle with the URI as endpoint (overriding the config file).
std::unique_ptr<Oracle> make_oracle(const std::string& uri, const OracleOptions& options = {});

}  // namespace chainedit::oracle
