#include "chainedit/chat_oracle.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>

namespace chainedit::oracle {

void OracleConfig::validate() const {
  if (endpoint.empty()) throw Error("oracle: endpoint is required");
  if (max_retries < 0) throw Error("oracle: max_retries must be >= 0");
  if (temperature < 0) throw Error("oracle: temperature must be >= 0");
  if (max_requests_per_second < 0) throw Error("oracle: request rate cap must be >= 0");
}

OracleConfig load_oracle_config(const std::filesystem::path& path) {
  OracleConfig cfg;
  try {
    auto j = nlohmann::json::parse(read_file(path));
    cfg.endpoint = j.value("endpoint", cfg.endpoint);
    cfg.model = j.value("model", cfg.model);
    cfg.temperature = j.value("temperature", cfg.temperature);
    cfg.max_retries = j.value("max_retries", cfg.max_retries);
    cfg.timeout = std::chrono::milliseconds(j.value("timeout_ms", static_cast<long>(cfg.timeout.count())));
    cfg.max_requests_per_second = j.value("max_requests_per_second", cfg.max_requests_per_second);
    cfg.token = j.value("token", cfg.token);
    if (j.contains("refusal_phrases")) cfg.refusal_phrases = j["refusal_phrases"].get<std::vector<std::string>>();
    if (j.contains("record_fixture")) cfg.record_fixture = j["record_fixture"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error("oracle config " + path.string() + ": " + e.what());
  }
  return cfg;
}

std::string request_body(const OracleConfig& cfg, const std::vector<ChatMessage>& messages) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  nlohmann::json body = {{"model", cfg.model}, {"messages", msgs}, {"temperature", cfg.temperature}};
  return body.dump();
}

std::string request_hash(const std::string& body) {
  // Hash the canonical (key-sorted, compact) form so formatting differences
  // between client and server do not matter.
  return sha256_hex(nlohmann::json::parse(body).dump());
}

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error("oracle: endpoint '" + url + "' is not an http(s) URL");
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/v1/chat/completions"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

ChatOracle::ChatOracle(OracleConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.token.empty()) {
    if (const char* env = std::getenv("CHAINEDIT_ORACLE_TOKEN")) cfg_.token = env;
  }
  cfg_.validate();
  std::tie(scheme_host_port_, path_) = split_url(cfg_.endpoint);
}

void ChatOracle::throttle() {
  if (cfg_.max_requests_per_second <= 0) return;
  const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(1.0 / cfg_.max_requests_per_second));
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(rate_mutex_);
    auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_slot_);
    next_slot_ = slot + interval;
  }
  std::this_thread::sleep_until(slot);
}

std::string ChatOracle::complete(const std::vector<ChatMessage>& messages) {
  const auto body = request_body(cfg_, messages);
  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(cfg_.backoff * (1 << std::min(attempt - 1, 6)));
    throttle();

    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout).count(),
                                  static_cast<long>((cfg_.timeout.count() % 1000) * 1000));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout).count(),
                            static_cast<long>((cfg_.timeout.count() % 1000) * 1000));
    httplib::Headers headers;
    if (!cfg_.token.empty()) headers.emplace("Authorization", "Bearer " + cfg_.token);

    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      last_error = "connection failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw TransportError("oracle endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    std::string content;
    try {
      auto j = nlohmann::json::parse(res->body);
      content = j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("malformed chat-completion response: ") + e.what());
    }
    if (cfg_.record_fixture) {
      std::lock_guard lock(record_mutex_);
      std::ofstream out(*cfg_.record_fixture, std::ios::app);
      out << nlohmann::json{{"request_hash", request_hash(body)}, {"response_text", content}}.dump() << '\n';
    }
    return content;
  }
  throw TransportError("oracle request failed after " + std::to_string(cfg_.max_retries + 1) +
                       " attempts: " + last_error);
}

OracleAnswer ChatOracle::answer_query(const KnowledgeQuery& query, const RelationMeta& meta) {
  return interpret_response(complete(answer_messages(meta.query_prompt(query.subject))), cfg_.refusal_phrases);
}

OracleAnswer ChatOracle::answer_inverse_query(const std::string&, const std::string& object_entity,
                                              const RelationMeta& meta) {
  return interpret_response(complete(answer_messages(meta.inverse_prompt(object_entity))), cfg_.refusal_phrases);
}

Judgment ChatOracle::judge_rule(const std::string& nl_rule) { return parse_judgment(complete(judge_messages(nl_rule))); }

std::map<std::string, std::string> load_fixture(const std::filesystem::path& path) {
  std::map<std::string, std::string> responses;
  std::size_t line_no = 0;
  for (const auto& line : text::split(read_file(path), '\n')) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      responses[j.at("request_hash").get<std::string>()] = j.at("response_text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("fixture line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return responses;
}

ReplayServer::ReplayServer(std::map<std::string, std::string> responses)
    : responses_(std::move(responses)), server_(std::make_unique<httplib::Server>()) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    std::string hash;
    try {
      hash = request_hash(req.body);
    } catch (const nlohmann::json::exception&) {
      res.status = 400;
      res.set_content(R"({"error":"malformed request"})", "application/json");
      return;
    }
    std::lock_guard lock(mutex_);
    auto it = responses_.find(hash);
    if (it == responses_.end()) {
      res.status = 404;
      res.set_content(nlohmann::json{{"error", "no recorded response"}, {"request_hash", hash}}.dump(),
                      "application/json");
      return;
    }
    ++hits_;
    nlohmann::json reply = {
        {"choices", nlohmann::json::array({{{"index", 0},
                                            {"message", {{"role", "assistant"}, {"content", it->second}}},
                                            {"finish_reason", "stop"}}})}};
    res.set_content(reply.dump(), "application/json");
  };
  server_->Post("/v1/chat/completions", handler);
  server_->Post("/chat/completions", handler);
}

ReplayServer::~ReplayServer() { stop(); }

void ReplayServer::start() {
  port_ = server_->bind_to_any_port("127.0.0.1");
  if (port_ <= 0) throw Error("replay server: cannot bind");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void ReplayServer::stop() {
  if (thread_.joinable()) {
    server_->stop();
    thread_.join();
  }
}

std::string ReplayServer::endpoint() const {
  return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
}

std::size_t ReplayServer::hits() const {
  std::lock_guard lock(mutex_);
  return hits_;
}

std::unique_ptr<Oracle> make_oracle(const std::string& uri, const OracleOptions& options) {
  if (uri.starts_with("mock:")) {
    auto store = kg::ingest(std::filesystem::path(uri.substr(5)), options.labels);
    std::map<std::string, std::string> judge;
    if (options.judge_table) judge = load_judge_table(*options.judge_table);
    return std::make_unique<MockOracle>(std::move(store), std::move(judge));
  }
  if (uri.starts_with("http://") || uri.starts_with("https://")) {
    OracleConfig cfg = options.config ? load_oracle_config(*options.config) : OracleConfig{};
    cfg.endpoint = uri;
    return std::make_unique<ChatOracle>(std::move(cfg));
  }
  throw Error("unknown oracle URI '" + uri + "' (expected mock:<path>, http:// or https://)");
}

}  // namespace chainedit::oracle
