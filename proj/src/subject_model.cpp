#include "chainedit/subject_model.hpp"

#include <httplib.h>

#include <algorithm>
#include <random>

namespace chainedit::eval {

namespace {

constexpr std::string_view kSlot = "\x01";
constexpr std::string_view kContextMarker = "complete the following sentence:";

/// Splits a rendering of `kSlot` into lowercased text before and after it.
std::pair<std::string, std::string> around_slot(const std::string& rendered) {
  auto at = rendered.find(kSlot);
  return {text::to_lower(rendered.substr(0, at)), text::to_lower(rendered.substr(at + kSlot.size()))};
}

std::string_view strip_prompt(std::string_view prompt) {
  prompt = text::trim(prompt);
  auto lowered = text::to_lower(prompt);
  if (auto at = lowered.rfind(kContextMarker); at != std::string::npos) {
    prompt = text::trim(prompt.substr(at + kContextMarker.size()));
  }
  while (!prompt.empty() && (prompt.back() == '.' || prompt.back() == '?' || prompt.back() == ':')) {
    prompt.remove_suffix(1);
  }
  return text::trim(prompt);
}

}  // namespace

SymbolicSubject::SymbolicSubject(std::shared_ptr<const kg::TripleStore> base, MetaRegistry meta,
                                 std::map<std::string, std::string> aliases)
    : base_(std::move(base)), meta_(std::move(meta)), aliases_(std::move(aliases)) {
  if (!base_) throw Error("symbolic subject needs a base store");
  std::set<std::string> relations;
  for (const auto& [id, m] : meta_.entries()) relations.insert(id);
  if (meta_.nominal_fallback()) {
    for (const auto& r : base_->relations()) relations.insert(r);
  }
  const std::string slot(kSlot);
  for (const auto& r : relations) {
    auto m = meta_.at(r);
    auto add = [&](std::vector<Pattern>& into, const std::string& rendered, bool inverse) {
      auto [prefix, suffix] = around_slot(rendered);
      into.push_back({r, std::move(prefix), std::move(suffix), inverse});
    };
    add(prompt_patterns_, m.query_prompt(slot), false);
    add(prompt_patterns_, m.inverse_prompt(slot), true);
    add(noun_patterns_, m.noun_phrase(slot), false);
    add(noun_patterns_, m.inverse_noun_phrase(slot), true);
  }
  auto longest_first = [](const Pattern& a, const Pattern& b) {
    auto la = a.prefix.size() + a.suffix.size(), lb = b.prefix.size() + b.suffix.size();
    if (la != lb) return la > lb;
    return std::tie(a.relation, a.inverse) < std::tie(b.relation, b.inverse);
  };
  std::sort(prompt_patterns_.begin(), prompt_patterns_.end(), longest_first);
  std::sort(noun_patterns_.begin(), noun_patterns_.end(), longest_first);
}

void SymbolicSubject::apply_batch(const chain::EditBatch& batch) {
  for (const auto& f : batch.facts()) overlay_[{f.subject, f.relation}] = f.object;
}

void SymbolicSubject::revert() { overlay_.clear(); }

std::string SymbolicSubject::canonical(std::string_view name) const {
  auto trimmed = std::string(text::trim(name));
  if (auto it = aliases_.find(trimmed); it != aliases_.end()) return it->second;
  return trimmed;
}

std::optional<std::string> SymbolicSubject::lookup(const std::string& subject, const std::string& relation) const {
  if (auto it = overlay_.find({subject, relation}); it != overlay_.end()) return it->second;
  std::vector<std::string> objects;
  for (const auto& id : base_->ids_for_label(subject)) {
    auto found = base_->objects_of(id, relation);
    objects.insert(objects.end(), found.begin(), found.end());
  }
  if (objects.empty()) return std::nullopt;
  return base_->label(*std::min_element(objects.begin(), objects.end()));
}

std::optional<std::string> SymbolicSubject::inverse_lookup(const std::string& object,
                                                           const std::string& relation) const {
  std::set<std::string> subjects;
  for (const auto& [key, value] : overlay_) {
    if (key.second == relation && value == object) subjects.insert(key.first);
  }
  for (const auto& id : base_->ids_for_label(object)) {
    for (const auto& s : base_->subjects_of(relation, id)) {
      auto label = base_->label(s);
      if (!overlay_.contains({label, relation})) subjects.insert(label);
    }
  }
  if (subjects.size() != 1) return std::nullopt;
  return *subjects.begin();
}

std::optional<std::string> SymbolicSubject::resolve_phrase(std::string_view phrase, int budget) const {
  phrase = text::trim(phrase);
  if (phrase.empty()) return std::nullopt;
  if (budget > 0) {
    auto lowered = text::to_lower(phrase);
    for (const auto& p : noun_patterns_) {
      if (lowered.size() <= p.prefix.size() + p.suffix.size()) continue;
      if (!lowered.starts_with(p.prefix) || !lowered.ends_with(p.suffix)) continue;
      auto inner = phrase.substr(p.prefix.size(), phrase.size() - p.prefix.size() - p.suffix.size());
      auto arg = resolve_phrase(inner, budget - 1);
      if (!arg) continue;
      auto value = p.inverse ? inverse_lookup(*arg, p.relation) : lookup(*arg, p.relation);
      if (value) return value;
    }
  }
  return canonical(phrase);
}

std::string SymbolicSubject::query(const std::string& prompt) {
  auto body = strip_prompt(prompt);
  auto lowered = text::to_lower(body);
  for (const auto& p : prompt_patterns_) {
    if (lowered.size() <= p.prefix.size() + p.suffix.size()) continue;
    if (!lowered.starts_with(p.prefix) || !lowered.ends_with(p.suffix)) continue;
    auto inner = body.substr(p.prefix.size(), body.size() - p.prefix.size() - p.suffix.size());
    auto arg = resolve_phrase(inner, 8);
    if (!arg) continue;
    auto value = p.inverse ? inverse_lookup(*arg, p.relation) : lookup(*arg, p.relation);
    if (value) return *value;
  }
  return "unknown";
}

// ---------------------------------------------------------------------------

RemoteSubject::RemoteSubject(std::string base_url, std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
  if (!base_url_.starts_with("http://") && !base_url_.starts_with("https://")) {
    throw Error("subject URL '" + base_url_ + "' is not an http(s) URL");
  }
  std::random_device rd;
  std::uint64_t nonce = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  session_ = sha256_hex(std::to_string(nonce)).substr(0, 12);
}

nlohmann::json RemoteSubject::post(const std::string& path, const nlohmann::json& body) {
  httplib::Client client(base_url_);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_).count();
  auto usecs = static_cast<long>((timeout_.count() % 1000) * 1000);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) throw SubjectError("subject " + path + ": connection failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw SubjectError("subject " + path + " returned HTTP " + std::to_string(res->status) + ": " + res->body);
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw SubjectError("subject " + path + ": malformed response: " + e.what());
  }
}

void RemoteSubject::apply_batch(const chain::EditBatch& batch) {
  if (!token_.empty()) throw SubjectError("remote subject: revert before applying another batch");
  auto token = session_ + "-" + std::to_string(++counter_);
  post("/apply", {{"run_token", token}, {"batch", chain::batch_entries(batch)}});
  token_ = std::move(token);
}

std::string RemoteSubject::query(const std::string& prompt) {
  nlohmann::json body = {{"prompt", prompt}};
  if (!token_.empty()) body["run_token"] = token_;
  auto reply = post("/query", body);
  if (!reply.contains("text") || !reply["text"].is_string()) throw SubjectError("subject /query: missing \"text\"");
  return reply["text"].get<std::string>();
}

void RemoteSubject::revert() {
  if (token_.empty()) return;
  post("/revert", {{"run_token", token_}});
  token_.clear();
}

// ---------------------------------------------------------------------------

namespace {

void reply(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

std::optional<nlohmann::json> parse_request(const httplib::Request& req, httplib::Response& res) {
  try {
    auto j = nlohmann::json::parse(req.body);
    if (!j.is_object()) throw Error("expected a JSON object");
    return j;
  } catch (const std::exception& e) {
    reply(res, 400, {{"error", std::string("malformed request: ") + e.what()}});
    return std::nullopt;
  }
}

std::optional<std::string> token_of(const nlohmann::json& j) {
  auto it = j.find("run_token");
  if (it == j.end() || !it->is_string() || it->get<std::string>().empty()) return std::nullopt;
  return it->get<std::string>();
}

}  // namespace

SubjectServer::SubjectServer(SubjectModel& model) : model_(model), server_(std::make_unique<httplib::Server>()) {
  server_->Post("/apply", [this](const httplib::Request& req, httplib::Response& res) {
    auto j = parse_request(req, res);
    if (!j) return;
    auto token = token_of(*j);
    if (!token) return reply(res, 400, {{"error", "run_token is required"}});
    chain::EditBatch batch;
    try {
      batch = chain::batch_from_entries(j->value("batch", nlohmann::json()));
    } catch (const std::exception& e) {
      return reply(res, 400, {{"error", std::string("malformed batch: ") + e.what()}});
    }
    std::lock_guard lock(mutex_);
    if (active_ == token) return reply(res, 200, {{"status", "already_applied"}});
    if (active_) return reply(res, 409, {{"error", "another run is applied"}, {"active_run", *active_}});
    if (finished_.contains(*token)) return reply(res, 409, {{"error", "run token already used"}});
    try {
      model_.apply_batch(batch);
    } catch (const std::exception& e) {
      return reply(res, 500, {{"error", e.what()}});
    }
    active_ = *token;
    reply(res, 200, {{"status", "applied"}, {"edits", batch.facts().size()}});
  });

  server_->Post("/query", [this](const httplib::Request& req, httplib::Response& res) {
    auto j = parse_request(req, res);
    if (!j) return;
    auto prompt = j->find("prompt");
    if (prompt == j->end() || !prompt->is_string()) return reply(res, 400, {{"error", "prompt is required"}});
    std::lock_guard lock(mutex_);
    if (auto token = token_of(*j); token && active_ && *active_ != *token) {
      return reply(res, 409, {{"error", "run token is not the applied run"}});
    }
    try {
      reply(res, 200, {{"text", model_.query(prompt->get<std::string>())}});
    } catch (const std::exception& e) {
      reply(res, 500, {{"error", e.what()}});
    }
  });

  server_->Post("/revert", [this](const httplib::Request& req, httplib::Response& res) {
    auto j = parse_request(req, res);
    if (!j) return;
    auto token = token_of(*j);
    if (!token) return reply(res, 400, {{"error", "run_token is required"}});
    std::lock_guard lock(mutex_);
    if (finished_.contains(*token)) return reply(res, 200, {{"status", "already_reverted"}});
    if (active_ && *active_ != *token) return reply(res, 409, {{"error", "run token is not the applied run"}});
    try {
      model_.revert();
    } catch (const std::exception& e) {
      return reply(res, 500, {{"error", e.what()}});
    }
    active_.reset();
    finished_.insert(*token);
    reply(res, 200, {{"status", "reverted"}});
  });

  server_->Get("/health", [](const httplib::Request&, httplib::Response& res) { reply(res, 200, {{"status", "ok"}}); });
}

SubjectServer::~SubjectServer() { stop(); }

void SubjectServer::start(int port) {
  if (port == 0) {
    port_ = server_->bind_to_any_port("127.0.0.1");
  } else {
    port_ = server_->bind_to_port("127.0.0.1", port) ? port : -1;
  }
  if (port_ <= 0) throw Error("subject server: cannot bind");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void SubjectServer::stop() {
  if (thread_.joinable()) {
    server_->stop();
    thread_.join();
  }
}

std::string SubjectServer::url() const { return "http://127.0.0.1:" + std::to_string(port_); }

}  // namespace chainedit::eval
