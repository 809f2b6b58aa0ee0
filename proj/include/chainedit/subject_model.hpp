#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>

#include "chainedit/chain_engine.hpp"
#include "chainedit/kg_store.hpp"
#include "chainedit/relation_meta.hpp"

namespace httplib {
class Server;
}

namespace chainedit::eval {

/// Raised when the system under edit fails; the harness marks the case errored.
class SubjectError : public Error {
 public:
  using Error::Error;
};

/// The system under edit.
class SubjectModel {
 public:
  virtual ~SubjectModel() = default;
  virtual void apply_batch(const chain::EditBatch& batch) = 0;
  virtual std::string query(const std::string& prompt) = 0;
  /// Undoes every batch applied since the last revert.
  virtual void revert() = 0;
};

/// Deterministic subject backed by a triple store plus an edit overlay.
/// Understands the prompts RelationMeta renders, nested noun phrases such as
/// "the father of the spouse of Bob", and alias names for entities.
class SymbolicSubject : public SubjectModel {
 public:
  SymbolicSubject(std::shared_ptr<const kg::TripleStore> base, MetaRegistry meta,
                  std::map<std::string, std::string> aliases = {});

  void apply_batch(const chain::EditBatch& batch) override;
  /// The answering entity's label, or "unknown".
  std::string query(const std::string& prompt) override;
  void revert() override;

  /// Object for (subject label, relation): the overlay first, then the base
  /// store's first object by id.
  std::optional<std::string> lookup(const std::string& subject, const std::string& relation) const;
  std::size_t overlay_size() const { return overlay_.size(); }

 private:
  struct Pattern {
    std::string relation;
    std::string prefix;  // lowercased, before the argument
    std::string suffix;  // lowercased, after the argument
    bool inverse = false;
  };

  std::optional<std::string> resolve_phrase(std::string_view phrase, int budget) const;
  std::optional<std::string> inverse_lookup(const std::string& object, const std::string& relation) const;
  std::string canonical(std::string_view name) const;

  std::shared_ptr<const kg::TripleStore> base_;
  MetaRegistry meta_;
  std::map<std::string, std::string> aliases_;
  std::vector<Pattern> prompt_patterns_;
  std::vector<Pattern> noun_patterns_;
  std::map<std::pair<std::string, std::string>, std::string> overlay_;
};

/// Client for a subject model served over HTTP:
///   POST /apply  {"run_token", "batch": [entries]}
///   POST /query  {"run_token", "prompt"} -> {"text"}
///   POST /revert {"run_token"}
/// Every apply gets a fresh run token; the server treats repeats of the same
/// token as no-ops.
class RemoteSubject : public SubjectModel {
 public:
  explicit RemoteSubject(std::string base_url, std::chrono::milliseconds timeout = std::chrono::seconds(60));

  void apply_batch(const chain::EditBatch& batch) override;
  std::string query(const std::string& prompt) override;
  void revert() override;
  const std::string& run_token() const { return token_; }

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body);

  std::string base_url_;
  std::chrono::milliseconds timeout_;
  std::string session_;
  std::uint64_t counter_ = 0;
  std::string token_;
};

/// Serves a SubjectModel over the protocol RemoteSubject speaks.
/// Status codes: 400 malformed request, 409 run-token conflict (another run is
/// applied, or the token was already reverted), 500 subject failure.
class SubjectServer {
 public:
  explicit SubjectServer(SubjectModel& model);
  ~SubjectServer();
  SubjectServer(const SubjectServer&) = delete;
  SubjectServer& operator=(const SubjectServer&) = delete;

  /// Binds 127.0.0.1 on `port` (0 picks a free one) and serves in the background.
  void start(int port = 0);
  void stop();
  int port() const { return port_; }
  std::string url() const;

 private:
  SubjectModel& model_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::mutex mutex_;
  std::optional<std::string> active_;
  std::set<std::string> finished_;
  int port_ = 0;
};

}  // namespace chainedit::eval
