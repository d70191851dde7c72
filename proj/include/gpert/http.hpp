#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

namespace gpert::http {

struct Response {
  int status = 0;  // 0: transport failure, see error
  std::string body;
  std::string error;
};

using Post = std::function<Response(const std::string& url, const std::string& body,
                                    std::chrono::milliseconds timeout)>;

// Real transport over cpp-httplib. When bearer_token is set it is sent as an
// Authorization header.
Post make_post(std::optional<std::string> bearer_token = std::nullopt);

// JSONL log of provider calls, shared between worker threads.
class AuditLog {
 public:
  AuditLog() = default;
  explicit AuditLog(const std::filesystem::path& path);

  void append(const nlohmann::json& entry);
  std::string next_request_id(const std::string& provider);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::mutex mu_;
  std::atomic<std::uint64_t> seq_{0};
};

struct CallOptions {
  std::string provider = "provider";
  std::chrono::milliseconds timeout{30000};
  int max_retries = 2;
  AuditLog* audit = nullptr;
};

// POSTs a JSON body and returns the parsed JSON reply. Transport failures,
// 5xx/429 statuses and unparsable bodies are retried up to max_retries times;
// other statuses fail at once. Throws gpert::ProviderError.
nlohmann::json post_json(const Post& post, const std::string& url, const nlohmann::json& request,
                         const CallOptions& options);

}  // namespace gpert::http
