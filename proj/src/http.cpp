#include <httplib.h>

#include "gpert/http.hpp"

#include "gpert/error.hpp"

namespace gpert::http {

namespace {

struct SplitUrl {
  std::string origin;
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ProviderError("invalid endpoint URL '" + url + "'");
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

bool retryable(int status) { return status == 0 || status == 429 || status >= 500; }

}  // namespace

Post make_post(std::optional<std::string> bearer_token) {
  return [token = std::move(bearer_token)](const std::string& url, const std::string& body,
                                           std::chrono::milliseconds timeout) {
    Response r;
    SplitUrl parts;
    try {
      parts = split_url(url);
    } catch (const std::exception& e) {
      r.error = e.what();
      return r;
    }
    httplib::Client client(parts.origin);
    const auto secs = timeout.count() / 1000;
    const auto usecs = (timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (token) headers.emplace("Authorization", "Bearer " + *token);
    auto res = client.Post(parts.path, headers, body, "application/json");
    if (!res) {
      r.error = httplib::to_string(res.error());
      return r;
    }
    r.status = res->status;
    r.body = res->body;
    return r;
  };
}

AuditLog::AuditLog(const std::filesystem::path& path) : path_(path) {
  if (!path_.empty()) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    out_.open(path_, std::ios::app);
  }
}

void AuditLog::append(const nlohmann::json& entry) {
  std::lock_guard lock(mu_);
  if (out_.is_open()) {
    out_ << entry.dump() << '\n';
    out_.flush();
  }
}

std::string AuditLog::next_request_id(const std::string& provider) {
  return provider + "-" + std::to_string(++seq_);
}

nlohmann::json post_json(const Post& post, const std::string& url, const nlohmann::json& request,
                         const CallOptions& options) {
  const std::string body = request.dump();
  const std::string request_id =
      options.audit ? options.audit->next_request_id(options.provider) : options.provider;
  std::string last_error;
  const auto start = std::chrono::steady_clock::now();
  for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
    Response r = post(url, body, options.timeout);
    auto log = [&](bool ok) {
      if (!options.audit) return;
      const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - start);
      options.audit->append({{"request_id", request_id},
                             {"provider", options.provider},
                             {"url", url},
                             {"status", r.status},
                             {"retries", attempt},
                             {"latency_ms", latency.count()},
                             {"ok", ok},
                             {"error", ok ? std::string() : last_error}});
    };
    if (r.status >= 200 && r.status < 300) {
      auto parsed = nlohmann::json::parse(r.body, nullptr, /*allow_exceptions=*/false);
      if (!parsed.is_discarded()) {
        log(true);
        return parsed;
      }
      last_error = "unparsable response body";
      if (attempt == options.max_retries) log(false);
      continue;
    }
    last_error = r.status == 0 ? "transport error: " + r.error : "HTTP status " + std::to_string(r.status);
    if (!retryable(r.status)) {
      log(false);
      throw ProviderError(options.provider + " request to " + url + " failed: " + last_error);
    }
    if (attempt == options.max_retries) log(false);
  }
  throw ProviderError("provider unavailable: " + options.provider + " at " + url + " after " +
                      std::to_string(options.max_retries + 1) + " attempts (" + last_error + ")");
}

}  // namespace gpert::http
