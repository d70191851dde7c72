#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include "gpert/embedding.hpp"
#include "gpert/error.hpp"
#include "oracles.hpp"

using namespace gpert;

namespace {

// Local HTTP server on an ephemeral port for the lifetime of the object.
class TestServer {
 public:
  explicit TestServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/embed", handler);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~TestServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/embed"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::vector<nlohmann::json> read_log(const std::filesystem::path& p) {
  std::vector<nlohmann::json> out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) out.push_back(nlohmann::json::parse(line));
  return out;
}

}  // namespace

TEST_CASE("cosine similarity") {
  EmbeddingVector a({1, 0}), b({0, 2}), c({-3, 0});
  CHECK(cosine_similarity(a, b) == doctest::Approx(0.0));
  CHECK(cosine_similarity(a, c) == doctest::Approx(-1.0));
  CHECK(cosine_similarity(a, a.scaled(7)) == doctest::Approx(1.0));
  CHECK_THROWS_AS(cosine_similarity(a, EmbeddingVector({1, 2, 3})), Error);
  CHECK_THROWS_AS(cosine_similarity(a, EmbeddingVector({0, 0})), Error);
  CHECK_THROWS_AS(EmbeddingVector(std::vector<double>{}), Error);
  CHECK_THROWS_AS(EmbeddingVector({1, std::nan("")}), Error);
}

TEST_CASE("cosine matches the oracle and ignores scale") {
  const auto u = stub_embedding(3, "text", "left", 12), v = stub_embedding(3, "text", "right", 12);
  const std::vector<double> uu(u.values().begin(), u.values().end()), vv(v.values().begin(), v.values().end());
  CHECK(cosine_similarity(u, v) == doctest::Approx(oracle::cosine(uu, vv)).epsilon(1e-12));
  for (double c : {0.1, 10.0}) CHECK(cosine_similarity(u.scaled(c), v) == doctest::Approx(cosine_similarity(u, v)));
}

TEST_CASE("stub embeddings are deterministic and normalized") {
  const auto a = stub_embedding(1, "text", "hello", 32);
  CHECK(a == stub_embedding(1, "text", "hello", 32));
  CHECK(a.norm() == doctest::Approx(1.0));
  CHECK_FALSE(a == stub_embedding(2, "text", "hello", 32));
  CHECK_FALSE(a == stub_embedding(1, "asset:image", "hello", 32));
}

TEST_CASE("store rejects mixed dimensions and duplicate keys") {
  EmbeddingStore store;
  store.insert({"q1", "text"}, EmbeddingVector({1, 2, 3}));
  CHECK(store.dim() == 3);
  CHECK_THROWS_WITH_AS(store.insert({"q2", "text"}, EmbeddingVector({1, 2})), doctest::Contains("inconsistent dimension"),
                       Error);
  CHECK_THROWS_AS(store.insert({"q1", "text"}, EmbeddingVector({1, 1, 1})), Error);
  store.insert_or_assign({"q1", "text"}, EmbeddingVector({1, 1, 1}));
  CHECK(store.at({"q1", "text"})[0] == 1.0);
  CHECK(store.find({"q9", "text"}) == nullptr);
  CHECK_THROWS_AS(store.at({"q9", "text"}), Error);
}

TEST_CASE("store round-trips through its file format") {
  EmbeddingStore store;
  for (int i = 0; i < 5; ++i)
    store.insert({"q" + std::to_string(i), std::string(role::kText)},
                 stub_embedding(9, "text", std::to_string(i), 8));
  store.insert({"q0", role::perturbation(3)}, EmbeddingVector({0.1, -1e-300, 1e300, 0, 0, 0, 0, 1.0 / 3}));
  const auto text = serialize_store(store);
  CHECK(parse_store(text) == store);
  CHECK(serialize_store(parse_store(text)) == text);

  const auto path = std::filesystem::temp_directory_path() / "gpert_store_roundtrip.store";
  save_store(store, path);
  CHECK(load_store(path) == store);
  std::filesystem::remove(path);
}

TEST_CASE("store parser reports problems with line numbers") {
  CHECK_THROWS_AS(parse_store(""), ParseError);
  CHECK_THROWS_WITH_AS(parse_store("{\"count\":1,\"dim\":2}\n{\"id\":\"a\",\"role\":\"text\",\"values\":[1]}\n"),
                       doctest::Contains("inconsistent dimension"), ParseError);
  CHECK_THROWS_AS(parse_store("{\"count\":2,\"dim\":1}\n{\"id\":\"a\",\"role\":\"text\",\"values\":[1]}\n"),
                  ParseError);
  try {
    parse_store("# comment\n{\"count\":1,\"dim\":1}\nnot json\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("provider settings validation") {
  EmbeddingProviderSpec spec;
  CHECK_FALSE(spec.problems().empty());  // stub without seed
  spec.seed = 1;
  CHECK(spec.problems().empty());
  spec.kind = EmbeddingProviderSpec::Kind::Remote;
  CHECK_FALSE(spec.problems().empty());  // no endpoint
  CHECK_THROWS_AS(EmbeddingProvider{spec}, ValidationError);
}

TEST_CASE("stub provider refuses unsupported modalities") {
  EmbeddingProviderSpec spec;
  spec.seed = 4;
  spec.dim = 16;
  spec.modalities = {ModalityKind::Image};
  EmbeddingProvider p(spec);
  CHECK(p.embed_asset("x.png", ModalityKind::Image).dim() == 16);
  CHECK_THROWS_WITH_AS(p.embed_asset("x.wav", ModalityKind::Audio), doctest::Contains("audio"), Error);
  CHECK(p.embed_text("a cat") == stub_embedding(4, "text", "a cat", 16));
}

TEST_CASE("remote provider retries 503 and gives up after three attempts") {
  std::atomic<int> hits{0};
  TestServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 503;
  });
  const auto log_path = std::filesystem::temp_directory_path() / "gpert_embed_audit.jsonl";
  std::filesystem::remove(log_path);
  {
    http::AuditLog audit(log_path);
    EmbeddingProviderSpec spec;
    spec.kind = EmbeddingProviderSpec::Kind::Remote;
    spec.endpoint = server.url();
    spec.dim = 4;
    spec.max_retries = 2;
    spec.timeout = std::chrono::milliseconds(2000);
    EmbeddingProvider p(spec, http::make_post(), &audit);
    CHECK_THROWS_WITH_AS(p.embed_text("hello"), doctest::Contains("provider unavailable"), ProviderError);
  }
  CHECK(hits == 3);
  const auto log = read_log(log_path);
  REQUIRE(log.size() == 1);
  CHECK(log[0]["status"] == 503);
  CHECK(log[0]["retries"] == 2);
  CHECK(log[0]["ok"] == false);
  std::filesystem::remove(log_path);
}

TEST_CASE("remote provider recovers after a transient failure") {
  std::atomic<int> hits{0};
  TestServer server([&](const httplib::Request& req, httplib::Response& res) {
    if (hits++ == 0) {
      res.status = 500;
      return;
    }
    const auto body = nlohmann::json::parse(req.body);
    CHECK(body["kind"] == "asset");
    CHECK(body["modality"] == "video");
    res.set_content(R"({"dim":3,"values":[1,2,2]})", "application/json");
  });
  EmbeddingProviderSpec spec;
  spec.kind = EmbeddingProviderSpec::Kind::Remote;
  spec.endpoint = server.url();
  spec.dim = 3;
  EmbeddingProvider p(spec, http::make_post());
  const auto v = p.embed_asset("clip.mp4", ModalityKind::Video);
  CHECK(v.norm() == doctest::Approx(3.0));
  CHECK(hits == 2);
}

TEST_CASE("remote provider rejects wrong dimensions without retrying") {
  int calls = 0;
  http::Post fake = [&](const std::string&, const std::string&, std::chrono::milliseconds) {
    ++calls;
    return http::Response{200, R"({"values":[1,2]})", ""};
  };
  EmbeddingProviderSpec spec;
  spec.kind = EmbeddingProviderSpec::Kind::Remote;
  spec.endpoint = "http://unused/embed";
  spec.dim = 3;
  EmbeddingProvider p(spec, fake);
  CHECK_THROWS_WITH_AS(p.embed_text("x"), doctest::Contains("dimension mismatch"), ProviderError);
  CHECK(calls == 1);
}

TEST_CASE("client errors fail immediately") {
  int calls = 0;
  http::Post fake = [&](const std::string&, const std::string&, std::chrono::milliseconds) {
    ++calls;
    return http::Response{401, "{}", ""};
  };
  CHECK_THROWS_AS(http::post_json(fake, "http://x/y", {}, {}), ProviderError);
  CHECK(calls == 1);
}

TEST_CASE("unreachable endpoint is a provider error") {
  EmbeddingProviderSpec spec;
  spec.kind = EmbeddingProviderSpec::Kind::Remote;
  spec.endpoint = "http://127.0.0.1:1/embed";
  spec.dim = 3;
  spec.max_retries = 1;
  spec.timeout = std::chrono::milliseconds(500);
  EmbeddingProvider p(spec, http::make_post());
  CHECK_THROWS_WITH_AS(p.embed_text("x"), doctest::Contains("after 2 attempts"), ProviderError);
}
