#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gpert/http.hpp"
#include "gpert/types.hpp"

namespace gpert {

// A point in the joint text/modality embedding space. Always non-empty and
// finite; zero norm is allowed here but rejected by cosine_similarity.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  explicit EmbeddingVector(std::vector<double> values);

  std::size_t dim() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double norm() const;
  EmbeddingVector scaled(double c) const;

  bool operator==(const EmbeddingVector&) const = default;

 private:
  std::vector<double> values_;
};

// (a.b) / (|a||b|), clamped to [-1, 1]. Throws gpert::Error on dimension
// mismatch or a zero-norm input.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);
double cosine_similarity(std::span<const double> a, std::span<const double> b);

namespace role {
inline constexpr std::string_view kText = "text";
inline constexpr std::string_view kModality = "modality";
std::string perturbation(std::size_t index);
}  // namespace role

struct EmbeddingKey {
  std::string item_id;
  std::string role;

  auto operator<=>(const EmbeddingKey&) const = default;
};

class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(std::size_t dim) : dim_(dim) {}

  // dim is fixed by the first insert when not given up front.
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // Throws on dimension mismatch or an existing key.
  void insert(EmbeddingKey key, EmbeddingVector v);
  void insert_or_assign(EmbeddingKey key, EmbeddingVector v);
  const EmbeddingVector* find(const EmbeddingKey& key) const;
  const EmbeddingVector& at(const EmbeddingKey& key) const;
  const std::map<EmbeddingKey, EmbeddingVector>& entries() const { return entries_; }

  bool operator==(const EmbeddingStore&) const = default;

 private:
  void check_dim(const EmbeddingVector& v);

  std::size_t dim_ = 0;
  std::map<EmbeddingKey, EmbeddingVector> entries_;
};

// UTF-8 text, LF endings, '#' comment lines ignored. One JSON header line
// {"count":N,"dim":D} followed by one {"id","role","values"} record per line.
EmbeddingStore load_store(const std::filesystem::path& path);
EmbeddingStore parse_store(std::string_view contents);
void save_store(const EmbeddingStore& store, const std::filesystem::path& path);
std::string serialize_store(const EmbeddingStore& store);

struct EmbeddingProviderSpec {
  enum class Kind { Remote, Stub };
  Kind kind = Kind::Stub;
  std::string endpoint;
  std::size_t dim = 64;
  std::chrono::milliseconds timeout{30000};
  int max_retries = 2;
  std::optional<std::uint64_t> seed;
  // Empty means every modality is accepted.
  std::vector<ModalityKind> modalities;
  std::size_t max_in_flight = 4;

  std::vector<std::string> problems() const;
};

// Stub vectors: a counter-based normal stream keyed by hash(seed, role, input),
// L2-normalized.
EmbeddingVector stub_embedding(std::uint64_t seed, std::string_view role, std::string_view input,
                               std::size_t dim);

class EmbeddingProvider {
 public:
  // post and audit are only used by the remote kind. Throws ValidationError
  // on an inconsistent spec.
  explicit EmbeddingProvider(EmbeddingProviderSpec spec, http::Post post = {},
                             http::AuditLog* audit = nullptr);

  const EmbeddingProviderSpec& spec() const { return spec_; }

  EmbeddingVector embed_text(std::string_view text) const;
  EmbeddingVector embed_asset(std::string_view data_ref, ModalityKind modality) const;

 private:
  EmbeddingVector remote(const nlohmann::json& request) const;

  EmbeddingProviderSpec spec_;
  http::Post post_;
  http::AuditLog* audit_;
};

}  // namespace gpert
