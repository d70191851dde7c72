#include "gpert/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gpert/error.hpp"
#include "gpert/hashing.hpp"

namespace gpert {

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw Error("embedding vector must have positive dimension");
  for (double v : values_)
    if (!std::isfinite(v)) throw Error("embedding vector has a non-finite value");
}

double EmbeddingVector::norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return std::sqrt(s);
}

EmbeddingVector EmbeddingVector::scaled(double c) const {
  std::vector<double> out(values_);
  for (double& v : out) v *= c;
  return EmbeddingVector(std::move(out));
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error("dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (!(na > 0.0) || !(nb > 0.0)) throw Error("cosine similarity of a zero-norm vector");
  const double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  return cosine_similarity(a.values(), b.values());
}

std::string role::perturbation(std::size_t index) { return "perturbation:" + std::to_string(index); }

void EmbeddingStore::check_dim(const EmbeddingVector& v) {
  if (dim_ == 0) dim_ = v.dim();
  if (v.dim() != dim_)
    throw Error("inconsistent dimension: store has " + std::to_string(dim_) + ", entry has " +
                std::to_string(v.dim()));
}

void EmbeddingStore::insert(EmbeddingKey key, EmbeddingVector v) {
  check_dim(v);
  if (entries_.contains(key)) throw Error("duplicate embedding key " + key.item_id + "/" + key.role);
  entries_.emplace(std::move(key), std::move(v));
}

void EmbeddingStore::insert_or_assign(EmbeddingKey key, EmbeddingVector v) {
  check_dim(v);
  entries_.insert_or_assign(std::move(key), std::move(v));
}

const EmbeddingVector* EmbeddingStore::find(const EmbeddingKey& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

const EmbeddingVector& EmbeddingStore::at(const EmbeddingKey& key) const {
  if (const auto* v = find(key)) return *v;
  throw Error("missing embedding " + key.item_id + "/" + key.role);
}

std::string serialize_store(const EmbeddingStore& store) {
  std::string out = nlohmann::json{{"dim", store.dim()}, {"count", store.size()}}.dump();
  out += '\n';
  for (const auto& [key, v] : store.entries()) {
    nlohmann::json rec{{"id", key.item_id},
                       {"role", key.role},
                       {"values", std::vector<double>(v.values().begin(), v.values().end())}};
    out += rec.dump();
    out += '\n';
  }
  return out;
}

void save_store(const EmbeddingStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write embedding store " + path.string());
  out << serialize_store(store);
  if (!out) throw Error("failed writing embedding store " + path.string());
}

EmbeddingStore parse_store(std::string_view contents) {
  std::istringstream in{std::string(contents)};
  std::string line;
  long lineno = 0;
  std::optional<std::size_t> dim, count;
  EmbeddingStore store;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError("malformed embedding store record", lineno);
    try {
      if (!dim) {
        dim = j.at("dim").get<std::size_t>();
        count = j.at("count").get<std::size_t>();
        store = *dim > 0 ? EmbeddingStore(*dim) : EmbeddingStore();
        continue;
      }
      auto values = j.at("values").get<std::vector<double>>();
      if (values.size() != *dim)
        throw Error("inconsistent dimension: header says " + std::to_string(*dim) + ", record has " +
                    std::to_string(values.size()));
      store.insert({j.at("id").get<std::string>(), j.at("role").get<std::string>()},
                   EmbeddingVector(std::move(values)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed embedding store record: ") + e.what(), lineno);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  if (!dim) throw ParseError("embedding store has no header line");
  if (store.size() != *count)
    throw ParseError("embedding store header declares " + std::to_string(*count) + " entries, found " +
                     std::to_string(store.size()));
  return store;
}

EmbeddingStore load_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open embedding store " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_store(ss.str());
}

std::vector<std::string> EmbeddingProviderSpec::problems() const {
  std::vector<std::string> out;
  if (dim == 0) out.emplace_back("embedding dim must be positive");
  if (kind == Kind::Remote && endpoint.empty()) out.emplace_back("remote embedding provider requires an endpoint");
  if (kind == Kind::Stub && !seed) out.emplace_back("stub embedding provider requires a seed");
  if (max_retries < 0) out.emplace_back("max_retries must be non-negative");
  if (max_in_flight == 0) out.emplace_back("max_in_flight must be positive");
  return out;
}

EmbeddingVector stub_embedding(std::uint64_t seed, std::string_view role, std::string_view input,
                               std::size_t dim) {
  const std::uint64_t key = hash_parts(seed, {role, input});
  std::vector<double> v(dim);
  double ss = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    v[i] = counter_normal(key, i);
    ss += v[i] * v[i];
  }
  const double inv = 1.0 / std::sqrt(ss);
  for (double& x : v) x *= inv;
  return EmbeddingVector(std::move(v));
}

EmbeddingProvider::EmbeddingProvider(EmbeddingProviderSpec spec, http::Post post, http::AuditLog* audit)
    : spec_(std::move(spec)), post_(std::move(post)), audit_(audit) {
  if (auto p = spec_.problems(); !p.empty()) throw ValidationError(std::move(p));
  if (spec_.kind == EmbeddingProviderSpec::Kind::Remote && !post_) post_ = http::make_post();
}

EmbeddingVector EmbeddingProvider::remote(const nlohmann::json& request) const {
  http::CallOptions opts{"embedding", spec_.timeout, spec_.max_retries, audit_};
  const auto reply = http::post_json(post_, spec_.endpoint, request, opts);
  std::vector<double> values;
  std::size_t dim = 0;
  try {
    values = reply.at("values").get<std::vector<double>>();
    dim = reply.value("dim", values.size());
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("malformed embedding response: ") + e.what());
  }
  if (dim != spec_.dim || values.size() != spec_.dim)
    throw ProviderError("embedding dimension mismatch: expected " + std::to_string(spec_.dim) + ", got " +
                        std::to_string(values.size()));
  try {
    return EmbeddingVector(std::move(values));
  } catch (const Error& e) {
    throw ProviderError(std::string("invalid embedding response: ") + e.what());
  }
}

EmbeddingVector EmbeddingProvider::embed_text(std::string_view text) const {
  if (text.empty()) throw Error("embed_text: empty text");
  if (spec_.kind == EmbeddingProviderSpec::Kind::Stub)
    return stub_embedding(*spec_.seed, "text", text, spec_.dim);
  return remote({{"kind", "text"}, {"payload", std::string(text)}});
}

EmbeddingVector EmbeddingProvider::embed_asset(std::string_view data_ref, ModalityKind modality) const {
  if (data_ref.empty()) throw Error("embed_asset: empty data_ref");
  if (!spec_.modalities.empty() &&
      std::find(spec_.modalities.begin(), spec_.modalities.end(), modality) == spec_.modalities.end())
    throw Error("embedding provider does not support modality '" + std::string(to_string(modality)) + "'");
  if (spec_.kind == EmbeddingProviderSpec::Kind::Stub)
    return stub_embedding(*spec_.seed, "asset:" + std::string(to_string(modality)), data_ref, spec_.dim);
  return remote({{"kind", "asset"}, {"payload", std::string(data_ref)}, {"modality", std::string(to_string(modality))}});
}

}  // namespace gpert
