#pragma once

// Trained model bundle and its binary container. Layout: 8-byte magic,
// u32 format version, then length-prefixed fields in a fixed order. Integers are
// little-endian u64, reals are IEEE doubles written byte for byte, so a
// round trip reproduces every parameter exactly.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

#include "ifmavd/config.hpp"
#include "ifmavd/detector.hpp"
#include "ifmavd/errors.hpp"
#include "ifmavd/ggnn.hpp"
#include "ifmavd/kmeans.hpp"
#include "ifmavd/logistic.hpp"
#include "ifmavd/token_embed.hpp"

namespace ifmavd {

static_assert(std::endian::native == std::endian::little, "bundle I/O assumes a little-endian host");

inline constexpr std::string_view kBundleMagic = "IFMAVDMB";
inline constexpr std::uint32_t kBundleFormatVersion = 1;

struct ModelBundle {
  PipelineConfig config;
  Vocabulary vocab;
  EmbeddingTable table;
  GgnnParams ggnn;
  LogisticHead intra_head;
  Centroids centroids;  // zero rows when the training corpus had no behaviors
  ApiList api_list;
  // Training functions, in hypergraph row order.
  std::vector<std::string> function_ids;
  std::vector<int> labels;
  Matrix features;
  HyperedgeSet hyperedges;
  HgnnParams hgnn;

  friend bool operator==(const ModelBundle& a, const ModelBundle& b) {
    return config_to_json(a.config) == config_to_json(b.config) && a.vocab == b.vocab && a.table == b.table &&
           a.ggnn == b.ggnn && a.intra_head == b.intra_head && a.centroids == b.centroids && a.api_list == b.api_list &&
           a.function_ids == b.function_ids && a.labels == b.labels && a.features == b.features &&
           a.hyperedges == b.hyperedges && a.hgnn == b.hgnn;
  }
};

namespace detail {

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void i64(std::int64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void str(std::string_view s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  template <typename M>
  void mat(const M& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) f64(m(i, j));
  }
  void vec(const Vector& v) { mat(Matrix(v)); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class ByteReader {
 public:
  ByteReader(std::string_view data, std::string context) : data_(data), ctx_(std::move(context)) {}

  void raw(void* p, std::size_t n) {
    if (n > data_.size() - pos_) throw IoError(ctx_ + ": truncated bundle");
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, sizeof v);
    return v;
  }
  std::int64_t i64() {
    std::int64_t v;
    raw(&v, sizeof v);
    return v;
  }
  double f64() {
    double v;
    raw(&v, sizeof v);
    return v;
  }
  std::size_t count() {
    const auto n = u64();
    if (n > data_.size()) throw IoError(ctx_ + ": corrupt length field");
    return static_cast<std::size_t>(n);
  }
  std::string str() {
    std::string s(count(), '\0');
    raw(s.data(), s.size());
    return s;
  }
  template <typename M>
  M mat() {
    const auto r = count(), c = count();
    if (r != 0 && c > (data_.size() - pos_) / 8 / r) throw IoError(ctx_ + ": corrupt matrix shape");
    M m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = f64();
    return m;
  }
  Vector vec() {
    Matrix m = mat<Matrix>();
    if (m.cols() != 1) throw IoError(ctx_ + ": expected a column vector");
    return m.col(0);
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
  std::string ctx_;
};

}  // namespace detail

inline std::string bundle_to_bytes(const ModelBundle& b) {
  detail::ByteWriter w;
  w.raw(kBundleMagic.data(), kBundleMagic.size());
  const std::uint32_t version = kBundleFormatVersion;
  w.raw(&version, sizeof version);
  w.str(config_to_json(b.config).dump());

  w.u64(b.vocab.size());
  for (const auto& t : b.vocab.tokens()) w.str(t);
  w.mat(b.table);

  w.i64(b.ggnn.dim);
  w.i64(b.ggnn.steps);
  for (const Matrix* m : {&b.ggnn.wz, &b.ggnn.wr, &b.ggnn.wh, &b.ggnn.uz, &b.ggnn.ur, &b.ggnn.uh, &b.ggnn.proj}) w.mat(*m);
  for (const Vector* v : {&b.ggnn.bz, &b.ggnn.br, &b.ggnn.bh, &b.ggnn.proj_bias}) w.vec(*v);
  w.vec(b.intra_head.w);
  w.f64(b.intra_head.b);

  w.mat(b.centroids);
  w.u64(b.api_list.size());
  for (const auto& a : b.api_list) w.str(a);

  w.u64(b.function_ids.size());
  for (std::size_t i = 0; i < b.function_ids.size(); ++i) {
    w.str(b.function_ids[i]);
    w.i64(b.labels.at(i));
  }
  w.mat(b.features);
  w.u64(b.hyperedges.size());
  for (const auto& e : b.hyperedges) {
    w.i64(e.cluster);
    w.u64(e.members.size());
    for (const auto& m : e.members) w.str(m);
  }

  w.u64(b.hgnn.beta.size());
  for (const auto& m : b.hgnn.beta) w.mat(m);
  w.vec(b.hgnn.w);
  w.f64(b.hgnn.b);
  return w.take();
}

/// `context` names the source (usually the path) in error messages.
inline ModelBundle bundle_from_bytes(std::string_view bytes, const std::string& context = "<bundle>") {
  if (bytes.size() < kBundleMagic.size() + 4 || bytes.substr(0, kBundleMagic.size()) != kBundleMagic)
    throw VersionError(context + ": not a model bundle (bad magic)");
  detail::ByteReader r(bytes.substr(kBundleMagic.size()), context);
  std::uint32_t version = 0;
  r.raw(&version, sizeof version);
  if (version != kBundleFormatVersion)
    throw VersionError(context + ": unsupported bundle version " + std::to_string(version));

  ModelBundle b;
  try {
    b.config = config_from_json(nlohmann::json::parse(r.str()));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(context + ": corrupt config block: " + e.what());
  }

  std::vector<std::string> tokens(r.count());
  for (auto& t : tokens) t = r.str();
  b.vocab = Vocabulary::from_tokens(tokens);
  if (b.vocab.tokens() != tokens) throw IoError(context + ": vocabulary is not in canonical order");
  b.table = r.mat<EmbeddingTable>();

  const auto dim = r.i64(), steps = r.i64();
  if (dim < 1 || steps < 1 || dim > (1 << 20) || steps > (1 << 10)) throw IoError(context + ": corrupt GGNN shape");
  b.ggnn = GgnnParams::zeros(static_cast<int>(dim), static_cast<int>(steps));
  for (Matrix* m : {&b.ggnn.wz, &b.ggnn.wr, &b.ggnn.wh, &b.ggnn.uz, &b.ggnn.ur, &b.ggnn.uh, &b.ggnn.proj}) *m = r.mat<Matrix>();
  for (Vector* v : {&b.ggnn.bz, &b.ggnn.br, &b.ggnn.bh, &b.ggnn.proj_bias}) *v = r.vec();
  b.intra_head.w = r.vec();
  b.intra_head.b = r.f64();

  b.centroids = r.mat<Matrix>();
  for (std::size_t n = r.count(); n > 0; --n) b.api_list.insert(r.str());

  const auto n_fn = r.count();
  for (std::size_t i = 0; i < n_fn; ++i) {
    b.function_ids.push_back(r.str());
    b.labels.push_back(static_cast<int>(r.i64()));
  }
  b.features = r.mat<Matrix>();
  for (std::size_t n = r.count(); n > 0; --n) {
    Hyperedge e;
    e.cluster = static_cast<int>(r.i64());
    e.members.resize(r.count());
    for (auto& m : e.members) m = r.str();
    b.hyperedges.push_back(std::move(e));
  }

  b.hgnn.beta.resize(r.count());
  for (auto& m : b.hgnn.beta) m = r.mat<Matrix>();
  b.hgnn.w = r.vec();
  b.hgnn.b = r.f64();
  if (!r.done()) throw IoError(context + ": trailing bytes after bundle");

  if (b.table.rows() != static_cast<Eigen::Index>(b.vocab.size()) || b.table.cols() != b.ggnn.dim ||
      b.features.rows() != static_cast<Eigen::Index>(n_fn) || (n_fn > 0 && b.features.cols() != b.ggnn.dim) ||
      b.hgnn.w.size() != b.ggnn.dim || b.intra_head.w.size() != b.ggnn.dim)
    throw IoError(context + ": inconsistent bundle shapes");
  return b;
}

inline void save_bundle(const ModelBundle& b, const std::string& path) { write_text_file(path, bundle_to_bytes(b)); }

inline ModelBundle load_bundle(const std::string& path) { return bundle_from_bytes(read_text_file(path), path); }

/// Lowercase hex SHA-256 of `bytes`.
inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 computation failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

}  // namespace ifmavd
