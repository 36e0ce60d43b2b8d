#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "langdepth/rng.hpp"

namespace langdepth {

inline constexpr std::string_view kBackgroundLabel = "background";

class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  explicit EmbeddingVector(std::vector<float> values) : values_(std::move(values)) {}

  std::size_t dim() const { return values_.size(); }
  std::span<const float> values() const { return values_; }
  float operator[](std::size_t i) const { return values_[i]; }

  std::vector<double> to_double() const { return {values_.begin(), values_.end()}; }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  std::vector<float> values_;
};

struct EmbeddingLookup {
  const EmbeddingVector& vector;
  bool fallback = false;
};

/// Label -> embedding collection with a single shared dimensionality.
/// Labels keep their insertion order; that order is what gets written to disk.
class EmbeddingStore {
 public:
  explicit EmbeddingStore(std::size_t dim);

  // Rejects duplicate labels, dimension mismatches and non-finite values.
  void insert(std::string label, EmbeddingVector vector);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return labels_.size(); }
  bool contains(std::string_view label) const;
  const std::vector<std::string>& labels() const { return labels_; }
  const EmbeddingVector& at(std::string_view label) const;

  /// Exact entry when present, otherwise the "background" entry with the
  /// fallback flag set. Throws when neither exists.
  EmbeddingLookup lookup(std::string_view label) const;

  friend bool operator==(const EmbeddingStore& a, const EmbeddingStore& b) {
    return a.dim_ == b.dim_ && a.labels_ == b.labels_ && a.vectors_ == b.vectors_;
  }

 private:
  std::size_t dim_;
  std::vector<std::string> labels_;
  std::vector<EmbeddingVector> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Control embeddings: every component uniform in [0, 1), drawn label by
/// label in the given order. "background" is appended (drawn last) when absent.
EmbeddingStore random_store(std::span<const std::string> labels, std::size_t dim, RngSeed seed);

/// Componentwise mean of contextual variants of one label's embedding.
EmbeddingVector average_variants(std::span<const EmbeddingVector> variants);

// DHEMB text format: header "DHEMB 1 <dim>", then "<label>\t<v0>,<v1>,..."
// per line. Values are written in shortest round-trip form.
void write_store(const EmbeddingStore& store, std::ostream& out);
EmbeddingStore read_store(std::istream& in);
void save_store(const EmbeddingStore& store, const std::filesystem::path& path);
EmbeddingStore load_store(const std::filesystem::path& path);

}  // namespace langdepth
