#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace langdepth {

/// Frozen per-label L2D output. features/log_probs are filled only for
/// classification-mode models.
struct LookupEntry {
  std::string label;
  double mean_depth = 0.0;
  std::vector<double> features;
  std::vector<double> log_probs;

  friend bool operator==(const LookupEntry&, const LookupEntry&) = default;
};

struct LookupHit {
  const LookupEntry& entry;
  bool fallback = false;
};

class LookupTable {
 public:
  LookupTable() = default;
  explicit LookupTable(std::vector<LookupEntry> entries);

  void insert(LookupEntry entry);
  const std::vector<LookupEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const LookupEntry* find(std::string_view label) const;
  // Exact entry, else the "background" entry flagged as fallback; throws if neither.
  LookupHit lookup(std::string_view label) const;

  friend bool operator==(const LookupTable& a, const LookupTable& b) {
    return a.entries_ == b.entries_;
  }

 private:
  std::vector<LookupEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// JSON-lines: {"label", "mean_depth", "features50"?, "log_probs"?}
void save_lookup(const LookupTable& table, const std::filesystem::path& path);
LookupTable load_lookup(const std::filesystem::path& path);

}  // namespace langdepth
