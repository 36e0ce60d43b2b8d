#include "langdepth/lookup_table.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "langdepth/embedding_store.hpp"
#include "langdepth/errors.hpp"

namespace langdepth {

LookupTable::LookupTable(std::vector<LookupEntry> entries) {
  for (auto& e : entries) insert(std::move(e));
}

void LookupTable::insert(LookupEntry entry) {
  if (!(std::isfinite(entry.mean_depth) && entry.mean_depth > 0.0)) {
    throw Error("lookup entry '" + entry.label + "' has a non-positive depth");
  }
  if (index_.contains(entry.label)) throw Error("duplicate lookup label '" + entry.label + "'");
  index_.emplace(entry.label, entries_.size());
  entries_.push_back(std::move(entry));
}

const LookupEntry* LookupTable::find(std::string_view label) const {
  auto it = index_.find(std::string(label));
  return it == index_.end() ? nullptr : &entries_[it->second];
}

LookupHit LookupTable::lookup(std::string_view label) const {
  if (const auto* e = find(label)) return {*e, false};
  if (const auto* bg = find(kBackgroundLabel)) return {*bg, true};
  throw Error("label '" + std::string(label) + "' not in lookup table and no '" +
              std::string(kBackgroundLabel) + "' entry");
}

void save_lookup(const LookupTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& e : table.entries()) {
    nlohmann::ordered_json j;
    j["label"] = e.label;
    j["mean_depth"] = e.mean_depth;
    if (!e.features.empty()) j["features50"] = e.features;
    if (!e.log_probs.empty()) j["log_probs"] = e.log_probs;
    out << j.dump() << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

LookupTable load_lookup(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  LookupTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + " line " + std::to_string(line_no);
    try {
      auto j = nlohmann::json::parse(line);
      LookupEntry e;
      e.label = j.at("label").get<std::string>();
      e.mean_depth = j.at("mean_depth").get<double>();
      if (j.contains("features50")) e.features = j["features50"].get<std::vector<double>>();
      if (j.contains("log_probs")) e.log_probs = j["log_probs"].get<std::vector<double>>();
      table.insert(std::move(e));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    } catch (const FormatError&) {
      throw;
    } catch (const Error& e) {
      throw FormatError(where + ": " + e.what());
    }
  }
  return table;
}

}  // namespace langdepth
