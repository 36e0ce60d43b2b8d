#include "langdepth/embedding_store.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "langdepth/errors.hpp"

namespace langdepth {

EmbeddingStore::EmbeddingStore(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw Error("embedding dimension must be positive");
}

void EmbeddingStore::insert(std::string label, EmbeddingVector vector) {
  if (vector.dim() != dim_) {
    throw Error("embedding for '" + label + "' has dim " + std::to_string(vector.dim()) +
                ", store dim is " + std::to_string(dim_));
  }
  for (float v : vector.values()) {
    if (!std::isfinite(v)) throw Error("embedding for '" + label + "' has a non-finite value");
  }
  if (index_.contains(label)) throw Error("duplicate label '" + label + "'");
  index_.emplace(label, labels_.size());
  labels_.push_back(std::move(label));
  vectors_.push_back(std::move(vector));
}

bool EmbeddingStore::contains(std::string_view label) const {
  return index_.contains(std::string(label));
}

const EmbeddingVector& EmbeddingStore::at(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) throw Error("label '" + std::string(label) + "' not in store");
  return vectors_[it->second];
}

EmbeddingLookup EmbeddingStore::lookup(std::string_view label) const {
  if (auto it = index_.find(std::string(label)); it != index_.end()) {
    return {vectors_[it->second], false};
  }
  auto bg = index_.find(std::string(kBackgroundLabel));
  if (bg == index_.end()) {
    throw Error("label '" + std::string(label) + "' not in store and no '" +
                std::string(kBackgroundLabel) + "' fallback entry");
  }
  return {vectors_[bg->second], true};
}

EmbeddingStore random_store(std::span<const std::string> labels, std::size_t dim, RngSeed seed) {
  if (labels.empty()) throw Error("random_store needs at least one label");
  std::unordered_set<std::string> seen;
  for (const auto& label : labels) {
    if (!seen.insert(label).second) throw Error("duplicate label '" + label + "'");
  }

  Rng rng(seed);
  auto draw = [&] {
    std::vector<float> values(dim);
    for (auto& v : values) v = rng.uniform01_f32();
    return EmbeddingVector(std::move(values));
  };

  EmbeddingStore store(dim);
  for (const auto& label : labels) store.insert(label, draw());
  if (!store.contains(kBackgroundLabel)) store.insert(std::string(kBackgroundLabel), draw());
  return store;
}

EmbeddingVector average_variants(std::span<const EmbeddingVector> variants) {
  if (variants.empty()) throw Error("average_variants needs at least one vector");
  const std::size_t dim = variants.front().dim();
  std::vector<double> sum(dim, 0.0);
  for (const auto& v : variants) {
    if (v.dim() != dim) {
      throw Error("variant dimension mismatch: " + std::to_string(v.dim()) + " vs " +
                  std::to_string(dim));
    }
    for (std::size_t i = 0; i < dim; ++i) sum[i] += v[i];
  }
  std::vector<float> mean(dim);
  const double n = static_cast<double>(variants.size());
  for (std::size_t i = 0; i < dim; ++i) mean[i] = static_cast<float>(sum[i] / n);
  return EmbeddingVector(std::move(mean));
}

void write_store(const EmbeddingStore& store, std::ostream& out) {
  out << "DHEMB 1 " << store.dim() << '\n';
  char buf[64];
  for (const auto& label : store.labels()) {
    if (label.empty() || label.find_first_of("\t\n\r") != std::string::npos) {
      throw Error("label '" + label + "' cannot be written (empty or contains tab/newline)");
    }
    out << label << '\t';
    const auto values = store.at(label).values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out << ',';
      auto res = std::to_chars(buf, buf + sizeof(buf), values[i]);
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

namespace {

[[noreturn]] void fail_line(std::size_t line_no, const std::string& what) {
  throw FormatError("embedding file line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

EmbeddingStore read_store(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("embedding file: missing header");

  std::istringstream header(line);
  std::string magic;
  int version = 0;
  long long dim = 0;
  if (!(header >> magic >> version >> dim) || magic != "DHEMB" || version != 1 || dim <= 0) {
    fail_line(1, "malformed header '" + line + "'");
  }
  std::string extra;
  if (header >> extra) fail_line(1, "malformed header '" + line + "'");

  EmbeddingStore store(static_cast<std::size_t>(dim));
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) fail_line(line_no, "expected '<label>\\t<values>'");
    std::string label = line.substr(0, tab);

    std::vector<float> values;
    values.reserve(store.dim());
    const char* p = line.data() + tab + 1;
    const char* end = line.data() + line.size();
    while (true) {
      float v = 0.0f;
      auto [ptr, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) {
        fail_line(line_no, "bad value in row '" + label + "' at component " +
                               std::to_string(values.size()));
      }
      if (!std::isfinite(v)) fail_line(line_no, "non-finite value in row '" + label + "'");
      values.push_back(v);
      p = ptr;
      if (p == end) break;
      if (*p != ',') fail_line(line_no, "expected ',' in row '" + label + "'");
      ++p;
    }
    if (values.size() != store.dim()) {
      fail_line(line_no, "row '" + label + "' has " + std::to_string(values.size()) +
                             " values, header says " + std::to_string(store.dim()));
    }
    if (store.contains(label)) fail_line(line_no, "duplicate label '" + label + "'");
    store.insert(std::move(label), EmbeddingVector(std::move(values)));
  }
  return store;
}

void save_store(const EmbeddingStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  write_store(store, out);
  if (!out) throw Error("write failed for " + path.string());
}

EmbeddingStore load_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return read_store(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace langdepth
