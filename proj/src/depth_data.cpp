#include "langdepth/depth_data.hpp"

#include <cmath>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "langdepth/binary_io.hpp"
#include "langdepth/errors.hpp"

namespace langdepth {

void BinningSpec::validate() const {
  if (!(std::isfinite(min_depth) && std::isfinite(max_depth) && min_depth < max_depth)) {
    throw Error("binning requires finite min_depth < max_depth");
  }
  if (bin_count == 0) throw Error("binning requires bin_count >= 1");
}

std::size_t BinningSpec::bin_of(double depth) const {
  if (depth >= max_depth) return bin_count - 1;
  if (depth <= min_depth) return 0;
  auto k = static_cast<std::size_t>(std::floor((depth - min_depth) / bin_width()));
  return std::min(k, bin_count - 1);
}

bool is_valid_depth(double depth) { return std::isfinite(depth) && depth > 0.0; }

const std::string& DepthFrame::label_at(std::size_t pixel) const {
  auto it = instance_table.find(instance_ids[pixel]);
  if (it == instance_table.end()) {
    throw FormatError("instance id " + std::to_string(instance_ids[pixel]) +
                      " missing from instance table");
  }
  return it->second;
}

void DepthFrame::validate() const {
  if (depth.size() != pixel_count() || instance_ids.size() != pixel_count()) {
    throw FormatError("frame rasters do not match " + std::to_string(height) + "x" +
                      std::to_string(width));
  }
  for (auto id : instance_ids) {
    if (!instance_table.contains(id)) {
      throw FormatError("instance id " + std::to_string(id) + " missing from instance table");
    }
  }
}

std::vector<std::uint64_t> bin_counts(std::span<const float> depths, const BinningSpec& spec) {
  spec.validate();
  std::vector<std::uint64_t> counts(spec.bin_count, 0);
  for (float d : depths) {
    if (is_valid_depth(d)) ++counts[spec.bin_of(d)];
  }
  return counts;
}

namespace {

DepthHistogram normalize(const std::vector<std::uint64_t>& counts) {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) throw Error("histogram needs at least one valid depth");
  DepthHistogram h;
  h.probs.resize(counts.size());
  const double inv = 1.0 / static_cast<double>(total);
  for (std::size_t k = 0; k < counts.size(); ++k) h.probs[k] = static_cast<double>(counts[k]) * inv;
  return h;
}

}  // namespace

DepthHistogram histogram(std::span<const float> depths, const BinningSpec& spec) {
  return normalize(bin_counts(depths, spec));
}

double mean_depth(std::span<const float> depths) {
  double sum = 0.0;
  std::size_t n = 0;
  for (float d : depths) {
    if (!is_valid_depth(d)) continue;
    sum += d;
    ++n;
  }
  if (n == 0) throw Error("mean_depth needs at least one valid depth");
  return sum / static_cast<double>(n);
}

double expected_depth(const DepthHistogram& hist, const BinningSpec& spec) {
  if (hist.probs.size() != spec.bin_count) {
    throw Error("histogram has " + std::to_string(hist.probs.size()) + " bins, spec has " +
                std::to_string(spec.bin_count));
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < hist.probs.size(); ++k) sum += hist.probs[k] * spec.bin_center(k);
  return sum;
}

std::vector<InstanceRecord> extract_instances(const DepthFrame& frame, const BinningSpec& spec,
                                              ExtractionReport* report) {
  frame.validate();
  spec.validate();

  struct Accumulator {
    std::vector<std::uint64_t> counts;
    double sum = 0.0;
    std::uint64_t valid = 0;
  };
  std::map<std::uint16_t, Accumulator> per_instance;
  for (std::size_t i = 0; i < frame.pixel_count(); ++i) {
    auto& acc = per_instance[frame.instance_ids[i]];
    if (acc.counts.empty()) acc.counts.assign(spec.bin_count, 0);
    const float d = frame.depth[i];
    if (!is_valid_depth(d)) continue;
    ++acc.counts[spec.bin_of(d)];
    acc.sum += d;
    ++acc.valid;
  }

  std::vector<InstanceRecord> out;
  std::size_t dropped = 0;
  for (const auto& [id, acc] : per_instance) {
    if (acc.valid == 0) {
      ++dropped;
      continue;
    }
    out.push_back({frame.instance_table.at(id), acc.valid,
                   acc.sum / static_cast<double>(acc.valid), normalize(acc.counts)});
  }
  if (report) {
    ++report->frames;
    report->dropped_instances += dropped;
  }
  return out;
}

std::vector<InstanceRecord> build_inst_dataset(std::span<const std::filesystem::path> manifest,
                                               const BinningSpec& spec, ExtractionReport* report) {
  if (manifest.empty()) throw Error("manifest lists no frames");
  std::vector<InstanceRecord> out;
  for (const auto& path : manifest) {
    DepthFrame frame = load_frame(path);
    auto records = extract_instances(frame, spec, report);
    out.insert(out.end(), std::make_move_iterator(records.begin()),
               std::make_move_iterator(records.end()));
  }
  return out;
}

std::vector<ClassRecord> aggregate_loo(std::span<const InstanceRecord> records,
                                       std::span<const std::string> vocabulary,
                                       const BinningSpec& spec, ClassPooling pooling,
                                       AggregationReport* report) {
  if (vocabulary.empty()) throw Error("aggregate_loo needs a non-empty vocabulary");
  spec.validate();

  std::unordered_map<std::string, std::vector<const InstanceRecord*>> by_label;
  for (const auto& r : records) by_label[r.label].push_back(&r);

  std::vector<ClassRecord> out;
  std::unordered_set<std::string> emitted;
  for (const auto& label : vocabulary) {
    if (!emitted.insert(label).second) continue;
    auto it = by_label.find(label);
    if (it == by_label.end()) {
      if (report) report->missing_labels.push_back(label);
      continue;
    }
    const auto& members = it->second;

    bool with_histograms = true;
    for (const auto* m : members) {
      if (m->histogram.empty()) {
        with_histograms = false;
      } else if (m->histogram.probs.size() != spec.bin_count) {
        throw Error("instance of '" + label + "' has a " +
                    std::to_string(m->histogram.probs.size()) + "-bin histogram, expected " +
                    std::to_string(spec.bin_count));
      }
    }

    ClassRecord cls;
    cls.label = label;
    double weight_total = 0.0;
    double depth_sum = 0.0;
    std::vector<double> pooled(with_histograms ? spec.bin_count : 0, 0.0);
    for (const auto* m : members) {
      cls.pixel_count += m->pixel_count;
      const double w = pooling == ClassPooling::PixelWeighted
                           ? static_cast<double>(m->pixel_count)
                           : 1.0;
      weight_total += w;
      depth_sum += w * m->mean_depth;
      for (std::size_t k = 0; k < pooled.size(); ++k) pooled[k] += w * m->histogram.probs[k];
    }
    cls.mean_depth = depth_sum / weight_total;
    for (auto& p : pooled) p /= weight_total;
    cls.histogram.probs = std::move(pooled);
    out.push_back(std::move(cls));
  }
  return out;
}

std::string encode_frame(const DepthFrame& frame) {
  frame.validate();
  io::ByteWriter w;
  w.magic("DHF1");
  w.u32(frame.height);
  w.u32(frame.width);
  w.u32(static_cast<std::uint32_t>(frame.instance_table.size()));
  for (const auto& [id, label] : frame.instance_table) {
    if (label.size() > 0xFFFF) throw Error("label too long for DHF1: " + label.substr(0, 32));
    w.u16(id);
    w.u16(static_cast<std::uint16_t>(label.size()));
    w.bytes(label);
  }
  for (float d : frame.depth) w.f32(d);
  for (auto id : frame.instance_ids) w.u16(id);
  return w.data();
}

DepthFrame decode_frame(std::string_view bytes, const std::string& what) {
  io::ByteReader r(bytes, what);
  r.expect_magic("DHF1");
  DepthFrame frame;
  frame.height = r.u32();
  frame.width = r.u32();
  const std::uint32_t table_len = r.u32();
  for (std::uint32_t i = 0; i < table_len; ++i) {
    const auto id = r.u16();
    const auto len = r.u16();
    std::string label(r.bytes(len));
    if (!frame.instance_table.emplace(id, std::move(label)).second) {
      throw FormatError(what + ": duplicate instance id " + std::to_string(id) + " in table");
    }
  }
  const std::size_t n = frame.pixel_count();
  r.require(n * 6);
  frame.depth.resize(n);
  for (auto& d : frame.depth) d = r.f32();
  frame.instance_ids.resize(n);
  for (auto& id : frame.instance_ids) id = r.u16();
  r.expect_end();
  try {
    frame.validate();
  } catch (const FormatError& e) {
    throw FormatError(what + ": " + e.what());
  }
  return frame;
}

void save_frame(const DepthFrame& frame, const std::filesystem::path& path) {
  io::write_file(path, encode_frame(frame));
}

DepthFrame load_frame(const std::filesystem::path& path) {
  return decode_frame(io::read_file(path), path.string());
}

void save_records(std::span<const DepthRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["label"] = r.label;
    j["pixel_count"] = r.pixel_count;
    j["mean_depth"] = r.mean_depth;
    if (!r.histogram.empty()) j["histogram"] = r.histogram.probs;
    out << j.dump() << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

std::vector<DepthRecord> load_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<DepthRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + " line " + std::to_string(line_no);
    try {
      auto j = nlohmann::json::parse(line);
      DepthRecord r;
      r.label = j.at("label").get<std::string>();
      r.pixel_count = j.at("pixel_count").get<std::uint64_t>();
      r.mean_depth = j.at("mean_depth").get<double>();
      if (j.contains("histogram")) r.histogram.probs = j["histogram"].get<std::vector<double>>();
      if (r.pixel_count == 0 || !is_valid_depth(r.mean_depth)) {
        throw FormatError(where + ": pixel_count must be >= 1 and mean_depth positive");
      }
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
  }
  return out;
}

std::vector<std::filesystem::path> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  std::vector<std::filesystem::path> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::filesystem::path p(line);
    if (p.is_relative()) p = path.parent_path() / p;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<std::string> load_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open vocabulary " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

}  // namespace langdepth
