#include "langdepth/hint_renderer.hpp"

#include <cmath>
#include <functional>
#include <map>

#include "langdepth/binary_io.hpp"
#include "langdepth/errors.hpp"
#include "langdepth/harness.hpp"

namespace langdepth {

void HintPlane::validate() const {
  if (channels != 1 && channels != kFeatureDim) {
    throw Error("hint plane must have 1 or 50 channels, got " + std::to_string(channels));
  }
  if (data.size() != std::size_t{height} * width * channels) {
    throw Error("hint plane data does not match its shape");
  }
  for (float v : data) {
    if (!std::isfinite(v)) throw Error("hint plane has a non-finite value");
    if (channels == 1 && !(v > 0.0f)) throw Error("scalar hint plane has a non-positive depth");
  }
}

namespace {

using LabelValues = std::function<std::vector<float>(const std::string& label, bool& fallback)>;

// Evaluates each distinct label once, then broadcasts to its pixels.
HintPlane broadcast(const DepthFrame& frame, std::uint32_t channels, const LabelValues& values,
                    RenderReport* report) {
  frame.validate();
  std::map<std::uint16_t, std::vector<float>> per_instance;
  std::map<std::string, std::vector<float>> per_label;
  RenderReport local;
  for (const auto& [id, label] : frame.instance_table) {
    auto it = per_label.find(label);
    if (it == per_label.end()) {
      bool fallback = false;
      auto v = values(label, fallback);
      if (v.size() != channels) throw Error("hint source produced the wrong channel count");
      if (fallback) local.fallback_labels.push_back(label);
      ++local.evaluations;
      it = per_label.emplace(label, std::move(v)).first;
    }
    per_instance.emplace(id, it->second);
  }

  HintPlane plane{frame.height, frame.width, channels, {}};
  plane.data.resize(frame.pixel_count() * channels);
  for (std::size_t p = 0; p < frame.pixel_count(); ++p) {
    const auto& v = per_instance.at(frame.instance_ids[p]);
    std::copy(v.begin(), v.end(), plane.data.begin() + static_cast<std::ptrdiff_t>(p * channels));
  }
  plane.validate();
  if (report) *report = std::move(local);
  return plane;
}

std::vector<float> to_float(const std::vector<double>& v) { return {v.begin(), v.end()}; }

}  // namespace

HintPlane render_scalar(const DepthFrame& frame, const LookupTable& table, RenderReport* report) {
  return broadcast(
      frame, 1,
      [&](const std::string& label, bool& fallback) {
        auto hit = table.lookup(label);
        fallback = hit.fallback;
        return std::vector<float>{static_cast<float>(hit.entry.mean_depth)};
      },
      report);
}

HintPlane render_scalar(const DepthFrame& frame, const MlpParameters& params,
                        const EmbeddingStore& store, RenderReport* report) {
  if (params.mode != L2DMode::LogMean) {
    throw Error("scalar hints need a log-mean model (use render_features for classification)");
  }
  return broadcast(
      frame, 1,
      [&](const std::string& label, bool& fallback) {
        auto hit = store.lookup(label);
        fallback = hit.fallback;
        return std::vector<float>{static_cast<float>(predict_entry(params, hit.vector, label).mean_depth)};
      },
      report);
}

HintPlane render_features(const DepthFrame& frame, const MlpParameters& params,
                          const EmbeddingStore& store, RenderReport* report) {
  if (params.mode != L2DMode::Classification) {
    throw Error("feature hints need a classification model");
  }
  return broadcast(
      frame, static_cast<std::uint32_t>(kFeatureDim),
      [&](const std::string& label, bool& fallback) {
        auto hit = store.lookup(label);
        fallback = hit.fallback;
        return to_float(forward_classification(params, hit.vector.to_double()).features);
      },
      report);
}

std::string encode_plane(const HintPlane& plane) {
  plane.validate();
  io::ByteWriter w;
  w.magic("DHP1");
  w.u32(plane.height);
  w.u32(plane.width);
  w.u32(plane.channels);
  for (float v : plane.data) w.f32(v);
  return w.data();
}

HintPlane decode_plane(std::string_view bytes, const std::string& what) {
  io::ByteReader r(bytes, what);
  r.expect_magic("DHP1");
  HintPlane plane;
  plane.height = r.u32();
  plane.width = r.u32();
  plane.channels = r.u32();
  const std::size_t n = std::size_t{plane.height} * plane.width * plane.channels;
  if (plane.channels != 0 && n / plane.channels != std::size_t{plane.height} * plane.width) {
    throw FormatError(what + ": shape overflows");
  }
  if (n > r.remaining() / 4) throw FormatError(what + ": truncated payload");
  plane.data.resize(n);
  for (auto& v : plane.data) v = r.f32();
  r.expect_end();
  try {
    plane.validate();
  } catch (const Error& e) {
    throw FormatError(what + ": " + e.what());
  }
  return plane;
}

void save_plane(const HintPlane& plane, const std::filesystem::path& path) {
  io::write_file(path, encode_plane(plane));
}

HintPlane load_plane(const std::filesystem::path& path) {
  return decode_plane(io::read_file(path), path.string());
}

}  // namespace langdepth
