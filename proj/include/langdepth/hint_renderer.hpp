#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "langdepth/depth_data.hpp"
#include "langdepth/embedding_store.hpp"
#include "langdepth/l2d_model.hpp"
#include "langdepth/lookup_table.hpp"

namespace langdepth {

/// Per-pixel hint raster, row-major with channels innermost.
/// One channel carries mean depth in meters; 50 carry penultimate features.
struct HintPlane {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t channels = 0;
  std::vector<float> data;

  float at(std::size_t row, std::size_t col, std::size_t ch = 0) const {
    return data[(row * width + col) * channels + ch];
  }
  void validate() const;

  friend bool operator==(const HintPlane&, const HintPlane&) = default;
};

struct RenderReport {
  std::vector<std::string> fallback_labels;  // frame labels that fell back to "background"
  std::size_t evaluations = 0;               // distinct labels evaluated
};

HintPlane render_scalar(const DepthFrame& frame, const LookupTable& table,
                        RenderReport* report = nullptr);
HintPlane render_scalar(const DepthFrame& frame, const MlpParameters& params,
                        const EmbeddingStore& store, RenderReport* report = nullptr);
HintPlane render_features(const DepthFrame& frame, const MlpParameters& params,
                          const EmbeddingStore& store, RenderReport* report = nullptr);

// DHP1: magic, u32 H, u32 W, u32 C, then H*W*C f32.
std::string encode_plane(const HintPlane& plane);
HintPlane decode_plane(std::string_view bytes, const std::string& what = "plane");
void save_plane(const HintPlane& plane, const std::filesystem::path& path);
HintPlane load_plane(const std::filesystem::path& path);

}  // namespace langdepth
