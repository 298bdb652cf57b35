#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "adamatch/cfi.hpp"
#include "adamatch/features.hpp"
#include "adamatch/refine.hpp"
#include "adamatch/synthscene.hpp"

namespace adamatch {

namespace fs = std::filesystem;

using TensorMap = std::map<std::string, Tensor>;

// Container layout: "ADMT", u32 version, u32 count, then per entry
// u16 name length, name bytes, u8 rank, u64 dims[rank], float32 data.
// All integers and floats little-endian.
constexpr uint32_t kContainerVersion = 1;

std::string encode_tensors(const TensorMap& tensors);
// Throws FormatError on malformed input.
TensorMap decode_tensors(std::string_view bytes);

std::string read_file(const fs::path& path);
// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const fs::path& path, std::string_view contents);

void write_tensors(const fs::path& path, const TensorMap& tensors);
TensorMap read_tensors(const fs::path& path);

// Weights carry their dims in a "meta.dims" entry.
TensorMap weights_to_tensors(const ModelWeights& weights);
ModelWeights weights_from_tensors(const TensorMap& tensors);

// Feature files hold "features" (h x w x c) and "stride" (1).
TensorMap grid_to_tensors(const FeatureGrid& grid);
FeatureGrid grid_from_tensors(const TensorMap& tensors);

// Pair directory: meta.json, labels.json, desc{A,B}_{c,f}.bin, and
// depth{A,B}.bin for stereo pairs.
void save_pair(const fs::path& dir, const ScenePair& pair);
ScenePair load_pair(const fs::path& dir);

std::string labels_to_json(const GroundTruthLabels& labels);

// Sorted subdirectories holding a meta.json.
std::vector<fs::path> list_pairs(const fs::path& dataset);

// xA,yA,xB,yB,confidence,variance rows.
std::string matches_to_csv(const std::vector<RefinedMatch>& matches);
struct CsvMatch {
  Vec2 pA, pB;
  double confidence = 0.0;
  double variance = 0.0;
};
std::vector<CsvMatch> matches_from_csv(std::string_view text);

}  // namespace adamatch
