#pragma once

#include <vector>

namespace adamatch {

// Patch-level correspondence between cell i of image A and cell j of image B.
struct PatchMatch {
  int i = 0;
  int j = 0;
  float confidence = 1.0f;

  bool operator==(const PatchMatch& other) const = default;
};

// Direction k = 0 means every A patch commits to at most one B patch
// (many-to-one from A onto B); k = 1 is the mirror image.
struct MatchSet {
  std::vector<PatchMatch> pairs;
  int direction = 0;

  size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
  bool operator==(const MatchSet& other) const = default;
};

}  // namespace adamatch
