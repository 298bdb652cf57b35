#include <filesystem>

#include <gtest/gtest.h>

#include "adamatch/errors.hpp"
#include "adamatch/io.hpp"

using namespace adamatch;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("adamatch_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Container, RoundTrip) {
  const TensorMap m = {{"a", Tensor({2, 3}, {1, 2, 3, 4, 5, 6})}, {"b.c", Tensor({1}, {-0.5f})}};
  EXPECT_EQ(decode_tensors(encode_tensors(m)), m);
}

TEST(Container, LayoutIsLittleEndian) {
  const std::string bytes = encode_tensors({{"x", Tensor({1}, {1.0f})}});
  ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 2 + 1 + 1 + 8 + 4);
  EXPECT_EQ(bytes.substr(0, 4), "ADMT");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 1);
  EXPECT_EQ(bytes[12], 1);
  EXPECT_EQ(bytes[14], 'x');
  EXPECT_EQ(bytes[15], 1);
  EXPECT_EQ(bytes[16], 1);
  // 1.0f = 0x3f800000
  EXPECT_EQ(static_cast<unsigned char>(bytes[27]), 0x3f);
  EXPECT_EQ(static_cast<unsigned char>(bytes[26]), 0x80);
}

TEST(Container, RejectsMalformed) {
  std::string bytes = encode_tensors({{"x", Tensor({2}, {1.0f, 2.0f})}});
  EXPECT_THROW(decode_tensors("XXXX"), FormatError);
  EXPECT_THROW(decode_tensors(bytes.substr(0, bytes.size() - 1)), FormatError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'B';
  EXPECT_THROW(decode_tensors(bad_magic), FormatError);
  EXPECT_THROW(decode_tensors(bytes + "z"), FormatError);
}

TEST(Container, FileRoundTripAndMissingFile) {
  const fs::path dir = scratch("file");
  const TensorMap m = {{"t", Tensor({2, 2}, {1, 2, 3, 4})}};
  write_tensors(dir / "t.bin", m);
  EXPECT_EQ(read_tensors(dir / "t.bin"), m);
  EXPECT_FALSE(fs::exists(dir / "t.bin.tmp"));
  EXPECT_THROW(read_tensors(dir / "missing.bin"), IoError);
}

TEST(Weights, RoundTrip) {
  ModelDims d;
  d.d_model = 16;
  d.fine_dim = 8;
  d.heads = 2;
  d.attention = AttentionKind::kSoftmax;
  const ModelWeights w = init_weights(3, d);
  EXPECT_EQ(weights_from_tensors(weights_to_tensors(w)), w);
}

TEST(Weights, RejectsWrongShape) {
  ModelDims d;
  d.d_model = 16;
  d.fine_dim = 8;
  d.heads = 2;
  TensorMap t = weights_to_tensors(init_weights(3, d));
  t["cfi.self1.wq"] = Tensor({16, 15});
  EXPECT_THROW(weights_from_tensors(t), FormatError);
  t.erase("cfi.self1.wq");
  EXPECT_THROW(weights_from_tensors(t), FormatError);
}

TEST(Grid, RoundTrip) {
  const FeatureGrid g(Tensor({2, 2, 3}, std::vector<float>(12, 0.25f)), 2);
  EXPECT_EQ(grid_from_tensors(grid_to_tensors(g)), g);
  EXPECT_THROW(grid_from_tensors({}), FormatError);
}

TEST(Pair, PlanarRoundTrip) {
  const fs::path dir = scratch("planar");
  const ScenePair p = make_planar_pair(4, 2.2, 5.0, 0.05);
  save_pair(dir / "p", p);
  const ScenePair q = load_pair(dir / "p");
  EXPECT_EQ(q.descA_c, p.descA_c);
  EXPECT_EQ(q.descB_f, p.descB_f);
  EXPECT_EQ(q.gt, p.gt);
  EXPECT_EQ(q.meta.seed, p.meta.seed);
  EXPECT_EQ(q.meta.bucket, p.meta.bucket);
  EXPECT_DOUBLE_EQ(q.meta.scale_ratio, p.meta.scale_ratio);
  EXPECT_LT((q.geometry.H.matrix() - p.geometry.H.matrix()).norm(), 1e-12);
}

TEST(Pair, StereoRoundTrip) {
  const fs::path dir = scratch("stereo");
  StereoParams params;
  params.profile = DepthProfile::kBumps;
  params.pose.yaw_deg = 3;
  params.pose.baseline_x = 0.1;
  params.scale_bucket = ScaleBucket::k2to3;
  const ScenePair p = make_3d_pair(6, params);
  save_pair(dir / "s", p);
  const ScenePair q = load_pair(dir / "s");
  EXPECT_EQ(q.gt, p.gt);
  EXPECT_EQ(q.geometry.kind, PairKind::kStereo);
  EXPECT_EQ(q.geometry.frameB.depth, p.geometry.frameB.depth);
  EXPECT_LT((q.geometry.frameB.R - p.geometry.frameB.R).norm(), 1e-12);
  EXPECT_EQ(q.meta.depth_profile, "bumps");
  // Labels regenerated from the loaded geometry agree with the stored ones.
  EXPECT_EQ(generate_labels(q.geometry, 8), p.gt);
}

TEST(Pair, MissingFileIsAnError) {
  const fs::path dir = scratch("broken");
  save_pair(dir / "p", make_planar_pair(1, 1.0, 0.0, 0.0));
  fs::remove(dir / "p" / "descB_f.bin");
  EXPECT_ANY_THROW(load_pair(dir / "p"));
}

TEST(Pair, ListSkipsNonPairs) {
  const fs::path dir = scratch("list");
  save_pair(dir / "pair_0001", make_planar_pair(1, 1.0, 0.0, 0.0));
  save_pair(dir / "pair_0000", make_planar_pair(2, 1.0, 0.0, 0.0));
  fs::create_directories(dir / "junk");
  const auto pairs = list_pairs(dir);
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0].filename(), "pair_0000");
}

TEST(Csv, RoundTrip) {
  RefinedMatch m;
  m.pA = {1.25, 2.5};
  m.pB = {3.125, 4.0};
  m.confidence = 0.75f;
  m.variance = 0.5;
  const std::string csv = matches_to_csv({m});
  EXPECT_EQ(csv, "xA,yA,xB,yB,confidence,variance\n1.250000,2.500000,3.125000,4.000000,0.750000,0.500000\n");
  const auto back = matches_from_csv(csv);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].pA, m.pA);
  EXPECT_EQ(back[0].variance, 0.5);
}

TEST(Csv, HeaderOnlyAndErrors) {
  EXPECT_TRUE(matches_from_csv(matches_to_csv({})).empty());
  EXPECT_EQ(matches_from_csv("xA,yA,xB,yB,confidence\n1,2,3,4,0.5\n").size(), 1u);
  EXPECT_THROW(matches_from_csv("xA,yA,xB,yB,confidence,variance\n1,2,x,4,0.5,1\n"), FormatError);
  EXPECT_THROW(matches_from_csv("xA,yA,xB,yB,confidence,variance\n1,2,3\n"), FormatError);
}
