#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "ainx/profiler.hpp"
#include "test_util.hpp"

namespace ainx::profiler {
namespace {

using model::Model;
using model::ModelConfig;

const LayerRow& row(const ProfileReport& r, const std::string& name) {
  for (const auto& x : r.rows) {
    if (x.name == name) return x;
  }
  throw std::runtime_error("no row " + name);
}

std::uint64_t conv_macs(const ProfileReport& r) {
  std::uint64_t n = 0;
  for (const auto& x : r.rows) n += x.type == "conv" ? x.macs : 0;
  return n;
}

TEST(ProfilerTest, HeadRowIsClosedForm) {
  Model m(ModelConfig{});
  const auto r = profile(m, {1, 1, 416, 128});
  EXPECT_EQ(row(r, "head").params, 512u * 44u + 44u);
  EXPECT_EQ(row(r, "head").params, 22572u);
  EXPECT_EQ(row(r, "head").macs, 512u * 44u);
}

TEST(ProfilerTest, HeadSwapDelta) {
  std::mt19937_64 rng(1);
  Model m(ModelConfig{});
  const auto small = count_params(m);
  m.replace_head(309, rng);
  EXPECT_EQ(count_params(m) - small, 135945u);
}

TEST(ProfilerTest, DefaultModelWithinTableBudget) {
  Model m(ModelConfig{});
  const double params = double(count_params(m));
  EXPECT_NEAR(params, 11.69e6, 0.15 * 11.69e6);
  const double macs = double(count_macs(m, {1, 1, 416, 128}));
  EXPECT_NEAR(macs, 2.13e9, 0.25 * 2.13e9);
}

TEST(ProfilerTest, KnownLayerMacs) {
  Model m(ModelConfig{});
  const auto r = profile(m, {1, 1, 416, 128});
  EXPECT_EQ(row(r, "stem.conv").macs, 29818880u);
  EXPECT_EQ(row(r, "stem.conv").out_shape, (Shape{1, 64, 208, 64}));
  EXPECT_EQ(row(r, "stem.pool").out_shape, (Shape{1, 64, 104, 32}));
  EXPECT_EQ(row(r, "stage4.block1.expand").macs, 4u * 512u * 512u * 52u);
  EXPECT_EQ(row(r, "stage4.block1.expand").macs, 54525952u);
  EXPECT_EQ(row(r, "stage4.block1.expand").out_shape, (Shape{1, 2048, 13, 4}));
  // Depthwise: one input channel per group.
  EXPECT_EQ(row(r, "stage1.block1.branch21.dw_1xk").macs, 64u * 21u * 104u * 32u);
  EXPECT_EQ(row(r, "stage1.block1.branch21.dw_1xk").params, 64u * 21u);
}

TEST(ProfilerTest, TotalsAreColumnSums) {
  Model m(ModelConfig{});
  const auto r = profile(m, {2, 1, 416, 128});
  std::uint64_t p = 0, macs = 0, e = 0;
  for (const auto& x : r.rows) {
    p += x.params;
    macs += x.macs;
    e += x.elementwise;
  }
  EXPECT_EQ(r.total_params, p);
  EXPECT_EQ(r.total_macs, macs);
  EXPECT_EQ(r.total_elementwise, e);
  EXPECT_EQ(r.total_flops, 2 * macs);
  EXPECT_EQ(r.total_params, count_params(m));
  std::uint64_t named = 0;
  for (const auto& t : m.named_parameters()) named += t.tensor.numel();
  EXPECT_EQ(r.total_params, named);

  const auto with_bn = profile(m, {1, 1, 416, 128}, {true, true});
  EXPECT_EQ(with_bn.total_params, count_params(m, true));
  EXPECT_GT(with_bn.total_params, r.total_params);
}

TEST(ProfilerTest, CountIsArchitectureOnly) {
  std::mt19937_64 rng(2);
  ModelConfig c;
  c.stage_channels = {8, 8, 16, 16};
  c.stage_depths = {1, 1, 1, 1};
  c.num_classes = 3;
  Model m(c);
  m.init_parameters(rng);
  const auto before = count_params(m);
  auto logits = m.forward(testing::random_tensor({2, 1, 32, 32}, rng), model::Mode::train);
  const std::vector<std::int32_t> labels{0, 2};
  backward(softmax_cross_entropy(logits, labels));
  SgdMomentum opt;
  auto params = m.trainable_parameters();
  opt.step(params, 0.1);
  EXPECT_EQ(count_params(m), before);
}

TEST(ProfilerTest, MacsScaleWithBatchAndArea) {
  Model m(ModelConfig{});
  const auto one = count_macs(m, {1, 1, 416, 128});
  EXPECT_EQ(count_macs(m, {3, 1, 416, 128}), 3 * one);
  for (const auto& [h, w] : std::vector<std::pair<std::size_t, std::size_t>>{{64, 64}, {128, 64}, {256, 128}}) {
    const auto small = conv_macs(profile(m, {1, 1, h, w}));
    const auto big = conv_macs(profile(m, {1, 1, 2 * h, 2 * w}));
    EXPECT_EQ(big, 4 * small) << h << "x" << w;
  }
}

TEST(ProfilerTest, InvalidShapeRejected) {
  Model m(ModelConfig{});
  EXPECT_THROW(count_macs(m, {1, 2, 416, 128}), std::invalid_argument);
  EXPECT_THROW(count_macs(m, {1, 1, 416}), std::invalid_argument);
  EXPECT_THROW(count_macs(m, {1, 1, 0, 128}), std::invalid_argument);
}

TEST(EmitTableTest, EmptyReportHasHeaderAndTotals) {
  ProfileReport r;
  std::ostringstream csv;
  emit_table(r, TableFormat::csv, csv);
  EXPECT_EQ(csv.str(), "name,type,out_shape,params,macs,elementwise\r\ntotal,macs_as_flops=true;count_bn=false,,0,0,0\r\n");
  std::ostringstream text;
  emit_table(r, TableFormat::text, text);
  EXPECT_NE(text.str().find("total"), std::string::npos);
  EXPECT_NE(text.str().find("conventions: macs_as_flops=true"), std::string::npos);
}

TEST(EmitTableTest, CsvQuoting) {
  EXPECT_EQ(csv_escape("plain"), "plain");
  EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_escape("two\nlines"), "\"two\nlines\"");
}

TEST(EmitTableTest, DefaultModelMatchesGolden) {
  Model m(ModelConfig{});
  std::ostringstream csv;
  emit_table(profile(m, {1, 1, 416, 128}), TableFormat::csv, csv);
  std::ifstream in(std::string(AINX_GOLDEN_DIR) + "/profile_default_416x128.csv", std::ios::binary);
  ASSERT_TRUE(in) << "missing golden file";
  std::stringstream golden;
  golden << in.rdbuf();
  EXPECT_EQ(csv.str(), golden.str());
}

}  // namespace
}  // namespace ainx::profiler
