#include <gtest/gtest.h>

#include <sstream>

#include "ovenet/ablation.hpp"
#include "ovenet/trainer.hpp"

using namespace ovenet;

namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.epochs = 1;
  c.batch_size = 2;
  c.model.base_width = 4;
  c.model.trunk_blocks = 2;
  c.model.branch_at = 2;
  c.model.head_blocks = 1;
  c.model.offset_head_blocks = 1;
  c.synth.height = c.synth.width = 32;
  c.augment.crop_height = c.augment.crop_width = 32;
  c.synth_train_count = 4;
  c.synth_val_count = 2;
  return c;
}

}  // namespace

TEST(Grid, ParseAndExpand) {
  const auto axes = parse_grid("# sweep\ntau=0.2, 0.5,1.0\n\nohem=on,off\n");
  ASSERT_EQ(axes.size(), 2u);
  EXPECT_EQ(axes[0].key, "tau");
  EXPECT_EQ(axes[0].values, (std::vector<std::string>{"0.2", "0.5", "1.0"}));
  const auto variants = expand_grid(axes);
  ASSERT_EQ(variants.size(), 6u);
  EXPECT_EQ(variants[0], (Settings{{"tau", "0.2"}, {"ohem", "on"}}));
  EXPECT_EQ(variants[1], (Settings{{"tau", "0.2"}, {"ohem", "off"}}));
  EXPECT_EQ(variants[5], (Settings{{"tau", "1.0"}, {"ohem", "off"}}));
  EXPECT_TRUE(expand_grid({}).empty());
  EXPECT_THROW(parse_grid("tau\n"), ConfigError);
  EXPECT_THROW(parse_grid("tau=0.2,,0.5\n"), ConfigError);
}

TEST(Ablation, EmptyGridGivesHeaderOnlyReport) {
  const auto cfg = tiny_config();
  auto [train, val] = load_config_data(cfg);
  const auto report = run_ablation_grid(cfg, {}, train, val);
  EXPECT_TRUE(report.rows.empty());
  std::ostringstream out;
  write_ablation_table(out, report);
  const auto text = out.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
  EXPECT_NE(text.find("tau"), std::string::npos);
}

TEST(Ablation, TauRowsFrozenCountsAndFailures) {
  const auto cfg = tiny_config();
  auto [train, val] = load_config_data(cfg);
  const auto grid = parse_grid("tau=0.2,0.5,1.0\n");
  const auto report = run_ablation_grid(cfg, grid, train, val);
  ASSERT_EQ(report.rows.size(), 3u);
  EXPECT_EQ(report.rows[0].tau, 0.2);
  EXPECT_EQ(report.rows[2].tau, 1.0);
  for (const auto& r : report.rows) EXPECT_TRUE(r.error.empty()) << r.error;

  const auto frozen = run_ablation_grid(cfg, parse_grid("frozen=off,on\ntau=0.5,-1\n"), train, val);
  ASSERT_EQ(frozen.rows.size(), 4u);
  EXPECT_TRUE(frozen.rows[0].error.empty());
  EXPECT_FALSE(frozen.rows[1].error.empty());  // tau=-1 is invalid, grid goes on
  EXPECT_TRUE(frozen.rows[2].error.empty());
  EXPECT_TRUE(frozen.rows[2].frozen);
  EXPECT_TRUE(frozen.rows[2].frozen_verified);
  EXPECT_LT(frozen.rows[2].trainable_parameters, frozen.rows[0].trainable_parameters);
  EXPECT_EQ(frozen.rows[2].trainable_parameters, expected_offset_head_parameter_count(cfg.model));
  std::ostringstream table, tsv;
  write_ablation_table(table, frozen);
  write_ablation_tsv(tsv, frozen);
  EXPECT_NE(table.str().find("error"), std::string::npos);
  EXPECT_NE(table.str().find("frozen check ok"), std::string::npos);
  const auto tsv_text = tsv.str();
  EXPECT_EQ(std::count(tsv_text.begin(), tsv_text.end(), '\n'), 5);
}
