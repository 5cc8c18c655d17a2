// Copyright 2026 The adaug Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "adaug/report.hpp"
#include "adaug/run_config.hpp"

namespace {

using adaug::ConvergenceRecord;
using adaug::RunConfig;

int count_substr(const std::string& haystack, const std::string& needle) {
  int count = 0;
  std::size_t pos = 0;
  while ((pos = haystack.find(needle, pos)) != std::string::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

// ---------------------------------------------------------------------------
// RunConfig
// ---------------------------------------------------------------------------

TEST(RunConfigIni, SerializeParseRoundTrip) {
  RunConfig c;
  c.data.n = 32;
  c.data.train_count = 12;
  c.data.lure_strength = 0.55f;
  c.base_channels = 4;
  c.ada.z = 8;
  c.ada.cycles = 5;
  c.ada.method = adaug::InterpretMethod::kGuidedBackprop;
  c.aug.rotation_deg = 7.25f;
  c.batch_size = 4;
  c.lr = 0.0005f;
  c.seed = 123456789012345ull;
  c.out_dir = "runs/exp1";
  c.threads = 3;
  const std::string text = adaug::serialize_config(c);
  const RunConfig back = adaug::parse_config(text);
  EXPECT_EQ(back.data.n, 32);
  EXPECT_EQ(back.data.train_count, 12);
  EXPECT_FLOAT_EQ(back.data.lure_strength, 0.55f);
  EXPECT_EQ(back.base_channels, 4);
  EXPECT_EQ(back.ada.z, 8);
  EXPECT_EQ(back.ada.cycles, 5);
  EXPECT_EQ(back.ada.method, adaug::InterpretMethod::kGuidedBackprop);
  EXPECT_FLOAT_EQ(back.aug.rotation_deg, 7.25f);
  EXPECT_EQ(back.batch_size, 4);
  EXPECT_FLOAT_EQ(back.lr, 0.0005f);
  EXPECT_EQ(back.seed, 123456789012345ull);
  EXPECT_EQ(back.out_dir, "runs/exp1");
  EXPECT_EQ(back.threads, 3);
  // Serializing the parsed copy is byte-stable.
  EXPECT_EQ(adaug::serialize_config(back), text);
}

TEST(RunConfigIni, CommentsAndWhitespaceTolerated) {
  const std::string text =
      "[data]\n"
      "# edge length\n"
      "n = 16   \n"
      "  train=2\n"
      "val = 1 ; inline comment\n";
  const RunConfig c = adaug::parse_config(text);
  EXPECT_EQ(c.data.n, 16);
  EXPECT_EQ(c.data.train_count, 2);
  EXPECT_EQ(c.data.val_count, 1);
}

TEST(RunConfigIni, UnknownKeysAndBadValuesRejected) {
  EXPECT_THROW(adaug::parse_config("[data]\nnn = 64\n"), std::invalid_argument);
  EXPECT_THROW(adaug::parse_config("[nope]\nx = 1\n"), std::invalid_argument);
  EXPECT_THROW(adaug::parse_config("[data]\nn = eight\n"), std::invalid_argument);
  EXPECT_THROW(adaug::parse_config("n = 8\n"), std::invalid_argument);
  EXPECT_THROW(adaug::parse_config("[ada]\nmethod = sobel\n"), std::invalid_argument);
}

TEST(RunConfigIni, DefaultsValidate) {
  RunConfig c;
  EXPECT_NO_THROW(c.validate());
  c.ada.z = 200;  // larger than n = 64
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

ConvergenceRecord sample_record() {
  ConvergenceRecord r;
  r.epoch = 7;
  r.phase = "ada";
  r.cycle = 2;
  r.loss = 0.125;
  r.val.dsc = 91.5;
  r.val.hsd = 2.25;
  r.val.tpr = 88.0;
  r.val.tnr = 99.5;
  r.val.ppv = 90.0;
  return r;
}

TEST(ConvergenceCsv, RowFormatAndRoundTrip) {
  const ConvergenceRecord r = sample_record();
  EXPECT_EQ(adaug::convergence_csv_row(r),
            "7,ada,2,0.125000,91.500000,2.250000,88.000000,99.500000,90.000000");
  const std::string csv = adaug::convergence_csv({r, r});
  const std::vector<ConvergenceRecord> back = adaug::parse_convergence_csv(csv);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].epoch, 7);
  EXPECT_EQ(back[1].phase, "ada");
  EXPECT_DOUBLE_EQ(back[1].val.dsc, 91.5);
  EXPECT_THROW(adaug::parse_convergence_csv("epoch,notes\n1,x\n"), std::runtime_error);
}

TEST(EvalCsv, AppendCreatesHeaderOnceAndAddsRows) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "adaug_evalcsv";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string path = (dir / "metrics.csv").string();
  adaug::EvalCsvRow row;
  row.dataset = "val";
  row.model = "baseline";
  row.method = "-";
  row.report.dsc = 87.5;
  row.report.hsd = 1.5;
  row.report.tpr = 90.0;
  row.report.tnr = 99.0;
  row.report.ppv = 85.0;
  row.report.hsd_undefined_count = 2;
  adaug::append_eval_csv(path, row);
  row.dataset = "val-occluded-z16";
  adaug::append_eval_csv(path, row);
  const std::string text = adaug::detail::read_file(path);
  EXPECT_EQ(count_substr(text, "dataset,model,method"), 1);
  EXPECT_EQ(count_substr(text, "\n"), 3);  // header + 2 rows
  EXPECT_NE(text.find("val,baseline,-,87.500000,1.500000,90.000000,99.000000,"
                      "85.000000,2"),
            std::string::npos);
  EXPECT_NE(text.find("val-occluded-z16,baseline,-"), std::string::npos);
}

// ---------------------------------------------------------------------------
// SVG
// ---------------------------------------------------------------------------

std::vector<adaug::PlotSeries> five_series() {
  std::vector<adaug::PlotSeries> all;
  for (int s = 0; s < 5; ++s) {
    adaug::PlotSeries ps;
    ps.label = "m" + std::to_string(s);
    for (int e = 1; e <= 10; ++e)
      ps.points.push_back({e, 50.0 + 4.0 * s + e});
    all.push_back(ps);
  }
  return all;
}

TEST(ConvergenceSvg, OnePolylinePerSeriesAndDeterministic) {
  const std::string svg = adaug::svg_convergence_plot(five_series());
  EXPECT_EQ(count_substr(svg, "class=\"series\""), 5);
  EXPECT_EQ(count_substr(svg, "class=\"zoom\""), 0);
  EXPECT_NE(svg.find("<svg xmlns"), std::string::npos);
  EXPECT_NE(svg.find("m4"), std::string::npos);
  EXPECT_EQ(svg, adaug::svg_convergence_plot(five_series()));
}

TEST(ConvergenceSvg, RowOrderDoesNotMatter) {
  std::vector<adaug::PlotSeries> shuffled = five_series();
  std::reverse(shuffled[2].points.begin(), shuffled[2].points.end());
  std::swap(shuffled[2].points[0], shuffled[2].points[3]);
  EXPECT_EQ(adaug::svg_convergence_plot(shuffled),
            adaug::svg_convergence_plot(five_series()));
}

TEST(ConvergenceSvg, ZoomInsetEmitted) {
  const std::string svg = adaug::svg_convergence_plot(five_series(), 2, 5);
  EXPECT_EQ(count_substr(svg, "class=\"zoom\""), 1);
  EXPECT_EQ(count_substr(svg, "class=\"zoom-series\""), 5);
  EXPECT_NE(svg.find("epochs 2-5"), std::string::npos);
}

TEST(IouHeatmapSvg, CellCountIsMethodCountSquared) {
  const std::vector<std::string> names = {"a", "b", "c"};
  std::vector<std::vector<double>> matrix(3, std::vector<double>(3, 0.5));
  for (int i = 0; i < 3; ++i) matrix[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1.0;
  const std::string svg = adaug::svg_iou_heatmap(names, matrix);
  EXPECT_EQ(count_substr(svg, "class=\"cell\""), 9);
  EXPECT_EQ(count_substr(svg, "1.000"), 3);
  const std::string csv = adaug::iou_matrix_csv(names, matrix);
  EXPECT_NE(csv.find("method,a,b,c"), std::string::npos);
  EXPECT_NE(csv.find("a,1.000000,0.500000,0.500000"), std::string::npos);
}

}  // namespace
