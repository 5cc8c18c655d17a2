// Copyright 2026 The adaug Authors
// SPDX-License-Identifier: Apache-2.0
//
// Drives the installed `ada` binary as a subprocess and checks its file
// outputs and exit codes. Everything runs at toy scale (n = 16, a handful of
// samples and epochs) so the whole suite stays fast.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "adaug/fs.hpp"
#include "adaug/io.hpp"
#include "adaug/report.hpp"

namespace {

namespace fs = std::filesystem;

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

CliResult run_cli(const std::string& args, const fs::path& workdir) {
  const fs::path log = workdir / "cli_output.log";
  const std::string command = "cd " + workdir.string() + " && " + ADA_CLI_PATH + " " +
                              args + " > " + log.string() + " 2>&1";
  const int status = std::system(command.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  if (fs::exists(log)) r.output = adaug::detail::read_file(log.string());
  return r;
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("adaug_cli_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int count_lines(const std::string& text) {
  int lines = 0;
  for (const char c : text) lines += c == '\n';
  return lines;
}

// Shared tiny-scale flags: n = 16 keeps every training step in milliseconds.
const char* kTinyData = "--n 16 --train 4 --val 2";
const char* kTinyModel = "--z 8 --base-channels 2 --depth 2 --batch 2";

// Builds one dataset + baseline checkpoint for the tests that need them.
struct Fixture {
  fs::path dir;
  std::string ds;
  std::string ckpt;

  explicit Fixture(const std::string& tag) : dir(fresh_dir(tag)) {
    ds = (dir / "ds").string();
    CliResult r = run_cli(std::string("gen-data ") + kTinyData + " --seed 5 --out " + ds,
                          dir);
    EXPECT_EQ(r.exit_code, 0) << r.output;
    r = run_cli(std::string("train --data ") + ds + " " + kTinyData + " " + kTinyModel +
                    " --epochs 2 --seed 5 --out " + (dir / "base").string(),
                dir);
    EXPECT_EQ(r.exit_code, 0) << r.output;
    ckpt = (dir / "base" / "final.ckpt").string();
  }
};

TEST(Cli, NoSubcommandIsUsageError) {
  const fs::path dir = fresh_dir("usage");
  EXPECT_EQ(run_cli("", dir).exit_code, 2);
  const CliResult r = run_cli("frobnicate", dir);
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.output.find("error:"), std::string::npos);
}

TEST(Cli, GenDataCountsRerunIdenticalAndBadNRejected) {
  const fs::path dir = fresh_dir("gendata");
  const std::string a = (dir / "a").string();
  const std::string b = (dir / "b").string();
  ASSERT_EQ(run_cli(std::string("gen-data ") + kTinyData + " --seed 9 --out " + a, dir)
                .exit_code,
            0);
  int pgm_count = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a))
    pgm_count += entry.path().extension() == ".pgm";
  EXPECT_EQ(pgm_count, 12);  // (4 + 2) image/mask pairs

  ASSERT_EQ(run_cli(std::string("gen-data ") + kTinyData + " --seed 9 --out " + b, dir)
                .exit_code,
            0);
  EXPECT_EQ(adaug::detail::read_file(a + "/manifest.txt"),
            adaug::detail::read_file(b + "/manifest.txt"));
  EXPECT_EQ(adaug::detail::read_file(a + "/train/img/train_002.pgm"),
            adaug::detail::read_file(b + "/train/img/train_002.pgm"));

  const CliResult bad =
      run_cli("gen-data --n 60 --out " + (dir / "bad").string(), dir);
  EXPECT_EQ(bad.exit_code, 2);
  EXPECT_NE(bad.output.find("error:"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "bad" / "manifest.txt"));
}

TEST(Cli, TrainWritesSnapshotCsvAndCheckpoint) {
  const Fixture fx("train");
  EXPECT_TRUE(fs::exists(fx.dir / "base" / "config.ini"));
  EXPECT_TRUE(fs::exists(fx.ckpt));
  const std::string csv =
      adaug::detail::read_file((fx.dir / "base" / "convergence.csv").string());
  EXPECT_EQ(count_lines(csv), 3);  // header + 2 epochs
  EXPECT_EQ(csv.rfind("epoch,phase,cycle,loss,dsc,hsd,tpr,tnr,ppv", 0), 0u);
  EXPECT_NE(csv.find("\n1,standard,0,"), std::string::npos);
  EXPECT_NE(csv.find("\n2,standard,0,"), std::string::npos);
}

TEST(Cli, AdaTrainRowCountLawAndPerCycleCheckpoints) {
  const Fixture fx("adatrain");
  const std::string out = (fx.dir / "ada").string();
  const CliResult r = run_cli(std::string("ada-train --data ") + fx.ds + " " + kTinyData +
                                  " " + kTinyModel +
                                  " --cycles 3 --ada-epochs 2 --method gradcam --seed 6 "
                                  "--resume " + fx.ckpt + " --out " + out,
                              fx.dir);
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const std::string csv = adaug::detail::read_file(out + "/convergence.csv");
  EXPECT_EQ(count_lines(csv), 7);  // header + exactly cycles * ada_epochs rows
  EXPECT_NE(csv.find("\n3,ada,1,"), std::string::npos);  // continues after epoch 2
  EXPECT_NE(csv.find("\n8,ada,3,"), std::string::npos);
  for (int c = 1; c <= 3; ++c)
    EXPECT_TRUE(fs::exists(out + "/cycle_" + std::to_string(c) + ".ckpt"));
  EXPECT_TRUE(fs::exists(out + "/final.ckpt"));
}

TEST(Cli, AdaTrainForksShareTheResumeEvalRow) {
  const Fixture fx("forks");
  std::vector<std::string> first_rows;
  for (const char* method : {"vanilla", "guided"}) {
    const std::string out = (fx.dir / method).string();
    const CliResult r = run_cli(std::string("ada-train --data ") + fx.ds + " " +
                                    kTinyData + " " + kTinyModel +
                                    " --cycles 1 --ada-epochs 1 --seed 6 --eval-resume "
                                    "--method " + method + " --resume " + fx.ckpt +
                                    " --out " + out,
                                fx.dir);
    ASSERT_EQ(r.exit_code, 0) << r.output;
    const std::string csv = adaug::detail::read_file(out + "/convergence.csv");
    EXPECT_EQ(count_lines(csv), 3);  // header + resume row + 1 epoch
    const std::size_t start = csv.find('\n') + 1;
    first_rows.push_back(csv.substr(start, csv.find('\n', start) - start));
  }
  EXPECT_EQ(first_rows[0], first_rows[1]);
  EXPECT_EQ(first_rows[0].rfind("2,resume,0,", 0), 0u);
}

TEST(Cli, AdaTrainUsageErrors) {
  const Fixture fx("adaerr");
  const CliResult missing = run_cli(std::string("ada-train --data ") + fx.ds + " " +
                                        kTinyData + " " + kTinyModel +
                                        " --resume nope.ckpt --out x",
                                    fx.dir);
  EXPECT_EQ(missing.exit_code, 2);
  EXPECT_NE(missing.output.find("nope.ckpt"), std::string::npos);
  const CliResult bad_z = run_cli(std::string("ada-train --data ") + fx.ds + " " +
                                      kTinyData +
                                      " --z 0 --resume " + fx.ckpt + " --out x",
                                  fx.dir);
  EXPECT_EQ(bad_z.exit_code, 2);
  const CliResult no_flag = run_cli(std::string("ada-train --data ") + fx.ds + " " +
                                        kTinyData + " " + kTinyModel + " --out x",
                                    fx.dir);
  EXPECT_EQ(no_flag.exit_code, 2);
  EXPECT_NE(no_flag.output.find("resume"), std::string::npos);
}

TEST(Cli, EvalAndRobustnessAppendRows) {
  const Fixture fx("eval");
  const std::string csv_path = (fx.dir / "metrics.csv").string();
  const std::string common = std::string(" --ckpt ") + fx.ckpt + " --data " + fx.ds +
                             " " + kTinyData + " " + kTinyModel + " --model base --csv " +
                             csv_path + " --out " + (fx.dir / "evalout").string();
  ASSERT_EQ(run_cli("eval" + common, fx.dir).exit_code, 0);
  const CliResult rob = run_cli("robustness" + common, fx.dir);
  ASSERT_EQ(rob.exit_code, 0) << rob.output;
  // n = 16, z = 8: each of the 2 validation images yields 4 occluded
  // variants.
  EXPECT_NE(rob.output.find("(8 samples)"), std::string::npos);
  const std::string csv = adaug::detail::read_file(csv_path);
  EXPECT_EQ(count_lines(csv), 3);
  EXPECT_NE(csv.find("val,base,-,"), std::string::npos);
  EXPECT_NE(csv.find("val-occluded-z8,base,-,"), std::string::npos);
  // Re-running is deterministic: the new rows equal the old ones.
  ASSERT_EQ(run_cli("eval" + common, fx.dir).exit_code, 0);
  const std::string csv2 = adaug::detail::read_file(csv_path);
  const std::string row1 = csv.substr(csv.find("\nval,base"));
  EXPECT_NE(csv2.find(row1.substr(0, row1.find('\n', 1))), std::string::npos);
}

TEST(Cli, InterpretEmitsVerifiableTriples) {
  const Fixture fx("interpret");
  const std::string out = (fx.dir / "panels").string();
  const CliResult r = run_cli(std::string("interpret --ckpt ") + fx.ckpt + " --data " +
                                  fx.ds + " " + kTinyData + " " + kTinyModel +
                                  " --sample train_001 --methods all --out " + out,
                              fx.dir);
  ASSERT_EQ(r.exit_code, 0) << r.output;
  int pgm_count = 0;
  for (const auto& entry : fs::directory_iterator(out))
    pgm_count += entry.path().extension() == ".pgm";
  EXPECT_EQ(pgm_count, 18);  // 6 methods x (saliency, mask, x_new)

  // The emitted x_new must equal image (x) mask recomputed offline, up to
  // 16-bit quantization of both files.
  const adaug::Tensor image =
      adaug::load_image_pgm(fx.ds + "/train/img/train_001.pgm");
  const adaug::Tensor mask =
      adaug::load_mask_pgm(out + "/train_001_gradcam_mask.pgm");
  const adaug::Tensor x_new =
      adaug::load_image_pgm(out + "/train_001_gradcam_xnew.pgm");
  for (std::size_t i = 0; i < image.size(); ++i)
    ASSERT_NEAR(x_new[i], image[i] * mask[i], 2.0f / 65535.0f);

  const CliResult unknown = run_cli(std::string("interpret --ckpt ") + fx.ckpt +
                                        " --data " + fx.ds + " " + kTinyData + " " +
                                        kTinyModel +
                                        " --sample ghost --methods all --out " + out,
                                    fx.dir);
  EXPECT_EQ(unknown.exit_code, 2);
  EXPECT_NE(unknown.output.find("ghost"), std::string::npos);
}

TEST(Cli, IouMatrixCsvAndHeatmap) {
  const Fixture fx("ioumatrix");
  const std::string out = (fx.dir / "iou").string();
  const CliResult r = run_cli(std::string("iou-matrix --ckpt ") + fx.ckpt + " --data " +
                                  fx.ds + " " + kTinyData + " " + kTinyModel +
                                  " --out " + out,
                              fx.dir);
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const std::string csv = adaug::detail::read_file(out + "/iou_matrix.csv");
  EXPECT_EQ(count_lines(csv), 7);  // header + 6 method rows
  EXPECT_NE(csv.find("vanilla,1.000000"), std::string::npos);
  const std::string svg = adaug::detail::read_file(out + "/iou_matrix.svg");
  int cells = 0;
  std::size_t pos = 0;
  while ((pos = svg.find("class=\"cell\"", pos)) != std::string::npos) {
    ++cells;
    pos += 10;
  }
  EXPECT_EQ(cells, 36);
}

TEST(Cli, PlotOverlaysSeriesAndRejectsEmptyCsv) {
  const fs::path dir = fresh_dir("plot");
  std::vector<std::string> flags;
  for (int s = 0; s < 5; ++s) {
    std::vector<adaug::ConvergenceRecord> records;
    for (int e = 1; e <= 4; ++e) {
      adaug::ConvergenceRecord r;
      r.epoch = e;
      r.phase = "standard";
      r.loss = 0.5;
      r.val.dsc = 50.0 + s + e;
      records.push_back(r);
    }
    const std::string path = (dir / ("run" + std::to_string(s) + ".csv")).string();
    adaug::detail::write_file_atomic(path, adaug::convergence_csv(records));
    flags.push_back("--csv " + path);
  }
  std::string args = "plot";
  for (const std::string& f : flags) args += " " + f;
  args += " --zoom 2:3 --out " + (dir / "plotout").string();
  ASSERT_EQ(run_cli(args, dir).exit_code, 0);
  const std::string svg =
      adaug::detail::read_file((dir / "plotout" / "convergence.svg").string());
  int series = 0;
  std::size_t pos = 0;
  while ((pos = svg.find("class=\"series\"", pos)) != std::string::npos) {
    ++series;
    pos += 10;
  }
  EXPECT_EQ(series, 5);
  EXPECT_NE(svg.find("class=\"zoom\""), std::string::npos);

  const std::string empty = (dir / "empty.csv").string();
  adaug::detail::write_file_atomic(empty,
                                   std::string(adaug::kConvergenceCsvHeader) + "\n");
  const CliResult bad =
      run_cli("plot --csv " + empty + " --out " + (dir / "plotout2").string(), dir);
  EXPECT_EQ(bad.exit_code, 1);
  EXPECT_NE(bad.output.find("error:"), std::string::npos);
}

TEST(Cli, DryRunValidatesWithoutSideEffects) {
  const Fixture fx("dryrun");
  const std::string out = (fx.dir / "dry_out").string();
  const CliResult ok = run_cli(std::string("train --data ") + fx.ds + " " + kTinyData +
                                   " " + kTinyModel + " --epochs 1 --dry-run --out " + out,
                               fx.dir);
  EXPECT_EQ(ok.exit_code, 0);
  EXPECT_NE(ok.output.find("dry run ok"), std::string::npos);
  EXPECT_FALSE(fs::exists(out));
  // Invalid flags still fail under --dry-run.
  const CliResult bad = run_cli(std::string("train --data ") + fx.ds + " " + kTinyData +
                                    " --z 0 --dry-run --out " + out,
                                fx.dir);
  EXPECT_EQ(bad.exit_code, 2);
}

TEST(Cli, ConfigSnapshotReproducesRun) {
  const Fixture fx("snapshot");
  // Re-run training from the snapshot the first run wrote; byte-identical
  // convergence CSV and checkpoint must come out.
  const std::string out2 = (fx.dir / "base2").string();
  const CliResult r = run_cli("train --data " + fx.ds + " --config " +
                                  (fx.dir / "base" / "config.ini").string() + " --out " +
                                  out2,
                              fx.dir);
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_EQ(adaug::detail::read_file((fx.dir / "base" / "convergence.csv").string()),
            adaug::detail::read_file(out2 + "/convergence.csv"));
  EXPECT_EQ(adaug::detail::read_file(fx.ckpt),
            adaug::detail::read_file(out2 + "/final.ckpt"));
}

}  // namespace
