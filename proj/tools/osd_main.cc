// Copyright 2026 The osdkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "osd/commands.h"
#include "osd/error.h"
#include "osd/fixtures.h"
#include "osd/run_config.h"

namespace fs = std::filesystem;
using namespace osd;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::optional<uint64_t> seed;
  int jobs = 1;

  void Attach(CLI::App* app) {
    app->add_option("--config", config, "Recipe / config file (key = value lines)");
    app->add_option("--set", sets, "Override one key, KEY=VALUE (repeatable)");
    app->add_option("--seed", seed, "Seed for model init, data order and augmentation");
    app->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  }

  cli::RunConfig Load() const {
    cli::ConfigRequest req;
    if (!config.empty()) req.config_file = config;
    req.overrides = sets;
    req.seed = seed;
    return cli::LoadRunConfig(req);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"osd: overlapped speech detection toolkit"};
  app.require_subcommand(1);

  Common prep_common, stats_common, train_common, eval_common;

  auto* prepare = app.add_subcommand("prepare", "Segment recordings and cache features + labels");
  prep_common.Attach(prepare);
  std::vector<std::string> prep_manifests;
  std::string rttm_dir, out_dir;
  prepare->add_option("--manifest", prep_manifests,
                      "Recording manifest (repeatable; default: configured splits)");
  prepare->add_option("--rttm-dir", rttm_dir, "Directory of <recording>.rttm files");
  prepare->add_option("--out", out_dir, "Cache directory");

  auto* stats = app.add_subcommand("stats", "Hours and overlap percentage per dataset tag");
  stats_common.Attach(stats);
  std::vector<std::string> stats_manifests;
  stats->add_option("manifests", stats_manifests, "Segment manifests or split names");

  auto* train = app.add_subcommand("train", "Train a model on the prepared cache");
  train_common.Attach(train);
  std::string weights_mode, train_ckpt;
  train->add_option("--weights-mode", weights_mode, "uniform | inverse_frequency | explicit");
  train->add_option("--checkpoint", train_ckpt, "Output checkpoint path");

  auto* eval = app.add_subcommand("eval", "Score a checkpoint on the prepared test split");
  eval_common.Attach(eval);
  std::string eval_ckpt, report_path;
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint to score");
  eval->add_option("--report", report_path, "Machine-readable report output");

  auto* fixtures = app.add_subcommand("make-fixtures", "Write a synthetic corpus");
  fixtures::FixtureOptions fx;
  std::string fx_out;
  int fx_recordings = 0;
  fixtures->add_option("--out", fx_out, "Output directory")->required();
  fixtures->add_option("--seed", fx.seed, "Generator seed");
  fixtures->add_option("--overlap", fx.overlap_ratio, "Planted overlap ratio");
  fixtures->add_option("--silence", fx.silence_ratio, "Planted silence ratio");
  fixtures->add_option("--seconds", fx.recording_seconds, "Recording length in seconds");
  fixtures->add_option("--train-recordings", fx.train_recordings, "Training recordings per tag");
  fixtures->add_option("--val-recordings", fx.val_recordings, "Validation recordings per tag");
  fixtures->add_option("--test-recordings", fx.test_recordings, "Test recordings per tag");
  fixtures->add_option("--recordings", fx_recordings, "Set all three split sizes at once");
  fixtures->add_option("--tags", fx.tags, "Dataset tags")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (prepare->parsed()) {
      cli::RunConfig cfg = prep_common.Load();
      std::vector<fs::path> manifests(prep_manifests.begin(), prep_manifests.end());
      if (manifests.empty())
        for (const auto* m : {&cfg.paths.train_manifest, &cfg.paths.val_manifest,
                              &cfg.paths.test_manifest})
          if (!m->empty()) manifests.emplace_back(*m);
      const fs::path cache = out_dir.empty() ? fs::path(cfg.paths.cache_dir) : fs::path(out_dir);
      const fs::path rttm = rttm_dir.empty() ? fs::path(cfg.paths.rttm_dir) : fs::path(rttm_dir);
      const auto result = cli::Prepare(cfg, manifests, rttm, cache, prep_common.jobs, std::cout);
      if (!result.ok()) {
        std::cerr << "prepare: " << result.failures.size() << " recording(s) failed\n";
        return kExitData;
      }
    } else if (stats->parsed()) {
      cli::RunConfig cfg = stats_common.Load();
      if (stats_manifests.empty())
        for (const auto* m : {&cfg.paths.train_manifest, &cfg.paths.val_manifest,
                              &cfg.paths.test_manifest})
          if (!m->empty()) stats_manifests.push_back(*m);
      if (stats_manifests.empty()) throw ConfigError("stats: no manifest given");
      const cache::CacheLayout layout(cfg.paths.cache_dir);
      for (const auto& name : stats_manifests) {
        const fs::path path = cli::ResolveSegmentManifest(name, cfg.paths.cache_dir);
        std::cout << "# " << path.string() << "\n"
                  << cli::FormatStatsTable(cli::Stats(path, layout));
      }
    } else if (train->parsed()) {
      if (!weights_mode.empty()) train_common.sets.push_back("train.weights_mode=" + weights_mode);
      if (!train_ckpt.empty()) train_common.sets.push_back("paths.checkpoint=" + train_ckpt);
      cli::RunConfig cfg = train_common.Load();
      cli::Train(cfg, train_common.jobs, std::cout);
    } else if (eval->parsed()) {
      if (!report_path.empty()) eval_common.sets.push_back("paths.report=" + report_path);
      if (!eval_ckpt.empty()) eval_common.sets.push_back("paths.checkpoint=" + eval_ckpt);
      cli::RunConfig cfg = eval_common.Load();
      if (cfg.paths.checkpoint.empty()) throw ConfigError("eval: no checkpoint given");
      const auto report = cli::Eval(cfg, cfg.paths.checkpoint, eval_common.jobs);
      std::cout << report.FormatTable() << "\n" << report.FormatRecords();
    } else if (fixtures->parsed()) {
      if (fx_recordings > 0)
        fx.train_recordings = fx.val_recordings = fx.test_recordings = fx_recordings;
      const auto summary = fixtures::MakeFixtures(fx_out, fx);
      std::cout << "wrote " << summary.recordings << " recordings to " << fx_out << "\n"
                << summary.planted.ToString();
    }
  } catch (const Error& e) {
    std::cerr << "osd: " << e.what() << "\n";
    return ExitCodeFor(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "osd: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
