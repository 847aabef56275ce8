// Copyright 2026 The akd Authors
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

// Command-line surface: gen-data, pretrain-teacher, train, distill, eval, det.
// Every command is deterministic given its config and seed, and writes a
// manifest.json (config snapshot, seed, FNV-64 artifact hashes) into --out.
// Exit codes: 0 success, 2 usage/config error, 3 numerical abort (NaN/Inf),
// 4 contract violation (freeze/stop-gradient/lifecycle).

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>

#include "CLI11.hpp"
#include "akd/checkpoint.hpp"
#include "akd/data.hpp"
#include "akd/error.hpp"
#include "akd/pipeline.hpp"
#include "akd/rng.hpp"
#include "akd/util.hpp"
#include "json.hpp"

namespace {

using ojson = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitContract = 4;

void add_artifact(ojson& artifacts, const std::string& path) {
  if (path.empty() || !std::filesystem::exists(path)) return;
  artifacts[std::filesystem::path(path).filename().string()] =
      akd::hash_hex(akd::hash_file(path));
}

void write_manifest(const std::string& out_dir, const ojson& manifest) {
  akd::write_text_file(out_dir + "/manifest.json", manifest.dump(1) + "\n");
}

ojson config_snapshot(const akd::RunConfig& config) {
  return ojson::parse(akd::run_config_to_json(config));
}

struct Options {
  std::string config;
  std::string out;
  std::string checkpoint;
  std::string data;
  std::string side;
  long long n = 0;
  std::uint64_t seed = 0;
  bool has_n = false;
  bool has_seed = false;
};

akd::RunConfig load_config(const Options& opt) {
  akd::RunConfig config = akd::load_run_config(opt.config);
  if (opt.has_seed) config.seed = opt.seed;
  return config;
}

int cmd_gen_data(const Options& opt) {
  akd::RunConfig config = load_config(opt);
  if (opt.has_n) config.generator.n_train = static_cast<int>(opt.n);
  const akd::GeneratorSettings& g = config.generator;
  if (g.n_train < 1) {
    throw akd::ConfigError("gen-data needs generator.n_train >= 1, got " +
                           std::to_string(g.n_train));
  }
  std::filesystem::create_directories(opt.out);

  // One sampling stream for all splits keeps example ids unique across files.
  const akd::GeneratorConfig gen = g.make_config(akd::substream(config.seed, "data"));
  const akd::Dataset all = akd::generate(gen, g.n_train + g.n_val + g.n_test);
  const auto slice = [&](int start, int count) {
    akd::Dataset d;
    d.dim = all.dim;
    d.items.assign(all.items.begin() + start, all.items.begin() + start + count);
    return d;
  };

  ojson artifacts = ojson::object();
  const auto emit = [&](const char* name, int start, int count) {
    if (count <= 0) return;
    const std::string path = opt.out + "/" + name;
    akd::save_dataset(slice(start, count), path);
    add_artifact(artifacts, path);
    std::printf("%s %d examples\n", name, count);
  };
  emit("train.ds", 0, g.n_train);
  emit("val.ds", g.n_train, g.n_val);
  emit("test.ds", g.n_train + g.n_val, g.n_test);

  ojson manifest;
  manifest["command"] = "gen-data";
  manifest["seed"] = config.seed;
  manifest["config"] = config_snapshot(config);
  manifest["artifacts"] = artifacts;
  write_manifest(opt.out, manifest);
  return kExitOk;
}

int cmd_run(const char* command, std::initializer_list<const char*> pipelines,
            const Options& opt) {
  akd::RunConfig config = load_config(opt);
  bool allowed = false;
  for (const char* p : pipelines) allowed = allowed || config.pipeline == p;
  if (!allowed) {
    std::string expect;
    for (const char* p : pipelines) expect += expect.empty() ? p : std::string(" or ") + p;
    throw akd::ConfigError(std::string(command) + " runs pipeline " + expect +
                           "; config selects '" + config.pipeline + "'");
  }
  const akd::RunResult result = akd::run_pipeline(config, opt.out);

  std::printf("pipeline %s\n", config.pipeline.c_str());
  std::printf("epochs %d\n", result.epochs_run);
  std::printf("final val total %s\n", akd::format_float(result.final_val_total).c_str());
  std::printf("best val total %s\n", akd::format_float(result.best_val_total).c_str());
  std::printf("last checkpoint %s\n", result.checkpoint_last.c_str());

  ojson artifacts = ojson::object();
  add_artifact(artifacts, result.checkpoint_last);
  add_artifact(artifacts, result.checkpoint_best);
  add_artifact(artifacts, result.metrics_path);
  ojson manifest;
  manifest["command"] = command;
  manifest["seed"] = config.seed;
  manifest["config"] = config_snapshot(config);
  manifest["artifacts"] = artifacts;
  write_manifest(opt.out, manifest);
  return kExitOk;
}

int cmd_eval(const char* command, bool report, const Options& opt) {
  std::filesystem::create_directories(opt.out);
  const akd::EvalResult result =
      akd::evaluate_checkpoint(opt.checkpoint, opt.data, opt.out, opt.side);

  ojson artifacts = ojson::object();
  std::string report_text;
  for (const auto& inv : result.per_invocation) {
    if (report) {
      report_text += inv.invocation + " eer " + akd::format_double(inv.eer) + " threshold " +
                     akd::format_double(inv.threshold) + " count " + std::to_string(inv.count) +
                     "\n";
    } else {
      std::printf("%s\n", inv.det_path.c_str());
    }
    add_artifact(artifacts, inv.det_path);
  }
  if (report) {
    std::fputs(report_text.c_str(), stdout);
    const std::string report_path = opt.out + "/report.txt";
    akd::write_text_file(report_path, report_text);
    add_artifact(artifacts, report_path);
  }

  ojson inputs;
  inputs["checkpoint"] = opt.checkpoint;
  inputs["checkpoint_hash"] = akd::hash_hex(akd::hash_file(opt.checkpoint));
  inputs["data"] = opt.data;
  inputs["data_hash"] = akd::hash_hex(akd::hash_file(opt.data));
  if (!opt.side.empty()) inputs["side"] = opt.side;
  ojson manifest;
  manifest["command"] = command;
  manifest["config"] =
      ojson::parse(akd::load_checkpoint(opt.checkpoint).info.at("config"));
  manifest["inputs"] = inputs;
  manifest["artifacts"] = artifacts;
  write_manifest(opt.out, manifest);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  akd::tune_allocator();
  CLI::App app{"adaptive knowledge distillation laboratory"};
  app.require_subcommand(1);
  Options opt;

  const auto with_config = [&opt](CLI::App* cmd) {
    cmd->add_option("--config", opt.config, "Run config JSON file")->required();
    cmd->add_option("--out", opt.out, "Output directory")->required();
    return cmd;
  };
  const auto with_seed = [&opt](CLI::App* cmd) {
    cmd->add_option("--seed", opt.seed, "Override the config seed")
        ->each([&opt](const std::string&) { opt.has_seed = true; });
    return cmd;
  };

  CLI::App* gen = with_seed(with_config(
      app.add_subcommand("gen-data", "Generate train/val/test feature datasets")));
  gen->add_option("--n", opt.n, "Override generator.n_train")
      ->each([&opt](const std::string&) { opt.has_n = true; });
  CLI::App* pretrain = with_seed(with_config(app.add_subcommand(
      "pretrain-teacher", "Pretrain the teacher encoder on the auxiliary tagging task")));
  CLI::App* train = with_seed(with_config(
      app.add_subcommand("train", "Train a model (pipeline: baseline or teacher_adapters)")));
  CLI::App* distill = with_seed(with_config(app.add_subcommand(
      "distill", "Distill a student (pipeline: conventional_kd or adaptive_kd)")));

  const auto with_eval = [&opt](CLI::App* cmd) {
    cmd->add_option("--checkpoint", opt.checkpoint, "Checkpoint file")->required();
    cmd->add_option("--data", opt.data, "Dataset file")->required();
    cmd->add_option("--out", opt.out, "Output directory")->required();
    cmd->add_option("--side", opt.side, "Force model side: student or teacher");
    return cmd;
  };
  CLI::App* eval = with_eval(
      app.add_subcommand("eval", "Report per-invocation EER and write DET curves"));
  CLI::App* det = with_eval(app.add_subcommand("det", "Write DET curve CSVs only"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(opt);
    if (pretrain->parsed()) return cmd_run("pretrain-teacher", {"pretrain_teacher"}, opt);
    if (train->parsed()) return cmd_run("train", {"baseline", "teacher_adapters"}, opt);
    if (distill->parsed()) return cmd_run("distill", {"conventional_kd", "adaptive_kd"}, opt);
    if (eval->parsed()) return cmd_eval("eval", true, opt);
    if (det->parsed()) return cmd_eval("det", false, opt);
  } catch (const akd::NumericError& e) {
    std::fprintf(stderr, "akd: numerical abort: %s\n", e.what());
    return kExitNumeric;
  } catch (const akd::FreezeViolation& e) {
    std::fprintf(stderr, "akd: %s\n", e.what());
    return kExitContract;
  } catch (const akd::StopGradientViolation& e) {
    std::fprintf(stderr, "akd: %s\n", e.what());
    return kExitContract;
  } catch (const akd::ContractError& e) {
    std::fprintf(stderr, "akd: %s\n", e.what());
    return kExitContract;
  } catch (const akd::LifecycleError& e) {
    std::fprintf(stderr, "akd: %s\n", e.what());
    return kExitContract;
  } catch (const std::exception& e) {
    // Remaining library errors (config, parse, dimension, undefined rate) and
    // filesystem failures are usage problems.
    std::fprintf(stderr, "akd: %s\n", e.what());
    return kExitConfig;
  }
  return kExitOk;
}
