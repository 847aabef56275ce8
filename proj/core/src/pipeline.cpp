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

#include "akd/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "akd/error.hpp"
#include "akd/ops.hpp"
#include "akd/rng.hpp"
#include "akd/util.hpp"
#include "json.hpp"

namespace akd {
namespace {

using Json = nlohmann::ordered_json;

constexpr int kEvalBatchSize = 64;

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Run-config JSON
// ---------------------------------------------------------------------------

void check_keys(const Json& obj, std::initializer_list<std::string_view> allowed,
                const std::string& ctx) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (std::string_view a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError(ctx + ": unknown key '" + key + "'");
  }
}

const Json* section(const Json& obj, const char* key, const std::string& ctx) {
  auto it = obj.find(key);
  if (it == obj.end()) return nullptr;
  if (!it->is_object()) throw ConfigError(ctx + ": '" + std::string(key) + "' must be an object");
  return &*it;
}

template <typename T>
T field(const Json& obj, const char* key, T fallback, const std::string& ctx) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const std::exception& e) {
    throw ConfigError(ctx + ": field '" + std::string(key) + "': " + e.what());
  }
}

}  // namespace

GeneratorConfig GeneratorSettings::make_config(std::uint64_t sample_seed) const {
  GeneratorConfig cfg = default_generator_config(dim, profile_seed, shift_scale, noise_scale);
  cfg.t_min = t_min;
  cfg.t_max = t_max;
  cfg.class_balance = class_balance;
  cfg.distractor_prob = distractor_prob;
  cfg.seed = sample_seed;
  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  static const char* kPipelines[] = {"baseline", "teacher_adapters", "conventional_kd",
                                     "adaptive_kd", "pretrain_teacher"};
  bool known = false;
  for (const char* p : kPipelines) known = known || pipeline == p;
  if (!known) throw ConfigError("unknown pipeline '" + pipeline + "'");

  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (splice_context < 0) throw ConfigError("splice_context must be >= 0");
  if (adapter_depth < 1) throw ConfigError("adapter_depth must be >= 1");
  if (ed_target != "frames" && ed_target != "summary") {
    throw ConfigError("ed_target must be 'frames' or 'summary', got '" + ed_target + "'");
  }
  if (!(student.lr >= 0.0f)) throw ConfigError("student.lr must be >= 0");
  if (!(teacher.lr >= 0.0f)) throw ConfigError("teacher.lr must be >= 0");
  if (!(scheduler.factor > 0.0f && scheduler.factor <= 1.0f)) {
    throw ConfigError("scheduler.factor must be in (0, 1]");
  }
  if (scheduler.patience < 1) throw ConfigError("scheduler.patience must be >= 1");
  if (!(scheduler.min_lr >= 0.0f)) throw ConfigError("scheduler.min_lr must be >= 0");
  weights.validate();

  const bool ce_only_pipeline =
      pipeline == "baseline" || pipeline == "teacher_adapters" || pipeline == "pretrain_teacher";
  if (ce_only_pipeline) {
    if (weights.ed_enabled() || weights.pl_enabled() || weights.ar_enabled()) {
      throw ConfigError("pipeline '" + pipeline +
                        "' trains with cross-entropy only; distillation weights must be disabled");
    }
    if (!weights.use_ddsd) {
      throw ConfigError("pipeline '" + pipeline + "' requires weights.use_ddsd");
    }
  } else if (!weights.any_enabled()) {
    throw ConfigError("pipeline '" + pipeline + "' has no enabled loss terms");
  }

  const bool needs_teacher =
      pipeline == "teacher_adapters" || pipeline == "conventional_kd" || pipeline == "adaptive_kd";
  if (needs_teacher && teacher.checkpoint.empty()) {
    throw ConfigError("teacher.checkpoint is required for pipeline '" + pipeline + "'");
  }
  if (pipeline != "pretrain_teacher" && data.train.empty()) {
    throw ConfigError("data.train is required for pipeline '" + pipeline + "'");
  }

  if (generator.dim < 1) throw ConfigError("generator.dim must be >= 1");
  if (generator.t_min < 1 || generator.t_max < generator.t_min) {
    throw ConfigError("generator sequence length range is invalid");
  }
  if (generator.class_balance < 0.0f || generator.class_balance > 1.0f) {
    throw ConfigError("generator.class_balance must be in [0, 1]");
  }
  if (generator.noise_scale < 0.0f) throw ConfigError("generator.noise_scale must be >= 0");
  if (generator.shift_scale < 0.0f) throw ConfigError("generator.shift_scale must be >= 0");
  if (generator.distractor_prob < 0.0f || generator.distractor_prob > 1.0f) {
    throw ConfigError("generator.distractor_prob must be in [0, 1]");
  }
  if (generator.n_train < 0 || generator.n_val < 0 || generator.n_test < 0 ||
      generator.n_aux < 0) {
    throw ConfigError("generator sequence counts must be >= 0");
  }
}

RunConfig run_config_from_json(const std::string& text, const std::string& context) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(context + ": invalid JSON: " + e.what());
  }
  if (!root.is_object()) throw ConfigError(context + ": top level is not an object");
  check_keys(root,
             {"pipeline", "seed", "epochs", "batch_size", "splice_context", "adapter_depth",
              "ed_target", "student", "teacher", "scheduler", "weights", "data", "generator",
              "resume_from"},
             context);

  RunConfig c;
  c.pipeline = field(root, "pipeline", c.pipeline, context);
  c.seed = field(root, "seed", c.seed, context);
  c.epochs = field(root, "epochs", c.epochs, context);
  c.batch_size = field(root, "batch_size", c.batch_size, context);
  c.splice_context = field(root, "splice_context", c.splice_context, context);
  c.adapter_depth = field(root, "adapter_depth", c.adapter_depth, context);
  c.ed_target = field(root, "ed_target", c.ed_target, context);
  c.resume_from = field(root, "resume_from", c.resume_from, context);

  if (const Json* s = section(root, "student", context)) {
    check_keys(*s, {"preset", "lr"}, context + ": student");
    c.student.preset = field(*s, "preset", c.student.preset, context);
    c.student.lr = field(*s, "lr", c.student.lr, context);
  }
  if (const Json* t = section(root, "teacher", context)) {
    check_keys(*t, {"preset", "lr", "checkpoint", "adapters_from", "ce"}, context + ": teacher");
    c.teacher.preset = field(*t, "preset", c.teacher.preset, context);
    c.teacher.lr = field(*t, "lr", c.teacher.lr, context);
    c.teacher.checkpoint = field(*t, "checkpoint", c.teacher.checkpoint, context);
    c.teacher.adapters_from = field(*t, "adapters_from", c.teacher.adapters_from, context);
    c.teacher.ce = field(*t, "ce", c.teacher.ce, context);
  }
  if (const Json* s = section(root, "scheduler", context)) {
    check_keys(*s, {"factor", "patience", "min_lr"}, context + ": scheduler");
    c.scheduler.factor = field(*s, "factor", c.scheduler.factor, context);
    c.scheduler.patience = field(*s, "patience", c.scheduler.patience, context);
    c.scheduler.min_lr = field(*s, "min_lr", c.scheduler.min_lr, context);
  }
  if (const Json* w = section(root, "weights", context)) {
    check_keys(*w, {"use_ddsd", "lambda_ed", "use_pl", "lambda_pl", "lambda_ar"},
               context + ": weights");
    c.weights.use_ddsd = field(*w, "use_ddsd", c.weights.use_ddsd, context);
    c.weights.lambda_ed = field(*w, "lambda_ed", c.weights.lambda_ed, context);
    c.weights.use_pl = field(*w, "use_pl", c.weights.use_pl, context);
    c.weights.lambda_pl = field(*w, "lambda_pl", c.weights.lambda_pl, context);
    c.weights.lambda_ar = field(*w, "lambda_ar", c.weights.lambda_ar, context);
  }
  if (const Json* d = section(root, "data", context)) {
    check_keys(*d, {"train", "val", "test"}, context + ": data");
    c.data.train = field(*d, "train", c.data.train, context);
    c.data.val = field(*d, "val", c.data.val, context);
    c.data.test = field(*d, "test", c.data.test, context);
  }
  if (const Json* g = section(root, "generator", context)) {
    check_keys(*g,
               {"dim", "t_min", "t_max", "class_balance", "noise_scale", "shift_scale",
                "distractor_prob", "profile_seed", "n_train", "n_val", "n_test", "n_aux"},
               context + ": generator");
    c.generator.dim = field(*g, "dim", c.generator.dim, context);
    c.generator.t_min = field(*g, "t_min", c.generator.t_min, context);
    c.generator.t_max = field(*g, "t_max", c.generator.t_max, context);
    c.generator.class_balance = field(*g, "class_balance", c.generator.class_balance, context);
    c.generator.noise_scale = field(*g, "noise_scale", c.generator.noise_scale, context);
    c.generator.shift_scale = field(*g, "shift_scale", c.generator.shift_scale, context);
    c.generator.distractor_prob =
        field(*g, "distractor_prob", c.generator.distractor_prob, context);
    c.generator.profile_seed = field(*g, "profile_seed", c.generator.profile_seed, context);
    c.generator.n_train = field(*g, "n_train", c.generator.n_train, context);
    c.generator.n_val = field(*g, "n_val", c.generator.n_val, context);
    c.generator.n_test = field(*g, "n_test", c.generator.n_test, context);
    c.generator.n_aux = field(*g, "n_aux", c.generator.n_aux, context);
  }

  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  return run_config_from_json(read_text_file(path), path);
}

std::string run_config_to_json(const RunConfig& c) {
  Json root;
  root["pipeline"] = c.pipeline;
  root["seed"] = c.seed;
  root["epochs"] = c.epochs;
  root["batch_size"] = c.batch_size;
  root["splice_context"] = c.splice_context;
  root["adapter_depth"] = c.adapter_depth;
  root["ed_target"] = c.ed_target;
  root["student"] = Json{{"preset", c.student.preset}, {"lr", c.student.lr}};
  root["teacher"] = Json{{"preset", c.teacher.preset},
                         {"lr", c.teacher.lr},
                         {"checkpoint", c.teacher.checkpoint},
                         {"adapters_from", c.teacher.adapters_from},
                         {"ce", c.teacher.ce}};
  root["scheduler"] = Json{{"factor", c.scheduler.factor},
                           {"patience", c.scheduler.patience},
                           {"min_lr", c.scheduler.min_lr}};
  root["weights"] = Json{{"use_ddsd", c.weights.use_ddsd},
                         {"lambda_ed", c.weights.lambda_ed},
                         {"use_pl", c.weights.use_pl},
                         {"lambda_pl", c.weights.lambda_pl},
                         {"lambda_ar", c.weights.lambda_ar}};
  root["data"] = Json{{"train", c.data.train}, {"val", c.data.val}, {"test", c.data.test}};
  root["generator"] = Json{{"dim", c.generator.dim},
                           {"t_min", c.generator.t_min},
                           {"t_max", c.generator.t_max},
                           {"class_balance", c.generator.class_balance},
                           {"noise_scale", c.generator.noise_scale},
                           {"shift_scale", c.generator.shift_scale},
                           {"distractor_prob", c.generator.distractor_prob},
                           {"profile_seed", c.generator.profile_seed},
                           {"n_train", c.generator.n_train},
                           {"n_val", c.generator.n_val},
                           {"n_test", c.generator.n_test},
                           {"n_aux", c.generator.n_aux}};
  root["resume_from"] = c.resume_from;
  return root.dump(1) + "\n";
}

std::pair<Dataset, Dataset> split_train_val(const Dataset& dataset) {
  Dataset train, val;
  train.dim = val.dim = dataset.dim;
  for (const FeatureSequence& s : dataset.items) {
    if (fnv1a64(s.id) % 10 == 9) {
      val.items.push_back(s);
    } else {
      train.items.push_back(s);
    }
  }
  return {std::move(train), std::move(val)};
}

namespace {

// ---------------------------------------------------------------------------
// Training machinery
// ---------------------------------------------------------------------------

const Mask kNoMask{};  // empty mask: every frame is real

struct StudentSide {
  ParamStore* store = nullptr;
  Encoder* encoder = nullptr;
  AdapterBank* heads = nullptr;
  AlignProjection* align = nullptr;
};

struct TeacherSide {
  ParamStore* store = nullptr;
  Encoder* encoder = nullptr;
  AdapterBank* heads = nullptr;
  // Frozen-encoder embeddings at true sequence length, keyed by example id.
  std::unordered_map<std::string, Tensor> cache;
};

void check_spliced_dim(const Dataset& ds, int context, const EncoderConfig& enc,
                       const std::string& who) {
  const int got = spliced_dim(ds.dim, context);
  if (got != enc.input_dim) {
    throw ConfigError(who + " expects input width " + std::to_string(enc.input_dim) +
                      ", but the data yields " + std::to_string(got) + " (D=" +
                      std::to_string(ds.dim) + ", context " + std::to_string(context) + ")");
  }
}

Dataset load_nonempty(const std::string& path, const char* role) {
  Dataset ds = load_dataset(path);
  if (ds.empty()) {
    throw ConfigError(std::string(role) + " dataset is empty: " + path);
  }
  return ds;
}

struct SplitData {
  Dataset train;
  Dataset val;
};

SplitData load_training_data(const RunConfig& config) {
  SplitData d;
  d.train = load_nonempty(config.data.train, "training");
  if (!config.data.val.empty()) {
    d.val = load_nonempty(config.data.val, "validation");
    if (d.val.dim != d.train.dim) {
      throw ConfigError("validation dimension " + std::to_string(d.val.dim) +
                        " does not match training dimension " + std::to_string(d.train.dim));
    }
  } else {
    auto [tr, va] = split_train_val(d.train);
    if (tr.empty() || va.empty()) {
      throw ConfigError("id-hash validation split left a side empty; provide data.val");
    }
    d.train = std::move(tr);
    d.val = std::move(va);
  }
  return d;
}

void build_teacher_cache(TeacherSide& teacher, const Dataset& ds, int context) {
  for (const FeatureSequence& s : ds.items) {
    if (teacher.cache.count(s.id)) continue;
    Tensor x(Shape{s.t, spliced_dim(s.d, context)}, splice(s, context));
    teacher.cache[s.id] = teacher.encoder->forward(nullptr, x, kNoMask);
  }
}

Tensor pad_rows(const Tensor& e, int t_max) {
  const int h = static_cast<int>(e.shape()[1]);
  std::vector<float> out(static_cast<std::size_t>(t_max) * h, 0.0f);
  std::copy(e.values().begin(), e.values().end(), out.begin());
  return Tensor(Shape{t_max, h}, std::move(out));
}

Tensor pad_vec(const Tensor& a, int t_max) {
  std::vector<float> out(static_cast<std::size_t>(t_max), 0.0f);
  std::copy(a.values().begin(), a.values().end(), out.begin());
  return Tensor(Shape{t_max}, std::move(out));
}

/// Detached per-example distillation targets under the teacher's current
/// adapters. Embeddings and attention vectors are zero-padded to the batch
/// length; the batch masks keep padding out of every loss.
struct TeacherTargets {
  std::vector<Tensor> e_pad;      // [t_max x H_T], if ed targets frames
  std::vector<Tensor> z;          // [1 x H_T], if ed targets summaries
  std::vector<Tensor> alpha_pad;  // [t_max], if ar enabled
  std::vector<Tensor> probs;      // [1 x 2], if pl enabled
};

TeacherTargets make_teacher_targets(const TeacherSide& teacher, const Batch& batch,
                                    const DistillWeights& w, bool ed_summary) {
  TeacherTargets tg;
  const bool need_heads = w.pl_enabled() || w.ar_enabled() || (w.ed_enabled() && ed_summary);
  for (int i = 0; i < batch.size; ++i) {
    const Tensor& e_true = teacher.cache.at(batch.ids[static_cast<std::size_t>(i)]);
    if (w.ed_enabled() && !ed_summary) tg.e_pad.push_back(pad_rows(e_true, batch.t_max));
    if (need_heads) {
      HeadOutput h = teacher.heads->forward(nullptr, e_true, kNoMask,
                                            batch.invocations[static_cast<std::size_t>(i)]);
      if (w.ed_enabled() && ed_summary) tg.z.push_back(h.summary);
      if (w.ar_enabled()) tg.alpha_pad.push_back(pad_vec(h.alpha, batch.t_max));
      if (w.pl_enabled()) tg.probs.push_back(h.probs);
    }
  }
  return tg;
}

struct LossStats {
  double ddsd = 0.0, ed = 0.0, pl = 0.0, ar = 0.0;
  int n = 0;
};

// Index 0..2 per invocation, index 3 = all.
using StatsByInv = std::array<LossStats, kInvocationCount + 1>;

void accumulate(StatsByInv& stats, InvocationType inv, double ddsd, double ed, double pl,
                double ar) {
  for (int idx : {static_cast<int>(inv), kInvocationCount}) {
    LossStats& s = stats[static_cast<std::size_t>(idx)];
    s.ddsd += ddsd;
    s.ed += ed;
    s.pl += pl;
    s.ar += ar;
    s.n += 1;
  }
}

struct MeanLosses {
  double ddsd = 0.0, ed = 0.0, pl = 0.0, ar = 0.0, total = 0.0;
};

MeanLosses means(const LossStats& s, const DistillWeights& w) {
  MeanLosses m;
  if (s.n == 0) return m;
  m.ddsd = s.ddsd / s.n;
  m.ed = s.ed / s.n;
  m.pl = s.pl / s.n;
  m.ar = s.ar / s.n;
  m.total = (w.use_ddsd ? m.ddsd : 0.0) + (w.ed_enabled() ? w.lambda_ed * m.ed : 0.0) +
            (w.pl_enabled() ? w.lambda_pl * m.pl : 0.0) +
            (w.ar_enabled() ? w.lambda_ar * m.ar : 0.0);
  return m;
}

const char* inv_label(int idx) {
  return idx == kInvocationCount ? "all"
                                 : invocation_name(static_cast<InvocationType>(idx));
}

void append_rows(std::string& csv, int epoch, const std::string& split, const StatsByInv& stats,
                 const DistillWeights& w, double lr) {
  for (int idx = 0; idx <= kInvocationCount; ++idx) {
    const MeanLosses m = means(stats[static_cast<std::size_t>(idx)], w);
    csv += std::to_string(epoch);
    csv += ',';
    csv += split;
    csv += ',';
    csv += inv_label(idx);
    csv += ',';
    csv += fmt(m.ddsd);
    csv += ',';
    csv += fmt(m.ed);
    csv += ',';
    csv += fmt(m.pl);
    csv += ',';
    csv += fmt(m.ar);
    csv += ',';
    csv += fmt(m.total);
    csv += ',';
    csv += fmt(lr);
    csv += '\n';
  }
}

double nll(const std::vector<float>& probs, int label) {
  const double p = std::max(static_cast<double>(probs[static_cast<std::size_t>(label)]), 1e-12);
  return -std::log(p);
}

/// Forward + losses for one student batch. With tape == nullptr this is a
/// pure evaluation pass; the returned breakdown then holds constants.
struct StudentBatchResult {
  LossBreakdown bd;
  StatsByInv stats{};
};

StudentBatchResult student_batch(Tape<float>* tape, const StudentSide& student,
                                 const TeacherSide* teacher, const Batch& batch,
                                 const DistillWeights& w, bool ed_summary) {
  std::vector<Tensor> embeddings;
  embeddings.reserve(static_cast<std::size_t>(batch.size));
  for (int i = 0; i < batch.size; ++i) {
    embeddings.push_back(
        student.encoder->forward(tape, batch.example(i), batch.masks[static_cast<std::size_t>(i)]));
  }
  std::vector<HeadOutput> heads =
      route(tape, *student.heads, embeddings, batch.masks, batch.invocations);

  TeacherTargets tg;
  const bool kd = teacher && (w.ed_enabled() || w.pl_enabled() || w.ar_enabled());
  if (kd) tg = make_teacher_targets(*teacher, batch, w, ed_summary);

  std::vector<Tensor> probs_s;
  std::vector<Tensor> alpha_s;
  std::vector<Tensor> ed_student;
  for (int i = 0; i < batch.size; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    probs_s.push_back(heads[ui].probs);
    if (w.ar_enabled()) alpha_s.push_back(heads[ui].alpha);
    if (w.ed_enabled()) {
      const Tensor& src = ed_summary ? heads[ui].summary : embeddings[ui];
      ed_student.push_back(student.align ? student.align->apply(tape, src) : src);
    }
  }

  StudentBatchResult r;
  Tensor d, e, p, a;
  if (w.use_ddsd) d = loss_ddsd(probs_s, batch.labels);
  if (w.ed_enabled()) {
    if (ed_summary) {
      const std::vector<Mask> one_row(static_cast<std::size_t>(batch.size), kNoMask);
      e = loss_ed(tg.z, ed_student, one_row);
    } else {
      e = loss_ed(tg.e_pad, ed_student, batch.masks);
    }
  }
  if (w.pl_enabled()) p = loss_pl(probs_s, tg.probs);
  if (w.ar_enabled()) a = loss_ar(tg.alpha_pad, alpha_s, batch.masks);
  r.bd = combine(d, e, p, a, w);

  // Per-example scalars for the metrics log. The embedding distance is
  // normalized per example here (frames x teacher width), which differs
  // from the batch-level normalization inside the objective.
  for (int i = 0; i < batch.size; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    double v_ddsd = 0.0, v_ed = 0.0, v_pl = 0.0, v_ar = 0.0;
    if (w.use_ddsd) v_ddsd = nll(probs_s[ui].values(), batch.labels[ui]);
    if (w.pl_enabled()) {
      const auto& pt = tg.probs[ui].values();
      v_pl = nll(probs_s[ui].values(), pt[1] > pt[0] ? 1 : 0);
    }
    const int t_i = batch.lengths[ui];
    if (w.ed_enabled()) {
      const auto& a_t = ed_summary ? tg.z[ui].values() : tg.e_pad[ui].values();
      const auto& a_s = ed_student[ui].values();
      const int h_t = static_cast<int>(ed_summary ? tg.z[ui].shape()[1]
                                                  : tg.e_pad[ui].shape()[1]);
      const int rows = ed_summary ? 1 : t_i;
      double sq = 0.0;
      for (int t = 0; t < rows; ++t) {
        for (int k = 0; k < h_t; ++k) {
          const auto o = static_cast<std::size_t>(t) * static_cast<std::size_t>(h_t) +
                         static_cast<std::size_t>(k);
          const double diff = static_cast<double>(a_t[o]) - static_cast<double>(a_s[o]);
          sq += diff * diff;
        }
      }
      v_ed = sq / (static_cast<double>(rows) * h_t);
    }
    if (w.ar_enabled()) {
      const auto& at = tg.alpha_pad[ui].values();
      const auto& as = alpha_s[ui].values();
      double sq = 0.0;
      for (int t = 0; t < t_i; ++t) {
        const auto ut = static_cast<std::size_t>(t);
        const double diff = static_cast<double>(at[ut]) - static_cast<double>(as[ut]);
        sq += diff * diff;
      }
      v_ar = sq;
    }
    accumulate(r.stats, batch.invocations[ui], v_ddsd, v_ed, v_pl, v_ar);
  }
  return r;
}

/// Teacher adapter forward + cross-entropy for one batch, from cached
/// frozen-encoder embeddings at true length. tape == nullptr evaluates.
struct TeacherBatchResult {
  Tensor loss;
  StatsByInv stats{};
};

TeacherBatchResult teacher_batch(Tape<float>* tape, const TeacherSide& teacher,
                                 const Batch& batch) {
  std::vector<Tensor> probs;
  probs.reserve(static_cast<std::size_t>(batch.size));
  for (int i = 0; i < batch.size; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const Tensor& e_true = teacher.cache.at(batch.ids[ui]);
    probs.push_back(teacher.heads->forward(tape, e_true, kNoMask, batch.invocations[ui]).probs);
  }
  TeacherBatchResult r;
  r.loss = loss_ddsd(probs, batch.labels);
  for (int i = 0; i < batch.size; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    accumulate(r.stats, batch.invocations[ui], nll(probs[ui].values(), batch.labels[ui]), 0.0,
               0.0, 0.0);
  }
  return r;
}

StatsByInv merge_stats(const StatsByInv& a, const StatsByInv& b) {
  StatsByInv out = a;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].ddsd += b[i].ddsd;
    out[i].ed += b[i].ed;
    out[i].pl += b[i].pl;
    out[i].ar += b[i].ar;
    out[i].n += b[i].n;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint plumbing for training runs
// ---------------------------------------------------------------------------

constexpr const char* kCsvHeader =
    "epoch,split,invocation,loss_ddsd,loss_ed,loss_pl,loss_ar,total,lr\n";

struct TrainState {
  const RunConfig* config = nullptr;
  StudentSide* student = nullptr;   // null in teacher-only pipelines
  TeacherSide* teacher = nullptr;   // null in baseline
  Adam* student_opt = nullptr;
  Adam* teacher_opt = nullptr;
  PlateauScheduler* scheduler = nullptr;
  Adam* sched_opt = nullptr;        // optimizer the scheduler drives
  Rng* order_rng = nullptr;
  int start_epoch = 0;
  float best_val = 0.0f;
  bool has_best_val = false;
};

Checkpoint make_state(const TrainState& st, int completed_epochs) {
  Checkpoint ckpt;
  ckpt.epoch = completed_epochs;
  ckpt.has_best_val = st.has_best_val;
  ckpt.best_val = st.best_val;
  ckpt.info["pipeline"] = st.config->pipeline;
  ckpt.info["config"] = run_config_to_json(*st.config);
  if (st.student) capture_params(*st.student->store, ckpt);
  if (st.teacher) capture_params(*st.teacher->store, ckpt);
  if (st.student_opt) ckpt.optimizers["student"] = capture_optimizer(*st.student_opt);
  if (st.teacher_opt) ckpt.optimizers["teacher"] = capture_optimizer(*st.teacher_opt);
  if (st.scheduler) ckpt.schedulers["model"] = capture_scheduler(*st.scheduler);
  ckpt.rng_states["order"] = rng_state_string(*st.order_rng);
  return ckpt;
}

void restore_state(const std::string& path, TrainState& st) {
  const Checkpoint ckpt = load_checkpoint(path);
  if (st.student) restore_params(ckpt, "student.", *st.student->store);
  if (st.teacher) restore_params(ckpt, "teacher.", *st.teacher->store);
  if (st.student_opt) {
    auto it = ckpt.optimizers.find("student");
    if (it == ckpt.optimizers.end()) {
      throw ParseError(path + ": checkpoint has no student optimizer state");
    }
    restore_optimizer(it->second, "student", *st.student_opt);
  }
  if (st.teacher_opt) {
    auto it = ckpt.optimizers.find("teacher");
    if (it == ckpt.optimizers.end()) {
      throw ParseError(path + ": checkpoint has no teacher optimizer state");
    }
    restore_optimizer(it->second, "teacher", *st.teacher_opt);
  }
  if (st.scheduler) {
    auto it = ckpt.schedulers.find("model");
    if (it != ckpt.schedulers.end()) restore_scheduler(it->second, *st.scheduler);
  }
  auto rit = ckpt.rng_states.find("order");
  if (rit == ckpt.rng_states.end()) {
    throw ParseError(path + ": checkpoint has no data-order RNG state");
  }
  *st.order_rng = rng_from_state_string(rit->second);
  st.start_epoch = ckpt.epoch;
  st.has_best_val = ckpt.has_best_val;
  st.best_val = ckpt.best_val;
}

// ---------------------------------------------------------------------------
// The shared epoch loop
// ---------------------------------------------------------------------------

struct LoopPlan {
  bool teacher_step_per_batch = false;  // adaptive with teacher.ce
  bool teacher_is_model = false;        // teacher_adapters: CE-train the teacher
  bool log_teacher_val = false;         // adaptive: extra val_teacher rows
  std::string frozen_prefix;            // hash-checked teacher prefix, may be empty
  DistillWeights weights;
  bool ed_summary = false;
};

RunResult run_epochs(TrainState& st, const LoopPlan& plan, const SplitData& data,
                     const std::string& out_dir) {
  const RunConfig& config = *st.config;
  std::filesystem::create_directories(out_dir);

  const std::uint64_t frozen_ref =
      plan.frozen_prefix.empty() ? 0
                                 : st.teacher->store->values_hash_prefix(plan.frozen_prefix);

  const std::vector<Batch> val_batches =
      make_batches_sequential(data.val, kEvalBatchSize, config.splice_context);

  RunResult result;
  result.checkpoint_last = out_dir + "/last.ckpt";
  result.checkpoint_best = out_dir + "/best.ckpt";
  result.metrics_path = out_dir + "/metrics.csv";
  std::string csv = kCsvHeader;
  bool wrote_best = false;

  for (int epoch = st.start_epoch; epoch < config.epochs; ++epoch) {
    const std::vector<Batch> batches =
        make_batches(data.train, config.batch_size, config.splice_context, *st.order_rng);
    StatsByInv train_stats{};

    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch& batch = batches[bi];
      try {
        if (plan.teacher_step_per_batch) {
          Tape<float> teacher_tape;
          TeacherBatchResult tb = teacher_batch(&teacher_tape, *st.teacher, batch);
          st.teacher_opt->zero_grad();
          teacher_tape.backward(tb.loss);
          st.teacher_opt->step();
        }
        if (st.student) {
          if (st.teacher) st.teacher->store->set_guard_prefix("teacher.heads", true);
          Tape<float> tape;
          StudentBatchResult sb =
              student_batch(&tape, *st.student, st.teacher, batch, plan.weights, plan.ed_summary);
          st.student_opt->zero_grad();
          tape.backward(sb.bd.total);
          st.student_opt->step();
          if (st.teacher) st.teacher->store->set_guard_prefix("teacher.heads", false);
          train_stats = merge_stats(train_stats, sb.stats);
        } else if (plan.teacher_is_model) {
          Tape<float> tape;
          TeacherBatchResult tb = teacher_batch(&tape, *st.teacher, batch);
          st.teacher_opt->zero_grad();
          tape.backward(tb.loss);
          st.teacher_opt->step();
          train_stats = merge_stats(train_stats, tb.stats);
        }
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch + 1) + " batch " +
                           std::to_string(bi + 1) + ": " + e.what());
      }
    }

    // Validation under the post-epoch parameters.
    StatsByInv val_stats{};
    for (const Batch& batch : val_batches) {
      if (st.student) {
        val_stats = merge_stats(
            val_stats,
            student_batch(nullptr, *st.student, st.teacher, batch, plan.weights, plan.ed_summary)
                .stats);
      } else {
        val_stats = merge_stats(val_stats, teacher_batch(nullptr, *st.teacher, batch).stats);
      }
    }

    const double lr_now = st.sched_opt->lr();
    append_rows(csv, epoch + 1, "train", train_stats, plan.weights, lr_now);
    append_rows(csv, epoch + 1, "val", val_stats, plan.weights, lr_now);
    if (plan.log_teacher_val) {
      StatsByInv tv{};
      for (const Batch& batch : val_batches) {
        tv = merge_stats(tv, teacher_batch(nullptr, *st.teacher, batch).stats);
      }
      append_rows(csv, epoch + 1, "val_teacher", tv, DistillWeights{}, st.teacher_opt->lr());
    }

    const float val_total =
        static_cast<float>(means(val_stats[kInvocationCount], plan.weights).total);
    result.final_val_total = val_total;
    st.sched_opt->set_lr(st.scheduler->update(val_total, st.sched_opt->lr()));

    if (!plan.frozen_prefix.empty() &&
        st.teacher->store->values_hash_prefix(plan.frozen_prefix) != frozen_ref) {
      throw FreezeViolation("teacher parameters under '" + plan.frozen_prefix +
                            "' changed during pipeline '" + config.pipeline + "'");
    }

    if (!st.has_best_val || val_total < st.best_val) {
      st.has_best_val = true;
      st.best_val = val_total;
      save_checkpoint(make_state(st, epoch + 1), result.checkpoint_best);
      wrote_best = true;
    }
    save_checkpoint(make_state(st, epoch + 1), result.checkpoint_last);
    write_text_file(result.metrics_path, csv);
    result.epochs_run = epoch + 1 - st.start_epoch;
  }

  if (config.epochs <= st.start_epoch) {
    // Degenerate run: still leave a valid checkpoint behind.
    save_checkpoint(make_state(st, st.start_epoch), result.checkpoint_last);
    write_text_file(result.metrics_path, csv);
  }
  if (!wrote_best && !std::filesystem::exists(result.checkpoint_best)) {
    result.checkpoint_best = result.checkpoint_last;
  }
  result.best_val_total = st.best_val;
  result.metrics_csv = csv;
  return result;
}

// ---------------------------------------------------------------------------
// Model assembly
// ---------------------------------------------------------------------------

EncoderConfig preset_for(const std::string& name) {
  return encoder_preset(name);  // unknown preset -> ConfigError
}

/// Loads the teacher store from config.teacher.checkpoint: encoder params
/// are required, adapters come from teacher.adapters_from, or the same
/// checkpoint, or (when `allow_fresh`) a fresh initialization.
void load_teacher(const RunConfig& config, ParamStore& store, bool allow_fresh,
                  bool& fresh_adapters) {
  const Checkpoint ckpt = load_checkpoint(config.teacher.checkpoint);
  auto snap_it = ckpt.info.find("config");
  if (snap_it != ckpt.info.end()) {
    const RunConfig snap = run_config_from_json(snap_it->second, config.teacher.checkpoint);
    if (snap.teacher.preset != config.teacher.preset) {
      throw ConfigError("teacher checkpoint was trained with preset '" + snap.teacher.preset +
                        "', config asks for '" + config.teacher.preset + "'");
    }
  }
  bool has_enc = false;
  bool has_heads = false;
  for (const auto& p : ckpt.params) {
    has_enc = has_enc || p.name.rfind("teacher.enc.", 0) == 0;
    has_heads = has_heads || p.name.rfind("teacher.heads.", 0) == 0;
  }
  if (!has_enc) {
    throw ConfigError(config.teacher.checkpoint + ": no teacher encoder parameters found");
  }
  restore_params(ckpt, "teacher.enc.", store);

  if (!config.teacher.adapters_from.empty()) {
    const Checkpoint warm = load_checkpoint(config.teacher.adapters_from);
    bool any = false;
    for (const auto& p : warm.params) any = any || p.name.rfind("teacher.heads.", 0) == 0;
    if (!any) {
      throw ConfigError(config.teacher.adapters_from + ": no teacher adapter parameters found");
    }
    restore_params(warm, "teacher.heads.", store);
    fresh_adapters = false;
  } else if (has_heads) {
    restore_params(ckpt, "teacher.heads.", store);
    fresh_adapters = false;
  } else if (allow_fresh) {
    fresh_adapters = true;
  } else {
    throw ConfigError(config.teacher.checkpoint +
                      ": checkpoint has no trained teacher adapters; run the "
                      "teacher_adapters pipeline first or set teacher.adapters_from");
  }
  store.freeze_prefix("teacher.enc");
}

}  // namespace

// ---------------------------------------------------------------------------
// Pipelines
// ---------------------------------------------------------------------------

RunResult train_baseline(const RunConfig& config, const std::string& out_dir) {
  config.validate();
  const SplitData data = load_training_data(config);

  ParamStore sstore;
  Rng srng(substream(config.seed, "student"));
  const EncoderConfig scfg = preset_for(config.student.preset);
  check_spliced_dim(data.train, config.splice_context, scfg, "student encoder");
  Encoder senc(scfg, "student.enc", sstore, &srng);
  AdapterBank sheads(scfg.hidden, config.adapter_depth, "student.heads", sstore, &srng);

  StudentSide student{&sstore, &senc, &sheads, nullptr};
  Adam sopt(sstore.all(), AdamConfig{config.student.lr});
  PlateauScheduler sched(config.scheduler);
  Rng order(substream(config.seed, "pipeline"));

  TrainState st;
  st.config = &config;
  st.student = &student;
  st.student_opt = &sopt;
  st.scheduler = &sched;
  st.sched_opt = &sopt;
  st.order_rng = &order;
  if (!config.resume_from.empty()) restore_state(config.resume_from, st);

  LoopPlan plan;
  plan.weights = config.weights;
  return run_epochs(st, plan, data, out_dir);
}

RunResult train_teacher_adapters(const RunConfig& config, const std::string& out_dir) {
  config.validate();
  const SplitData data = load_training_data(config);

  ParamStore tstore;
  bool fresh = false;
  load_teacher(config, tstore, /*allow_fresh=*/true, fresh);
  Rng trng(substream(config.seed, "teacher"));
  const EncoderConfig tcfg = preset_for(config.teacher.preset);
  check_spliced_dim(data.train, config.splice_context, tcfg, "teacher encoder");
  Encoder tenc(tcfg, "teacher.enc", tstore, nullptr);
  AdapterBank theads(tcfg.hidden, config.adapter_depth, "teacher.heads", tstore,
                     fresh ? &trng : nullptr);

  TeacherSide teacher{&tstore, &tenc, &theads, {}};
  build_teacher_cache(teacher, data.train, config.splice_context);
  build_teacher_cache(teacher, data.val, config.splice_context);

  Adam topt(tstore.with_prefix("teacher.heads"), AdamConfig{config.teacher.lr});
  PlateauScheduler sched(config.scheduler);
  Rng order(substream(config.seed, "pipeline"));

  TrainState st;
  st.config = &config;
  st.teacher = &teacher;
  st.teacher_opt = &topt;
  st.scheduler = &sched;
  st.sched_opt = &topt;
  st.order_rng = &order;
  if (!config.resume_from.empty()) restore_state(config.resume_from, st);

  LoopPlan plan;
  plan.teacher_is_model = true;
  plan.frozen_prefix = "teacher.enc";
  plan.weights = config.weights;  // cross-entropy only, enforced by validate()
  return run_epochs(st, plan, data, out_dir);
}

namespace {

RunResult distill_common(const RunConfig& config, const std::string& out_dir, bool adaptive) {
  config.validate();
  const SplitData data = load_training_data(config);

  // Teacher: frozen pretrained encoder plus adapters. In the conventional
  // pipeline the adapters are part of the fixed teacher; adaptively they
  // keep training, so fresh initialization is allowed.
  ParamStore tstore;
  bool fresh = false;
  load_teacher(config, tstore, /*allow_fresh=*/adaptive, fresh);
  Rng trng(substream(config.seed, "teacher"));
  const EncoderConfig tcfg = preset_for(config.teacher.preset);
  check_spliced_dim(data.train, config.splice_context, tcfg, "teacher encoder");
  Encoder tenc(tcfg, "teacher.enc", tstore, nullptr);
  AdapterBank theads(tcfg.hidden, config.adapter_depth, "teacher.heads", tstore,
                     fresh ? &trng : nullptr);
  if (!adaptive) tstore.freeze_prefix("teacher.heads");

  TeacherSide teacher{&tstore, &tenc, &theads, {}};
  build_teacher_cache(teacher, data.train, config.splice_context);
  build_teacher_cache(teacher, data.val, config.splice_context);

  // Student: fresh, with a width-alignment map only when the embedding
  // distance term is active.
  ParamStore sstore;
  Rng srng(substream(config.seed, "student"));
  const EncoderConfig scfg = preset_for(config.student.preset);
  check_spliced_dim(data.train, config.splice_context, scfg, "student encoder");
  Encoder senc(scfg, "student.enc", sstore, &srng);
  AdapterBank sheads(scfg.hidden, config.adapter_depth, "student.heads", sstore, &srng);
  std::unique_ptr<AlignProjection> align;
  if (config.weights.ed_enabled()) {
    align = std::make_unique<AlignProjection>(scfg.hidden, tcfg.hidden, "student.align", sstore,
                                              &srng);
  }

  StudentSide student{&sstore, &senc, &sheads, align.get()};
  Adam sopt(sstore.all(), AdamConfig{config.student.lr});
  std::unique_ptr<Adam> topt;
  if (adaptive) {
    topt = std::make_unique<Adam>(tstore.with_prefix("teacher.heads"),
                                  AdamConfig{config.teacher.lr});
  }
  PlateauScheduler sched(config.scheduler);
  Rng order(substream(config.seed, "pipeline"));

  TrainState st;
  st.config = &config;
  st.student = &student;
  st.teacher = &teacher;
  st.student_opt = &sopt;
  st.teacher_opt = topt.get();
  st.scheduler = &sched;
  st.sched_opt = &sopt;
  st.order_rng = &order;
  if (!config.resume_from.empty()) restore_state(config.resume_from, st);

  LoopPlan plan;
  plan.teacher_step_per_batch = adaptive && config.teacher.ce;
  plan.log_teacher_val = adaptive;
  plan.frozen_prefix = adaptive ? "teacher.enc" : "teacher.";
  plan.weights = config.weights;
  plan.ed_summary = config.ed_target == "summary";
  return run_epochs(st, plan, data, out_dir);
}

}  // namespace

RunResult distill_conventional(const RunConfig& config, const std::string& out_dir) {
  return distill_common(config, out_dir, /*adaptive=*/false);
}

RunResult distill_adaptive(const RunConfig& config, const std::string& out_dir) {
  return distill_common(config, out_dir, /*adaptive=*/true);
}

// ---------------------------------------------------------------------------
// Teacher encoder pretraining (auxiliary frame-tagging task)
// ---------------------------------------------------------------------------

RunResult pretrain_teacher_encoder(const RunConfig& config, const std::string& out_dir) {
  config.validate();
  if (config.generator.n_aux < 1) {
    throw ConfigError("pretrain_teacher requires generator.n_aux >= 1");
  }
  std::filesystem::create_directories(out_dir);

  const GeneratorConfig gen =
      config.generator.make_config(substream(config.seed, "aux-data"));
  const std::vector<AuxSequence> aux = generate_aux(gen, config.generator.n_aux);

  std::vector<const AuxSequence*> train_set, val_set;
  for (const AuxSequence& a : aux) {
    (fnv1a64(a.seq.id) % 10 == 9 ? val_set : train_set).push_back(&a);
  }
  if (train_set.empty() || val_set.empty()) {
    throw ConfigError("aux id-hash split left a side empty; raise generator.n_aux");
  }

  ParamStore store;
  Rng trng(substream(config.seed, "teacher"));
  const EncoderConfig tcfg = preset_for(config.teacher.preset);
  const int in_dim = spliced_dim(gen.dim, config.splice_context);
  if (in_dim != tcfg.input_dim) {
    throw ConfigError("teacher encoder expects input width " + std::to_string(tcfg.input_dim) +
                      ", but the generator yields " + std::to_string(in_dim));
  }
  Encoder enc(tcfg, "teacher.enc", store, &trng);

  // Per-frame tagging head; discarded after pretraining.
  const float bound = 1.0f / std::sqrt(static_cast<float>(tcfg.hidden));
  std::vector<float> w_init(static_cast<std::size_t>(tcfg.hidden) * kAuxTagCount);
  for (float& v : w_init) v = static_cast<float>(uniform_range(trng, -bound, bound));
  Variable& aux_w = store.create("teacher.aux.w", Shape{tcfg.hidden, kAuxTagCount},
                                 std::move(w_init));
  Variable& aux_b = store.create("teacher.aux.b", Shape{kAuxTagCount},
                                 std::vector<float>(kAuxTagCount, 0.0f));

  Adam opt(store.all(), AdamConfig{config.teacher.lr});
  PlateauScheduler sched(config.scheduler);
  Rng order(substream(config.seed, "pipeline"));

  const auto example_loss = [&](Tape<float>* tape, const AuxSequence& a) {
    Tensor x(Shape{a.seq.t, in_dim}, splice(a.seq, config.splice_context));
    Tensor e = enc.forward(tape, x, kNoMask);
    Tensor logits = add_rowwise(matmul(e, tape ? aux_w.use(*tape) : aux_w.constant()),
                                tape ? aux_b.use(*tape) : aux_b.constant());
    Tensor probs = softmax_rows(logits, kNoMask);
    return masked_nll_rows(probs, a.tags, kNoMask);
  };

  RunResult result;
  result.checkpoint_last = out_dir + "/teacher_encoder.ckpt";
  result.checkpoint_best = result.checkpoint_last;
  result.metrics_path = out_dir + "/metrics.csv";
  std::string csv = kCsvHeader;

  std::vector<int> idx(train_set.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_in_place(idx, order);
    StatsByInv train_stats{};
    for (std::size_t start = 0; start < idx.size(); start += config.batch_size) {
      const std::size_t end = std::min(idx.size(), start + config.batch_size);
      try {
        Tape<float> tape;
        Tensor total;
        StatsByInv batch_stats{};
        for (std::size_t k = start; k < end; ++k) {
          const AuxSequence& a = *train_set[static_cast<std::size_t>(idx[k])];
          Tensor li = example_loss(&tape, a);
          accumulate(batch_stats, a.seq.invocation, li.value(), 0.0, 0.0, 0.0);
          total = total.defined() ? add(total, li) : li;
        }
        total = scale(total, 1.0f / static_cast<float>(end - start));
        opt.zero_grad();
        tape.backward(total);
        opt.step();
        train_stats = merge_stats(train_stats, batch_stats);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch + 1) + " batch " +
                           std::to_string(start / config.batch_size + 1) + ": " + e.what());
      }
    }

    StatsByInv val_stats{};
    for (const AuxSequence* a : val_set) {
      Tensor li = example_loss(nullptr, *a);
      accumulate(val_stats, a->seq.invocation, li.value(), 0.0, 0.0, 0.0);
    }

    const double lr_now = opt.lr();
    append_rows(csv, epoch + 1, "train", train_stats, config.weights, lr_now);
    append_rows(csv, epoch + 1, "val", val_stats, config.weights, lr_now);
    const float val_total =
        static_cast<float>(means(val_stats[kInvocationCount], config.weights).total);
    result.final_val_total = val_total;
    if (!result.epochs_run || val_total < result.best_val_total) {
      result.best_val_total = val_total;
    }
    opt.set_lr(sched.update(val_total, opt.lr()));
    result.epochs_run = epoch + 1;
    write_text_file(result.metrics_path, csv);
  }
  result.metrics_csv = csv;

  store.freeze_prefix("teacher.enc");
  Checkpoint ckpt;
  ckpt.epoch = config.epochs;
  ckpt.info["pipeline"] = config.pipeline;
  ckpt.info["config"] = run_config_to_json(config);
  for (const Variable* p : std::as_const(store).all()) {
    if (p->name().rfind("teacher.enc.", 0) != 0) continue;
    Checkpoint::Param cp;
    cp.name = p->name();
    cp.shape = p->shape();
    cp.frozen = true;
    cp.values = p->values();
    ckpt.params.push_back(std::move(cp));
  }
  save_checkpoint(ckpt, result.checkpoint_last);
  if (config.epochs == 0) write_text_file(result.metrics_path, csv);
  return result;
}

RunResult run_pipeline(const RunConfig& config, const std::string& out_dir) {
  config.validate();
  if (config.pipeline == "baseline") return train_baseline(config, out_dir);
  if (config.pipeline == "teacher_adapters") return train_teacher_adapters(config, out_dir);
  if (config.pipeline == "conventional_kd") return distill_conventional(config, out_dir);
  if (config.pipeline == "adaptive_kd") return distill_adaptive(config, out_dir);
  return pretrain_teacher_encoder(config, out_dir);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

LoadedModel load_model(const std::string& checkpoint_path, const std::string& which) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);

  bool has_student = false;
  bool has_teacher_heads = false;
  for (const auto& p : ckpt.params) {
    has_student = has_student || p.name.rfind("student.", 0) == 0;
    has_teacher_heads = has_teacher_heads || p.name.rfind("teacher.heads.", 0) == 0;
  }
  std::string side = which;
  if (side.empty()) {
    side = has_student ? "student" : "teacher";
  }
  if (side != "student" && side != "teacher") {
    throw ConfigError("model side must be 'student' or 'teacher', got '" + side + "'");
  }
  if (side == "student" && !has_student) {
    throw ConfigError(checkpoint_path + ": checkpoint holds no student parameters");
  }
  if (side == "teacher" && !has_teacher_heads) {
    throw ConfigError(checkpoint_path + ": checkpoint holds no trained teacher adapters");
  }

  auto snap_it = ckpt.info.find("config");
  if (snap_it == ckpt.info.end()) {
    throw ParseError(checkpoint_path + ": checkpoint carries no config snapshot");
  }
  const RunConfig snap = run_config_from_json(snap_it->second, checkpoint_path);

  LoadedModel m;
  m.which = side;
  m.splice_context = snap.splice_context;
  m.encoder_config =
      encoder_preset(side == "student" ? snap.student.preset : snap.teacher.preset);
  m.store = std::make_unique<ParamStore>();
  restore_params(ckpt, side + ".", *m.store);
  m.encoder = std::make_unique<Encoder>(m.encoder_config, side + ".enc", *m.store, nullptr);
  m.heads = std::make_unique<AdapterBank>(m.encoder_config.hidden, snap.adapter_depth,
                                          side + ".heads", *m.store, nullptr);
  return m;
}

std::array<ScoredSet, kInvocationCount> score_dataset(const LoadedModel& model,
                                                      const Dataset& dataset, int batch_size) {
  check_spliced_dim(dataset, model.splice_context, model.encoder_config,
                    std::string(model.which) + " model");
  std::array<ScoredSet, kInvocationCount> sets;
  for (const Batch& batch : make_batches_sequential(dataset, batch_size, model.splice_context)) {
    for (int i = 0; i < batch.size; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      Tensor e = model.encoder->forward(nullptr, batch.example(i), batch.masks[ui]);
      HeadOutput h = model.heads->forward(nullptr, e, batch.masks[ui], batch.invocations[ui]);
      sets[static_cast<std::size_t>(batch.invocations[ui])].add(
          static_cast<double>(h.probs.values()[1]), batch.labels[ui]);
    }
  }
  return sets;
}

EvalResult evaluate_checkpoint(const std::string& checkpoint_path, const std::string& data_path,
                               const std::string& out_dir, const std::string& which) {
  const LoadedModel model = load_model(checkpoint_path, which);
  const Dataset dataset = load_nonempty(data_path, "evaluation");
  std::filesystem::create_directories(out_dir);

  const auto sets = score_dataset(model, dataset, kEvalBatchSize);
  EvalResult result;
  for (int i = 0; i < kInvocationCount; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const InvocationType inv = static_cast<InvocationType>(i);
    const EerResult r = eer(sets[ui]);
    auto& row = result.per_invocation[ui];
    row.invocation = invocation_name(inv);
    row.eer = r.value;
    row.threshold = r.threshold;
    row.count = static_cast<int>(sets[ui].scores.size());
    row.det_path = out_dir + "/" + det_filename(row.invocation);
    write_text_file(row.det_path, det_csv(det_curve(sets[ui])));
  }
  return result;
}

}  // namespace akd
