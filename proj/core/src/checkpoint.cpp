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

#include "akd/checkpoint.hpp"

#include <cstring>
#include <string>
#include <vector>

#include "akd/error.hpp"
#include "akd/util.hpp"
#include "json.hpp"

namespace akd {
namespace {

using Json = nlohmann::ordered_json;

std::size_t shape_count(const Shape& shape) {
  std::size_t n = 1;
  for (std::int64_t d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

// Floats travel as shortest round-trip strings so values survive
// serialization bitwise regardless of the JSON library's number handling.
std::string pack_floats(const std::vector<float>& values) {
  std::string out;
  out.reserve(values.size() * 10);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out.push_back(' ');
    out += format_float(values[i]);
  }
  return out;
}

std::vector<float> unpack_floats(const std::string& text, const std::string& context) {
  std::vector<float> out;
  for (std::string_view tok : split_view(text, ' ')) {
    if (tok.empty()) continue;
    out.push_back(parse_float(tok, context));
  }
  return out;
}

const Json& expect(const Json& obj, const char* key, const std::string& context) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ParseError(context + ": missing field '" + key + "'");
  }
  return *it;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  Json root;
  root["format"] = "akd-checkpoint";
  root["version"] = ckpt.version;
  root["epoch"] = ckpt.epoch;
  if (ckpt.has_best_val) root["best_val"] = format_float(ckpt.best_val);
  Json info = Json::object();
  for (const auto& [k, v] : ckpt.info) info[k] = v;
  root["info"] = std::move(info);

  Json params = Json::array();
  for (const auto& p : ckpt.params) {
    Json jp;
    jp["name"] = p.name;
    jp["shape"] = p.shape;
    jp["frozen"] = p.frozen;
    jp["values"] = pack_floats(p.values);
    params.push_back(std::move(jp));
  }
  root["params"] = std::move(params);

  Json opts = Json::object();
  for (const auto& [name, st] : ckpt.optimizers) {
    Json jo;
    jo["step"] = st.step;
    jo["lr"] = format_float(st.lr);
    jo["params"] = st.param_names;
    Json m = Json::array();
    Json v = Json::array();
    for (const auto& slot : st.slots) {
      m.push_back(pack_floats(slot.m));
      v.push_back(pack_floats(slot.v));
    }
    jo["m"] = std::move(m);
    jo["v"] = std::move(v);
    opts[name] = std::move(jo);
  }
  root["optimizers"] = std::move(opts);

  Json scheds = Json::object();
  for (const auto& [name, st] : ckpt.schedulers) {
    Json js;
    js["has_best"] = st.has_best;
    js["best"] = format_float(st.best);
    js["since"] = st.epochs_since_improve;
    scheds[name] = std::move(js);
  }
  root["schedulers"] = std::move(scheds);

  Json rng = Json::object();
  for (const auto& [name, state] : ckpt.rng_states) rng[name] = state;
  root["rng"] = std::move(rng);

  return root.dump(1) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text, const std::string& context) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const std::exception& e) {
    throw ParseError(context + ": invalid JSON: " + e.what());
  }
  if (!root.is_object()) throw ParseError(context + ": top level is not an object");
  if (expect(root, "format", context).get<std::string>() != "akd-checkpoint") {
    throw ParseError(context + ": not an akd checkpoint file");
  }

  Checkpoint ckpt;
  ckpt.version = expect(root, "version", context).get<int>();
  if (ckpt.version != kCheckpointVersion) {
    throw ParseError(context + ": checkpoint version " + std::to_string(ckpt.version) +
                     " is not supported; this build reads version " +
                     std::to_string(kCheckpointVersion));
  }
  ckpt.epoch = expect(root, "epoch", context).get<int>();
  if (root.contains("best_val")) {
    ckpt.has_best_val = true;
    ckpt.best_val = parse_float(root["best_val"].get<std::string>(), context + ": best_val");
  }

  for (const auto& [k, v] : expect(root, "info", context).items()) {
    ckpt.info[k] = v.get<std::string>();
  }

  for (const auto& jp : expect(root, "params", context)) {
    Checkpoint::Param p;
    p.name = expect(jp, "name", context).get<std::string>();
    const std::string pctx = context + ": parameter '" + p.name + "'";
    for (const auto& d : expect(jp, "shape", pctx)) {
      p.shape.push_back(d.get<std::int64_t>());
    }
    p.frozen = expect(jp, "frozen", pctx).get<bool>();
    p.values = unpack_floats(expect(jp, "values", pctx).get<std::string>(), pctx);
    if (p.values.size() != shape_count(p.shape)) {
      throw ParseError(pctx + ": expected " + std::to_string(shape_count(p.shape)) +
                       " values, found " + std::to_string(p.values.size()));
    }
    ckpt.params.push_back(std::move(p));
  }

  for (const auto& [name, jo] : expect(root, "optimizers", context).items()) {
    const std::string octx = context + ": optimizer '" + name + "'";
    Checkpoint::OptimizerState st;
    st.step = expect(jo, "step", octx).get<std::int64_t>();
    st.lr = parse_float(expect(jo, "lr", octx).get<std::string>(), octx + ": lr");
    for (const auto& n : expect(jo, "params", octx)) {
      st.param_names.push_back(n.get<std::string>());
    }
    const Json& m = expect(jo, "m", octx);
    const Json& v = expect(jo, "v", octx);
    if (m.size() != st.param_names.size() || v.size() != st.param_names.size()) {
      throw ParseError(octx + ": slot count does not match parameter count");
    }
    for (std::size_t i = 0; i < st.param_names.size(); ++i) {
      Adam::Slot slot;
      slot.m = unpack_floats(m[i].get<std::string>(), octx);
      slot.v = unpack_floats(v[i].get<std::string>(), octx);
      if (slot.m.size() != slot.v.size()) {
        throw ParseError(octx + ": slot '" + st.param_names[i] + "' moment sizes disagree");
      }
      st.slots.push_back(std::move(slot));
    }
    ckpt.optimizers[name] = std::move(st);
  }

  for (const auto& [name, js] : expect(root, "schedulers", context).items()) {
    const std::string sctx = context + ": scheduler '" + name + "'";
    Checkpoint::SchedulerState st;
    st.has_best = expect(js, "has_best", sctx).get<bool>();
    st.best = parse_float(expect(js, "best", sctx).get<std::string>(), sctx + ": best");
    st.epochs_since_improve = expect(js, "since", sctx).get<int>();
    ckpt.schedulers[name] = st;
  }

  for (const auto& [name, state] : expect(root, "rng", context).items()) {
    ckpt.rng_states[name] = state.get<std::string>();
  }

  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  write_text_file(path, checkpoint_to_json(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
  return checkpoint_from_json(read_text_file(path), path);
}

void capture_params(const ParamStore& store, Checkpoint& ckpt) {
  for (const Variable* p : store.all()) {
    Checkpoint::Param cp;
    cp.name = p->name();
    cp.shape = p->shape();
    cp.frozen = p->frozen();
    cp.values = p->values();
    ckpt.params.push_back(std::move(cp));
  }
}

Checkpoint::OptimizerState capture_optimizer(const Adam& opt) {
  Checkpoint::OptimizerState st;
  st.step = opt.step_count();
  st.lr = opt.lr();
  st.slots = opt.slots();
  for (const Variable* p : opt.params()) st.param_names.push_back(p->name());
  return st;
}

Checkpoint::SchedulerState capture_scheduler(const PlateauScheduler& sched) {
  Checkpoint::SchedulerState st;
  st.has_best = sched.has_best();
  st.best = sched.best_metric();
  st.epochs_since_improve = sched.epochs_since_improve();
  return st;
}

void restore_params(const Checkpoint& ckpt, const std::string& prefix, ParamStore& store) {
  for (const auto& p : ckpt.params) {
    if (p.name.rfind(prefix, 0) != 0) continue;
    Variable* existing = store.find(p.name);
    if (existing) {
      if (existing->shape() != p.shape) {
        throw DimensionError("restore " + p.name + ": checkpoint shape " +
                             shape_str(p.shape) + " != existing " +
                             shape_str(existing->shape()));
      }
      existing->values() = p.values;
      existing->set_frozen(p.frozen);
    } else {
      Variable& v = store.create(p.name, p.shape, p.values);
      v.set_frozen(p.frozen);
    }
  }
}

void restore_optimizer(const Checkpoint::OptimizerState& state, const std::string& name,
                       Adam& opt) {
  const auto& params = opt.params();
  if (params.size() != state.param_names.size()) {
    throw ParseError("optimizer '" + name + "': checkpoint holds " +
                     std::to_string(state.param_names.size()) + " slots, model has " +
                     std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->name() != state.param_names[i]) {
      throw ParseError("optimizer '" + name + "': slot " + std::to_string(i) + " is for '" +
                       state.param_names[i] + "', model expects '" + params[i]->name() + "'");
    }
    if (state.slots[i].m.size() != params[i]->numel()) {
      throw ParseError("optimizer '" + name + "': slot '" + state.param_names[i] +
                       "' size does not match parameter");
    }
  }
  opt.restore(state.slots, state.step);
  opt.set_lr(state.lr);
}

void restore_scheduler(const Checkpoint::SchedulerState& state, PlateauScheduler& sched) {
  sched.restore(state.has_best, state.best, state.epochs_since_improve);
}

std::uint64_t checkpoint_params_hash(const Checkpoint& ckpt, const std::string& prefix) {
  // Same fold as ParamStore::values_hash_prefix, so a captured checkpoint
  // hashes identically to the live store it came from.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : ckpt.params) {
    if (p.name.rfind(prefix, 0) != 0) continue;
    h = fnv1a64(p.name.data(), p.name.size(), h);
    h = fnv1a64(p.values.data(), p.values.size() * sizeof(float), h);
  }
  return h;
}

}  // namespace akd
