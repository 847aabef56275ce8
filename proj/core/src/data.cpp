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

#include "akd/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "akd/error.hpp"
#include "akd/util.hpp"

namespace akd {

const char* invocation_name(InvocationType t) {
  switch (t) {
    case InvocationType::HAG: return "HAG";
    case InvocationType::AG: return "AG";
    case InvocationType::FCO: return "FCO";
  }
  throw ContractError("invocation_name: invalid invocation value");
}

InvocationType invocation_from_name(const std::string& name) {
  if (name == "HAG") return InvocationType::HAG;
  if (name == "AG") return InvocationType::AG;
  if (name == "FCO") return InvocationType::FCO;
  throw ParseError("unknown invocation type: '" + name + "'");
}

void GeneratorConfig::validate() const {
  if (dim < 1) throw ConfigError("generator: dim must be >= 1");
  if (t_min < 1 || t_max < t_min) throw ConfigError("generator: bad length range");
  if (class_balance < 0.0f || class_balance > 1.0f) {
    throw ConfigError("generator: class_balance must lie in [0, 1]");
  }
  if (noise_scale < 0.0f) throw ConfigError("generator: noise_scale must be >= 0");
  for (const ClassProfile& p : profiles) {
    if (p.seg_min < 1 || p.seg_max < p.seg_min) {
      throw ConfigError("generator: bad keyword-segment length range");
    }
    const auto d = static_cast<std::size_t>(dim);
    if (p.base_mean.size() != d || p.keyword_shift.size() != d ||
        p.distractor_shift.size() != d || p.global_shift.size() != d) {
      throw ConfigError("generator: profile vector length does not match dim");
    }
  }
}

namespace {

std::vector<float> random_direction(Rng& rng, int dim, double norm) {
  std::vector<double> v(static_cast<std::size_t>(dim));
  double len = 0.0;
  for (double& x : v) {
    x = normal_sample(rng);
    len += x * x;
  }
  len = std::sqrt(len);
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / len * norm);
  return out;
}

// Removes the component of v along u, then rescales to the requested norm.
std::vector<float> orthogonalize(const std::vector<float>& v, const std::vector<float>& u,
                                 double norm) {
  double uu = 0.0, uv = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    uu += static_cast<double>(u[i]) * u[i];
    uv += static_cast<double>(u[i]) * v[i];
  }
  std::vector<double> w(v.size());
  double len = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    w[i] = v[i] - uv / uu * u[i];
    len += w[i] * w[i];
  }
  len = std::sqrt(len);
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(w[i] / len * norm);
  return out;
}

}  // namespace

GeneratorConfig default_generator_config(int dim, std::uint64_t profile_seed, float shift_scale,
                                         float noise_scale) {
  GeneratorConfig config;
  config.dim = dim;
  config.noise_scale = noise_scale;
  const double keyword_norm = 1.4 * shift_scale;
  const double global_norm = 0.35 * shift_scale;
  for (int i = 0; i < kInvocationCount; ++i) {
    Rng rng(substream(profile_seed, "profiles", static_cast<std::uint64_t>(i)));
    ClassProfile p;
    p.base_mean.resize(static_cast<std::size_t>(dim));
    for (float& x : p.base_mean) x = static_cast<float>(uniform_range(rng, -0.3, 0.3));
    p.keyword_shift = random_direction(rng, dim, keyword_norm);
    p.distractor_shift = orthogonalize(random_direction(rng, dim, keyword_norm),
                                       p.keyword_shift, keyword_norm);
    p.global_shift = random_direction(rng, dim, global_norm);
    p.seg_min = 4;
    p.seg_max = 10;
    config.profiles[static_cast<std::size_t>(i)] = p;
  }
  return config;
}

namespace {

struct DrawnSequence {
  FeatureSequence seq;
  std::vector<int> tags;
};

DrawnSequence draw_sequence(const GeneratorConfig& config, Rng& rng, int index) {
  const auto inv = static_cast<InvocationType>(index % kInvocationCount);
  const ClassProfile& prof = config.profiles[static_cast<std::size_t>(inv)];
  DrawnSequence out;
  FeatureSequence& s = out.seq;
  s.invocation = inv;
  s.id = std::string(invocation_name(inv)) + "-" + std::to_string(index);
  s.label = uniform_unit(rng) < config.class_balance ? 1 : 0;
  s.t = uniform_int(rng, config.t_min, config.t_max);
  s.d = config.dim;
  s.frames.resize(static_cast<std::size_t>(s.t) * s.d);
  out.tags.assign(static_cast<std::size_t>(s.t), 0);

  for (int t = 0; t < s.t; ++t) {
    for (int j = 0; j < s.d; ++j) {
      s.frames[static_cast<std::size_t>(t) * s.d + j] =
          prof.base_mean[static_cast<std::size_t>(j)] +
          config.noise_scale * static_cast<float>(normal_sample(rng));
    }
  }

  auto add_segment = [&](const std::vector<float>& shift, int tag) {
    // Segments never exceed the sequence; short sequences clamp both bounds.
    const int len = uniform_int(rng, std::min(prof.seg_min, s.t), std::min(prof.seg_max, s.t));
    const int pos = uniform_int(rng, 0, s.t - len);
    for (int t = pos; t < pos + len; ++t) {
      for (int j = 0; j < s.d; ++j) {
        s.frames[static_cast<std::size_t>(t) * s.d + j] += shift[static_cast<std::size_t>(j)];
      }
      out.tags[static_cast<std::size_t>(t)] = tag;
    }
  };

  if (s.label == 1) {
    if (inv == InvocationType::FCO) {
      for (int t = 0; t < s.t; ++t) {
        for (int j = 0; j < s.d; ++j) {
          s.frames[static_cast<std::size_t>(t) * s.d + j] +=
              prof.global_shift[static_cast<std::size_t>(j)];
        }
        out.tags[static_cast<std::size_t>(t)] = 4;
      }
    } else {
      add_segment(prof.keyword_shift, inv == InvocationType::HAG ? 1 : 2);
    }
  } else if (inv != InvocationType::FCO && uniform_unit(rng) < config.distractor_prob) {
    add_segment(prof.distractor_shift, 3);
  }
  return out;
}

}  // namespace

Dataset generate(const GeneratorConfig& config, int n) {
  config.validate();
  if (n < 1) throw ContractError("generate: n must be >= 1");
  Rng rng(substream(config.seed, "generate"));
  Dataset out;
  out.dim = config.dim;
  out.items.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.items.push_back(draw_sequence(config, rng, i).seq);
  return out;
}

std::vector<AuxSequence> generate_aux(const GeneratorConfig& config, int n) {
  config.validate();
  if (n < 1) throw ContractError("generate_aux: n must be >= 1");
  Rng rng(substream(config.seed, "generate-aux"));
  std::vector<AuxSequence> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    DrawnSequence d = draw_sequence(config, rng, i);
    out.push_back(AuxSequence{std::move(d.seq), std::move(d.tags)});
  }
  return out;
}

int spliced_dim(int d, int context) { return d * (2 * context + 1); }

std::vector<float> splice(const FeatureSequence& seq, int context) {
  if (context < 0) throw ContractError("splice: context must be >= 0");
  if (seq.t < 1 || static_cast<int>(seq.frames.size()) != seq.t * seq.d) {
    throw ContractError("splice: malformed sequence " + seq.id);
  }
  const int d = seq.d;
  const int dp = spliced_dim(d, context);
  std::vector<float> out(static_cast<std::size_t>(seq.t) * dp);
  for (int t = 0; t < seq.t; ++t) {
    float* row = out.data() + static_cast<std::size_t>(t) * dp;
    for (int c = -context; c <= context; ++c) {
      const int src = std::clamp(t + c, 0, seq.t - 1);
      std::copy_n(seq.frames.data() + static_cast<std::size_t>(src) * d, d,
                  row + static_cast<std::size_t>(c + context) * d);
    }
  }
  return out;
}

Tensor Batch::example(int i) const {
  if (i < 0 || i >= size) throw ContractError("batch: example index out of range");
  const auto row = static_cast<std::size_t>(t_max) * dim;
  std::vector<float> v(frames.begin() + static_cast<std::ptrdiff_t>(i * row),
                       frames.begin() + static_cast<std::ptrdiff_t>((i + 1) * row));
  return Tensor({t_max, dim}, std::move(v));
}

namespace {

std::vector<Batch> build_batches(const Dataset& dataset, int batch_size, int context,
                                 const std::vector<int>& order) {
  std::vector<Batch> out;
  const int n = static_cast<int>(dataset.items.size());
  const int dp = spliced_dim(dataset.dim, context);
  for (int start = 0; start < n; start += batch_size) {
    const int b = std::min(batch_size, n - start);
    Batch batch;
    batch.size = b;
    batch.dim = dp;
    for (int k = 0; k < b; ++k) {
      batch.t_max = std::max(batch.t_max,
                             dataset.items[static_cast<std::size_t>(order[static_cast<std::size_t>(start + k)])].t);
    }
    batch.frames.assign(static_cast<std::size_t>(b) * batch.t_max * dp, 0.0f);
    for (int k = 0; k < b; ++k) {
      const FeatureSequence& s = dataset.items[static_cast<std::size_t>(order[static_cast<std::size_t>(start + k)])];
      const std::vector<float> sp = splice(s, context);
      std::copy(sp.begin(), sp.end(),
                batch.frames.begin() + static_cast<std::ptrdiff_t>(k) * batch.t_max * dp);
      Mask m(static_cast<std::size_t>(batch.t_max), 0);
      std::fill(m.begin(), m.begin() + s.t, 1);
      batch.masks.push_back(std::move(m));
      batch.labels.push_back(s.label);
      batch.invocations.push_back(s.invocation);
      batch.lengths.push_back(s.t);
      batch.ids.push_back(s.id);
    }
    out.push_back(std::move(batch));
  }
  return out;
}

std::vector<int> identity_order(std::size_t n) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  return order;
}

}  // namespace

std::vector<Batch> make_batches(const Dataset& dataset, int batch_size, int context, Rng& rng) {
  if (dataset.empty()) throw ContractError("make_batches: empty dataset");
  if (batch_size < 1) throw ContractError("make_batches: batch_size must be >= 1");
  std::vector<int> order = identity_order(dataset.items.size());
  shuffle_in_place(order, rng);
  return build_batches(dataset, batch_size, context, order);
}

std::vector<Batch> make_batches_sequential(const Dataset& dataset, int batch_size, int context) {
  if (dataset.empty()) throw ContractError("make_batches: empty dataset");
  if (batch_size < 1) throw ContractError("make_batches: batch_size must be >= 1");
  return build_batches(dataset, batch_size, context, identity_order(dataset.items.size()));
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  if (dataset.dim < 1) {
    if (!dataset.empty()) throw ContractError("save_dataset: dataset has items but dim < 1");
    write_text_file(path, "");
    return;
  }
  std::string out = "akd-dataset v1 D=" + std::to_string(dataset.dim) + "\n";
  for (const FeatureSequence& s : dataset.items) {
    if (s.d != dataset.dim) {
      throw ContractError("save_dataset: sequence " + s.id + " dim mismatch");
    }
    out += s.id;
    out += '\t';
    out += invocation_name(s.invocation);
    out += '\t';
    out += std::to_string(s.label);
    out += '\t';
    out += std::to_string(s.t);
    out += '\t';
    out += std::to_string(s.d);
    out += '\t';
    for (std::size_t i = 0; i < s.frames.size(); ++i) {
      if (i) out += ' ';
      out += format_float(s.frames[i]);
    }
    out += '\n';
  }
  write_text_file(path, out);
}

Dataset load_dataset(const std::string& path) {
  const std::string content = read_text_file(path);
  Dataset out;
  if (content.empty()) return out;

  const std::vector<std::string_view> lines = split_view(content, '\n');
  const std::string_view header = lines[0];
  const std::string_view prefix = "akd-dataset v1 D=";
  if (header.substr(0, prefix.size()) != prefix) {
    throw ParseError(path + ": line 1: bad header '" + std::string(header) + "'");
  }
  out.dim = static_cast<int>(parse_int(header.substr(prefix.size()), path + ": line 1: D"));
  if (out.dim < 1) throw ParseError(path + ": line 1: D must be >= 1");

  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::string where = path + ": line " + std::to_string(li + 1);
    const std::string_view line = lines[li];
    if (line.empty()) {
      if (li + 1 == lines.size()) break;  // trailing newline
      throw ParseError(where + ": empty record");
    }
    const std::vector<std::string_view> fields = split_view(line, '\t');
    if (fields.size() != 6) {
      throw ParseError(where + ": expected 6 tab-separated fields, got " +
                       std::to_string(fields.size()));
    }
    FeatureSequence s;
    s.id = std::string(fields[0]);
    s.invocation = invocation_from_name(std::string(fields[1]));
    const long long label = parse_int(fields[2], where + ": label");
    if (label != 0 && label != 1) throw ParseError(where + ": label must be 0 or 1");
    s.label = static_cast<int>(label);
    s.t = static_cast<int>(parse_int(fields[3], where + ": T"));
    s.d = static_cast<int>(parse_int(fields[4], where + ": D"));
    if (s.t < 1) throw ParseError(where + ": T must be >= 1");
    if (s.d != out.dim) {
      throw ParseError(where + ": D=" + std::to_string(s.d) + " does not match header D=" +
                       std::to_string(out.dim));
    }
    const std::vector<std::string_view> nums = split_view(fields[5], ' ');
    if (static_cast<int>(nums.size()) != s.t * s.d) {
      throw ParseError(where + ": expected " + std::to_string(s.t * s.d) + " values, got " +
                       std::to_string(nums.size()));
    }
    s.frames.reserve(nums.size());
    for (const std::string_view v : nums) {
      const float x = parse_float(v, where + ": frame value");
      if (!std::isfinite(x)) throw ParseError(where + ": non-finite frame value");
      s.frames.push_back(x);
    }
    out.items.push_back(std::move(s));
  }
  return out;
}

}  // namespace akd
