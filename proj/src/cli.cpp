// Copyright 2026 The qdiff Authors. All Rights Reserved.
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

#include "qdiff/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "qdiff/bench.hpp"
#include "qdiff/circuit.hpp"
#include "qdiff/data.hpp"
#include "qdiff/io.hpp"
#include "qdiff/model.hpp"
#include "qdiff/parallel.hpp"
#include "qdiff/rng.hpp"

namespace qdiff::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kGradTolerance = 1e-4;

spdlog::logger& logger() {
  static const auto log = [] {
    auto l = std::make_shared<spdlog::logger>("qdiff", std::make_shared<spdlog::sinks::stderr_sink_mt>());
    l->set_pattern("[%l] %v");
    const char* env = std::getenv("QDIFF_LOG");
    l->set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
    return l;
  }();
  return *log;
}

Config::number_unsigned_t u64(std::uint64_t v) { return v; }

Config dims_json(const std::vector<std::size_t>& d) {
  Config a = Config::array();
  for (auto v : d) a.push_back(u64(v));
  return a;
}

void add_common(Config& c) {
  c["seed"] = u64(0);
  c["threads"] = u64(1);
  c["out"] = ".";
}

void add_model(Config& c) {
  const model::Hyper h;
  c["n_qubits"] = u64(h.n_qubits);
  c["n_observables"] = u64(h.n_observables);
  c["layers"] = u64(h.layers);
  c["probe_layers"] = u64(h.probe_layers);
  c["steps"] = u64(h.steps);
  c["beta_start"] = h.beta_start;
  c["beta_end"] = h.beta_end;
  c["encoder_hidden"] = dims_json(h.encoder_hidden);
  c["decoder_hidden"] = dims_json(h.decoder_hidden);
  c["modrelu_tau"] = h.modrelu_tau;
  c["leaky_slope"] = h.leaky_slope;
  c["target"] = std::string(model::to_string(h.target));
  c["ablate_quantum"] = h.ablate_quantum;
  c["lambda"] = model::TrainConfig{}.lambda;
}

void add_data(Config& c) {
  const data::SyntheticSpec s;
  c["dataset"] = "synthetic";
  c["n_modes"] = u64(s.n_modes);
  c["pattern_seed"] = u64(s.pattern_seed);
  c["noise_sigma"] = s.noise_sigma;
  c["count_per_mode"] = u64(s.count_per_mode);
  c["data_seed"] = u64(0);
  c["idx_images"] = "";
  c["idx_labels"] = "";
  c["limit"] = u64(0);
}

const Config& need(const Config& c, const char* key) {
  const auto it = c.find(key);
  if (it == c.end()) throw ConfigError(std::string("missing config key '") + key + "'");
  return *it;
}
std::uint64_t get_u64(const Config& c, const char* key) { return need(c, key).get<std::uint64_t>(); }
int get_int(const Config& c, const char* key) {
  const auto v = get_u64(c, key);
  if (v > 1u << 20) throw ConfigError(std::string("value of '") + key + "' is too large");
  return static_cast<int>(v);
}
double get_f64(const Config& c, const char* key) { return need(c, key).get<double>(); }
bool get_bool(const Config& c, const char* key) { return need(c, key).get<bool>(); }
std::string get_str(const Config& c, const char* key) { return need(c, key).get<std::string>(); }
std::vector<std::size_t> get_dims(const Config& c, const char* key) {
  return need(c, key).get<std::vector<std::size_t>>();
}

// Runs f, turning argument errors into configuration errors.
template <class F>
auto config_stage(F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const std::out_of_range& e) {
    throw ConfigError(e.what());
  }
}

void assign(Config& slot, const Config& v, const std::string& key) {
  const auto bad = [&](const char* want) {
    return ConfigError("config key '" + key + "' expects " + want + ", got " + v.dump());
  };
  if (slot.is_boolean()) {
    if (!v.is_boolean()) throw bad("a boolean");
    slot = v;
  } else if (slot.is_number_integer()) {
    if (v.is_number_unsigned()) slot = v;
    else if (v.is_number_integer() && v.get<std::int64_t>() >= 0) slot = u64(v.get<std::int64_t>());
    else throw bad("a non-negative integer");
  } else if (slot.is_number_float()) {
    if (!v.is_number()) throw bad("a number");
    slot = v.get<double>();
  } else if (slot.is_string()) {
    if (!v.is_string()) throw bad("a string");
    slot = v;
  } else if (slot.is_array()) {
    if (!v.is_array()) throw bad("an array of non-negative integers");
    Config a = Config::array();
    for (const auto& e : v) {
      if (e.is_number_unsigned()) a.push_back(e);
      else if (e.is_number_integer() && e.get<std::int64_t>() >= 0) a.push_back(u64(e.get<std::int64_t>()));
      else throw bad("an array of non-negative integers");
    }
    slot = a;
  }
}

std::uint64_t parse_u64(const std::string& s, const std::string& key) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty())
    throw ConfigError("config key '" + key + "' expects a non-negative integer, got '" + s + "'");
  return v;
}

Config from_text(const Config& slot, const std::string& s, const std::string& key) {
  if (slot.is_boolean()) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError("config key '" + key + "' expects true or false, got '" + s + "'");
  }
  if (slot.is_number_integer()) return u64(parse_u64(s, key));
  if (slot.is_number_float()) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size())
      throw ConfigError("config key '" + key + "' expects a number, got '" + s + "'");
    return v;
  }
  if (slot.is_array()) {
    Config a = Config::array();
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) a.push_back(u64(parse_u64(part, key)));
    return a;
  }
  return s;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

fs::path out_dir(const Config& cfg) {
  const fs::path dir = get_str(cfg, "out");
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& path, const std::string& bytes) {
  io::write_file_atomic(path, bytes);
  logger().debug("wrote {}", path.string());
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) { return substream(seed, {tag})(); }

model::Hyper hyper_from(const Config& cfg) {
  model::Hyper h;
  h.n_qubits = get_int(cfg, "n_qubits");
  h.n_observables = get_u64(cfg, "n_observables");
  h.layers = get_int(cfg, "layers");
  h.probe_layers = get_int(cfg, "probe_layers");
  h.steps = get_u64(cfg, "steps");
  h.beta_start = get_f64(cfg, "beta_start");
  h.beta_end = get_f64(cfg, "beta_end");
  h.input_dim = data::kPixels;
  h.encoder_hidden = get_dims(cfg, "encoder_hidden");
  h.decoder_hidden = get_dims(cfg, "decoder_hidden");
  h.modrelu_tau = get_f64(cfg, "modrelu_tau");
  h.leaky_slope = get_f64(cfg, "leaky_slope");
  h.ablate_quantum = get_bool(cfg, "ablate_quantum");
  config_stage([&] {
    h.target = model::target_from_string(get_str(cfg, "target"));
    h.validate();
    return 0;
  });
  return h;
}

struct Dataset {
  std::vector<std::vector<double>> images;
  std::vector<std::vector<double>> templates;  // synthetic only
};

Dataset load_dataset(const Config& cfg, int threads) {
  Dataset d;
  const auto kind = get_str(cfg, "dataset");
  if (kind == "synthetic") {
    const data::SyntheticSpec spec{get_u64(cfg, "n_modes"), get_u64(cfg, "pattern_seed"), get_f64(cfg, "noise_sigma"),
                                   get_u64(cfg, "count_per_mode")};
    config_stage([&] {
      if (!(spec.noise_sigma >= 0)) throw std::invalid_argument("noise_sigma must be >= 0");
      if (spec.count_per_mode == 0) throw std::invalid_argument("count_per_mode must be >= 1");
      d.images = data::synth_modes(spec, get_u64(cfg, "data_seed")).images;
      d.templates = data::mode_templates(spec);
      return 0;
    });
  } else if (kind == "idx") {
    const fs::path images = get_str(cfg, "idx_images"), labels = get_str(cfg, "idx_labels");
    if (images.empty()) throw ConfigError("dataset 'idx' needs idx_images");
    for (const auto& p : {images, labels})
      if (!p.empty() && !fs::exists(p)) throw std::runtime_error("dataset missing: " + p.string());
    const auto img = data::load_idx(images);
    std::optional<data::IdxTensor> lab;
    if (!labels.empty()) lab = data::load_idx(labels);
    d.images = data::from_idx(img, lab ? &*lab : nullptr, get_u64(cfg, "limit"), threads).images;
  } else {
    throw ConfigError("unknown dataset '" + kind + "' (expected synthetic or idx)");
  }
  if (d.images.empty()) throw std::runtime_error("dataset is empty");
  logger().info("dataset: {} images ({})", d.images.size(), kind);
  return d;
}

int threads_of(const Config& cfg) {
  const int t = get_int(cfg, "threads");
  if (t < 1) throw ConfigError("threads must be >= 1");
  return t;
}

// Rows of an existing CSV whose first field is a step <= `upto`.
std::string prior_rows(const fs::path& path, std::uint64_t upto) {
  if (upto == 0 || !fs::exists(path)) return {};
  std::stringstream in(io::read_file(path));
  std::string line, kept;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    std::uint64_t step = 0;
    const auto [p, ec] = std::from_chars(line.data(), line.data() + comma, step);
    if (comma == std::string::npos || ec != std::errc() || p != line.data() + comma) continue;
    if (step <= upto) kept += line + "\n";
  }
  return kept;
}

}  // namespace

Config defaults(const std::string& command) {
  Config c;
  if (command == "bench") {
    c["circuit"] = "ansatz";
    c["n_qubits"] = u64(4);
    c["layers"] = u64(1);
    c["pairs"] = u64(5000);
    c["ec_samples"] = u64(1000);
    c["bloch_samples"] = u64(1000);
    c["bloch_qubit"] = u64(0);
  } else if (command == "grad-check") {
    add_model(c);
    add_data(c);
    c["per_group"] = u64(20);
    c["h"] = 1e-5;
    c["inject_fault"] = false;
  } else if (command == "train") {
    add_model(c);
    add_data(c);
    const model::TrainConfig t;
    c["epochs"] = u64(t.epochs);
    c["max_steps"] = u64(t.max_steps);
    c["batch_size"] = u64(t.batch_size);
    c["lr"] = t.lr;
    c["resume"] = "";
    c["checkpoint_every"] = u64(0);
  } else if (command == "sample") {
    add_data(c);
    c["checkpoint"] = "";
    c["trajectories"] = u64(50);
    c["steps"] = u64(0);
    c["write_images"] = true;
    c["cosine_threshold"] = 0.8;
  } else {
    throw ConfigError("unknown command '" + command + "'");
  }
  add_common(c);
  return c;
}

Config resolve_config(const std::string& command, const std::optional<fs::path>& config_path,
                      const std::vector<std::pair<std::string, std::string>>& overrides) {
  Config cfg = defaults(command);
  if (config_path) {
    if (!fs::exists(*config_path)) throw ConfigError("config file not found: " + config_path->string());
    Config file;
    try {
      file = Config::parse(io::read_file(*config_path));
    } catch (const Config::parse_error& e) {
      throw ConfigError("config file " + config_path->string() + " is not valid JSON: " + e.what());
    }
    if (!file.is_object()) throw ConfigError("config file must hold a flat JSON object");
    for (const auto& [key, value] : file.items()) {
      if (!cfg.contains(key)) throw ConfigError("unknown config key '" + key + "' for " + command);
      if (value.is_object()) throw ConfigError("config key '" + key + "' must not be nested");
      assign(cfg[key], value, key);
    }
  }
  for (auto [key, value] : overrides) {
    std::replace(key.begin(), key.end(), '-', '_');
    if (!cfg.contains(key)) throw ConfigError("unknown option '--" + key + "' for " + command);
    cfg[key] = from_text(cfg[key], value, key);
  }
  return cfg;
}

int cmd_bench(const Config& cfg, std::ostream& out) {
  const int n = get_int(cfg, "n_qubits"), layers = get_int(cfg, "layers"), threads = threads_of(cfg);
  const auto seed = get_u64(cfg, "seed");
  const auto kind = get_str(cfg, "circuit");
  const auto pairs = get_u64(cfg, "pairs"), ec_samples = get_u64(cfg, "ec_samples");
  const auto bloch_samples = get_u64(cfg, "bloch_samples");
  const int bloch_qubit = get_int(cfg, "bloch_qubit");
  if (n < 2 || n > 10) throw ConfigError("bench: n_qubits must be in [2, 10]");
  if (pairs == 0 || ec_samples == 0) throw ConfigError("bench: pairs and ec_samples must be >= 1");
  if (bloch_qubit >= n) throw ConfigError("bench: bloch_qubit out of range");
  circuit::ParamCircuit c;
  if (kind == "ansatz") {
    if (layers < 1) throw ConfigError("bench: layers must be >= 1");
    c = circuit::build_ansatz(n, layers);
  } else if (kind == "idle") {
    c = circuit::ParamCircuit(n, 0);
  } else if (kind == "rotation") {
    c = circuit::ParamCircuit(n, 0);
    for (int q = 0; q < n; ++q) {
      const auto p = c.add_params(2);
      c.add(circuit::Gate::param(circuit::GateKind::RY, q, p));
      c.add(circuit::Gate::param(circuit::GateKind::RZ, q, p + 1));
    }
  } else {
    throw ConfigError("bench: unknown circuit '" + kind + "' (expected ansatz, idle or rotation)");
  }
  const auto psi0 = StateVector::zero(n);
  const std::size_t dim = std::size_t{1} << n;
  logger().info("bench: {} circuit, n={}, {} params", kind, n, c.n_params());

  const auto fids = bench::sample_fidelities(c, psi0, pairs, derive_seed(seed, 1), threads);
  bench::BenchReport report;
  report.expressibility = bench::expressibility(fids, dim);
  report.entangling_capability = bench::entangling_capability(c, psi0, ec_samples, derive_seed(seed, 2), threads);
  report.n_samples = pairs;
  report.seed = seed;
  const auto bloch = bench::bloch_points(c, psi0, bloch_qubit, bloch_samples, derive_seed(seed, 3), threads);

  auto j = Config::parse(report.to_json());
  j["circuit"] = kind;
  j["n_qubits"] = n;
  j["layers"] = kind == "ansatz" ? layers : 0;
  j["n_params"] = c.n_params();
  j["ec_samples"] = ec_samples;
  j["bins"] = bench::kHistogramBins;
  const auto dir = out_dir(cfg);
  write(dir / "bench_report.json", j.dump(2) + "\n");
  std::string csv = "index,fidelity\n";
  for (std::size_t i = 0; i < fids.size(); ++i) csv += std::to_string(i) + "," + num(fids[i]) + "\n";
  write(dir / "fidelities.csv", csv);
  csv = "index,x,y,z\n";
  for (std::size_t i = 0; i < bloch.size(); ++i)
    csv += std::to_string(i) + "," + num(bloch[i][0]) + "," + num(bloch[i][1]) + "," + num(bloch[i][2]) + "\n";
  write(dir / "bloch.csv", csv);
  out << "expressibility " << num(report.expressibility) << "\n";
  out << "entangling_capability " << num(report.entangling_capability) << "\n";
  return kExitOk;
}

int cmd_grad_check(const Config& cfg, std::ostream& out) {
  const auto hyper = hyper_from(cfg);
  const auto seed = get_u64(cfg, "seed");
  const double lambda = get_f64(cfg, "lambda"), h = get_f64(cfg, "h");
  const auto per_group = get_u64(cfg, "per_group");
  const bool fault = get_bool(cfg, "inject_fault");
  if (!(lambda >= 0 && lambda <= 1)) throw ConfigError("grad-check: lambda must be in [0, 1]");
  if (!(h > 0)) throw ConfigError("grad-check: h must be > 0");
  if (per_group == 0) throw ConfigError("grad-check: per_group must be >= 1");
  const auto ds = load_dataset(cfg, threads_of(cfg));
  const auto m = model::HybridModel::init(hyper, seed);
  auto rng = substream(seed, {3});
  std::uniform_int_distribution<std::size_t> pick_t(1, hyper.steps);
  const std::size_t t = pick_t(rng);
  std::normal_distribution<double> gauss;
  std::vector<double> eps(hyper.input_dim);
  for (auto& e : eps) e = gauss(rng);
  const auto ex = model::make_example(m, ds.images.front(), t, eps);
  if (fault) logger().warn("grad-check: sign-flip fault injected");
  const auto audits = model::audit_gradients(m, ex, lambda, per_group, seed, h, 1e-7, fault);

  bool pass = true;
  Config groups = Config::array();
  for (const auto& a : audits) {
    const bool ok = a.max_rel_err < kGradTolerance;
    pass = pass && ok;
    char line[128];
    std::snprintf(line, sizeof line, "%-12s checked %3zu  max_rel_err %.3e  %s\n",
                  std::string(model::to_string(a.group)).c_str(), a.checked, a.max_rel_err, ok ? "PASS" : "FAIL");
    out << line;
    Config g;
    g["group"] = model::to_string(a.group);
    g["checked"] = a.checked;
    g["max_rel_err"] = a.max_rel_err;
    g["pass"] = ok;
    groups.push_back(g);
  }
  out << "grad-check " << (pass ? "PASS" : "FAIL") << "\n";
  Config j;
  j["seed"] = seed;
  j["lambda"] = lambda;
  j["t"] = t;
  j["tolerance"] = kGradTolerance;
  j["groups"] = groups;
  j["pass"] = pass;
  write(out_dir(cfg) / "grad_check.json", j.dump(2) + "\n");
  return pass ? kExitOk : kExitRuntime;
}

int cmd_train(const Config& cfg, std::ostream& out) {
  const auto seed = get_u64(cfg, "seed");
  const int threads = threads_of(cfg);
  model::TrainConfig tc;
  tc.epochs = get_u64(cfg, "epochs");
  tc.max_steps = get_u64(cfg, "max_steps");
  tc.batch_size = get_u64(cfg, "batch_size");
  tc.lr = get_f64(cfg, "lr");
  tc.lambda = get_f64(cfg, "lambda");
  tc.seed = seed;
  tc.threads = threads;
  config_stage([&] {
    tc.validate();
    return 0;
  });
  const auto hyper = hyper_from(cfg);
  const fs::path resume = get_str(cfg, "resume");
  const auto every = get_u64(cfg, "checkpoint_every");
  const auto ds = load_dataset(cfg, threads);
  const auto dir = out_dir(cfg);

  model::TrainState st;
  if (!resume.empty()) {
    if (!fs::exists(resume)) throw std::runtime_error("checkpoint not found: " + resume.string());
    st = model::load_checkpoint(resume);
    logger().info("resuming from {} at step {}", resume.string(), st.adam.step);
  } else {
    st.model = model::HybridModel::init(hyper, seed);
    st.adam = model::AdamState::zeros(st.model.n_params());
  }
  const auto start = st.adam.step;
  const std::string log_head = "step,loss,mse,infidelity\n", time_head = "step,wall_ms\n";
  std::string log_rows = prior_rows(dir / "train_log.csv", start);
  std::string time_rows = prior_rows(dir / "train_timing.csv", start);
  const auto flush = [&] {
    model::save_checkpoint(st, dir / "checkpoint.bin");
    write(dir / "train_log.csv", log_head + log_rows);
    write(dir / "train_timing.csv", time_head + time_rows);
  };
  std::vector<double> losses;
  model::train(st, tc, ds.images, [&](const model::StepLog& s) {
    log_rows += std::to_string(s.step) + "," + num(s.loss.total) + "," + num(s.loss.mse) + "," +
                num(s.loss.infidelity) + "\n";
    time_rows += std::to_string(s.step) + "," + num(s.wall_ms) + "\n";
    losses.push_back(s.loss.total);
    if (s.step % 20 == 0) logger().info("step {} loss {:.6f}", s.step, s.loss.total);
    if (every > 0 && s.step % every == 0) flush();
  });
  flush();

  Config j;
  j["seed"] = seed;
  j["start_step"] = start;
  j["final_step"] = st.adam.step;
  j["steps_run"] = losses.size();
  j["n_params"] = st.model.n_params();
  if (!losses.empty()) {
    const auto [first, last] = model::smoothed_endpoints(losses);
    j["smoothed_initial_loss"] = first;
    j["smoothed_final_loss"] = last;
    j["loss_ratio"] = last / first;
    out << "train: " << losses.size() << " steps, smoothed loss " << num(first) << " -> " << num(last) << "\n";
  } else {
    out << "train: no steps run\n";
  }
  write(dir / "train_summary.json", j.dump(2) + "\n");
  return kExitOk;
}

int cmd_sample(const Config& cfg, std::ostream& out) {
  const auto seed = get_u64(cfg, "seed");
  const int threads = threads_of(cfg);
  const fs::path ckpt = get_str(cfg, "checkpoint");
  const auto n_traj = get_u64(cfg, "trajectories");
  const double threshold = get_f64(cfg, "cosine_threshold");
  if (ckpt.empty()) throw ConfigError("sample: --checkpoint is required");
  if (n_traj < 2) throw ConfigError("sample: need at least 2 trajectories");
  if (!fs::exists(ckpt)) throw std::runtime_error("checkpoint not found: " + ckpt.string());
  const auto st = model::load_checkpoint(ckpt);
  const auto& m = st.model;
  const std::size_t T = get_u64(cfg, "steps") == 0 ? m.hyper.steps : get_u64(cfg, "steps");
  if (T > m.hyper.steps) throw ConfigError("sample: steps exceeds the model's T");
  const auto ds = load_dataset(cfg, threads);

  std::vector<std::vector<std::vector<double>>> trajs(n_traj);
  parallel_for(n_traj, threads, [&](std::size_t k) { trajs[k] = model::sample(m, T, derive_seed(seed, k)); });

  const auto dir = out_dir(cfg);
  if (get_bool(cfg, "write_images")) {
    fs::create_directories(dir / "images");
    for (std::size_t k = 0; k < n_traj; ++k)
      for (std::size_t s = 0; s <= T; ++s) {
        char name[64];
        std::snprintf(name, sizeof name, "traj_%03zu_step_%02zu.pgm", k, s);
        write(dir / "images" / name, data::to_pgm(trajs[k][s]));
      }
  }
  std::vector<std::vector<double>> finals, noise;
  for (const auto& t : trajs) {
    noise.push_back(t.front());
    finals.push_back(t.back());
  }
  Config j;
  j["checkpoint_step"] = st.adam.step;
  j["trajectories"] = n_traj;
  j["steps"] = T;
  j["seed"] = seed;
  j["reference_size"] = ds.images.size();
  j["frechet_generated"] = bench::frechet_gaussian(finals, ds.images);
  j["frechet_noise"] = bench::frechet_gaussian(noise, ds.images);
  if (!ds.templates.empty()) {
    std::vector<std::size_t> counts(ds.templates.size(), 0);
    std::size_t above = 0;
    Config cos = Config::array();
    for (const auto& f : finals) {
      const auto nm = data::nearest_template(f, ds.templates);
      ++counts[nm.index];
      if (nm.cosine > threshold) ++above;
      cos.push_back(nm.cosine);
    }
    j["cosine_threshold"] = threshold;
    j["fraction_above_threshold"] = double(above) / double(n_traj);
    j["mode_counts"] = counts;
    j["nearest_cosine"] = cos;
  }
  std::string csv = "trajectory";
  for (std::size_t i = 0; i < m.hyper.input_dim; ++i) csv += ",p" + std::to_string(i);
  csv += "\n";
  for (std::size_t k = 0; k < n_traj; ++k) {
    csv += std::to_string(k);
    for (double v : finals[k]) csv += "," + num(v);
    csv += "\n";
  }
  write(dir / "samples.csv", csv);
  write(dir / "metrics.json", j.dump(2) + "\n");
  out << "frechet generated " << num(j["frechet_generated"].get<double>()) << " noise "
      << num(j["frechet_noise"].get<double>()) << "\n";
  if (j.contains("fraction_above_threshold"))
    out << "nearest-mode cosine > " << threshold << ": " << num(j["fraction_above_threshold"].get<double>()) << "\n";
  return kExitOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hybrid quantum-classical diffusion toolkit", "qdiff"};
  app.require_subcommand(1, 1);
  struct Sub {
    CLI::App* app;
    std::string config, seed, threads, out;
  };
  const std::vector<std::pair<std::string, std::string>> commands{
      {"bench", "expressibility, entangling capability and Bloch samples of a circuit"},
      {"grad-check", "finite-difference audit of every model gradient group"},
      {"train", "train the hybrid denoiser"},
      {"sample", "generate trajectories from a checkpoint"}};
  std::vector<Sub> subs(commands.size());
  for (std::size_t i = 0; i < commands.size(); ++i) {
    auto& s = subs[i];
    s.app = app.add_subcommand(commands[i].first, commands[i].second);
    s.app->add_option("--config", s.config, "flat JSON config file");
    s.app->add_option("--seed", s.seed, "master seed");
    s.app->add_option("--threads", s.threads, "worker threads");
    s.app->add_option("--out", s.out, "output directory");
    s.app->allow_extras();
    s.app->footer("Any config key can be overridden with --key value.");
  }
  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  try {
    for (const auto& s : subs) {
      if (!s.app->parsed()) continue;
      const std::string name = s.app->get_name();
      std::vector<std::pair<std::string, std::string>> overrides;
      const auto extras = s.app->remaining();
      for (std::size_t i = 0; i < extras.size(); ++i) {
        const auto& tok = extras[i];
        if (tok.rfind("--", 0) != 0 || tok.size() < 3) throw ConfigError("unexpected argument '" + tok + "'");
        const auto eq = tok.find('=');
        if (eq != std::string::npos) {
          overrides.emplace_back(tok.substr(2, eq - 2), tok.substr(eq + 1));
        } else {
          if (i + 1 >= extras.size()) throw ConfigError("option '" + tok + "' needs a value");
          overrides.emplace_back(tok.substr(2), extras[++i]);
        }
      }
      if (s.app->count("--seed")) overrides.emplace_back("seed", s.seed);
      if (s.app->count("--threads")) overrides.emplace_back("threads", s.threads);
      if (s.app->count("--out")) overrides.emplace_back("out", s.out);
      const std::optional<fs::path> path =
          s.app->count("--config") ? std::optional<fs::path>(s.config) : std::nullopt;
      const auto cfg = resolve_config(name, path, overrides);
      logger().debug("config: {}", cfg.dump());
      if (name == "bench") return cmd_bench(cfg, out);
      if (name == "grad-check") return cmd_grad_check(cfg, out);
      if (name == "train") return cmd_train(cfg, out);
      return cmd_sample(cfg, out);
    }
  } catch (const ConfigError& e) {
    err << "qdiff: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "qdiff: error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace qdiff::cli
