// binquant: 1-bit weight quantization runs driven by JSON configs.
// Subcommands: synth, quantize, analyze, report.

#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "binquant/pipeline.hpp"
#include "binquant/prng.hpp"
#include "binquant/report.hpp"
#include "binquant/solver.hpp"
#include "binquant/tensor_file.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace binquant;

namespace {

// Exit code 1: user/config error. Exit code 2 is reserved for internal
// invariant violations (anything else that escapes).
struct CliError : std::runtime_error {
  explicit CliError(const std::string& stage, const std::string& msg)
      : std::runtime_error(stage + ": " + msg) {}
};

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
  for (const auto& item : obj.items())
    if (!allowed.count(item.key()))
      throw CliError("config", "unknown key '" + item.key() + "' in " + where);
}

AlignmentMode parse_mode(const std::string& s) {
  if (s == "weight") return AlignmentMode::Weight;
  if (s == "activation") return AlignmentMode::ActivationConditioned;
  if (s == "output") return AlignmentMode::Output;
  throw CliError("config", "invalid value '" + s + "' for mode");
}

const char* mode_name(AlignmentMode m) {
  switch (m) {
    case AlignmentMode::Weight: return "weight";
    case AlignmentMode::ActivationConditioned: return "activation";
    case AlignmentMode::Output: return "output";
  }
  return "?";
}

AmpPolicy parse_amp(const std::string& s) {
  if (s == "off") return AmpPolicy::Off;
  if (s == "agreement") return AmpPolicy::Agreement;
  if (s == "heaviside") return AmpPolicy::Heaviside;
  throw CliError("config", "invalid value '" + s + "' for amp");
}

const char* amp_name(AmpPolicy p) {
  switch (p) {
    case AmpPolicy::Off: return "off";
    case AmpPolicy::Agreement: return "agreement";
    case AmpPolicy::Heaviside: return "heaviside";
  }
  return "?";
}

LayerRole parse_role(const std::string& s) {
  static const std::map<std::string, LayerRole> roles = {
      {"query", LayerRole::Query},       {"key", LayerRole::Key},
      {"value", LayerRole::Value},       {"attn_out", LayerRole::AttnOut},
      {"fc_up", LayerRole::FcUp},        {"final_fc", LayerRole::FinalFc},
      {"plain", LayerRole::Plain}};
  const auto it = roles.find(s);
  if (it == roles.end()) throw CliError("config", "invalid value '" + s + "' for role");
  return it->second;
}

// Command-line overrides; unset options fall back to config-file values,
// then to the documented defaults.
struct Overrides {
  std::optional<std::string> mode, amp, out_dir;
  std::optional<int> iters, k, b_rows, scale_bits;
  std::optional<std::uint64_t> block_size, seed;
  std::optional<double> rel_tol;
};

struct RunConfig {
  SolverConfig solver;
  json model;  // null unless given
  json calib;  // null unless given
  std::string out_dir = ".";
};

json load_json(const std::string& path, const std::string& stage) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const TensorIoError& e) {
    throw CliError(stage, e.what());
  } catch (const std::exception& e) {
    throw CliError(stage, path + ": " + e.what());
  }
  if (!j.is_object()) throw CliError(stage, path + ": expected a JSON object");
  return j;
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const std::exception&) {
    throw CliError("config", "invalid value for " + key);
  }
}

RunConfig parse_config(const std::string& path, const Overrides& ov) {
  const json j = load_json(path, "config");
  check_keys(j, {"mode", "amp", "iters", "k", "b_rows", "block_size", "rel_tol",
                 "seed", "scale_bits", "model", "calib", "out_dir"},
             "config");
  RunConfig cfg;
  cfg.solver.mode = parse_mode(ov.mode.value_or(get_or<std::string>(j, "mode", "output")));
  cfg.solver.amp_policy = parse_amp(ov.amp.value_or(get_or<std::string>(j, "amp", "agreement")));
  cfg.solver.iters = ov.iters.value_or(get_or<int>(j, "iters", 15));
  cfg.solver.alpha_c_period = ov.k.value_or(get_or<int>(j, "k", 5));
  cfg.solver.b_rows_per_iter = ov.b_rows.value_or(get_or<int>(j, "b_rows", 2));
  cfg.solver.block_width = ov.block_size.value_or(get_or<std::uint64_t>(j, "block_size", 128));
  cfg.solver.rel_tol = ov.rel_tol.value_or(get_or<double>(j, "rel_tol", 1e-6));
  cfg.solver.seed = ov.seed.value_or(get_or<std::uint64_t>(j, "seed", 0));
  cfg.solver.scale_bits = ov.scale_bits.value_or(get_or<int>(j, "scale_bits", 16));
  try {
    cfg.solver.validate();
  } catch (const std::exception& e) {
    throw CliError("config", e.what());
  }
  if (j.contains("model")) cfg.model = j.at("model");
  if (j.contains("calib")) cfg.calib = j.at("calib");
  cfg.out_dir = ov.out_dir.value_or(get_or<std::string>(j, "out_dir", "."));
  return cfg;
}

json config_echo(const RunConfig& cfg) {
  json j;
  j["mode"] = mode_name(cfg.solver.mode);
  j["amp"] = amp_name(cfg.solver.amp_policy);
  j["iters"] = cfg.solver.iters;
  j["k"] = cfg.solver.alpha_c_period;
  j["b_rows"] = cfg.solver.b_rows_per_iter;
  j["block_size"] = cfg.solver.block_width;
  j["rel_tol"] = cfg.solver.rel_tol;
  j["seed"] = cfg.solver.seed;
  j["scale_bits"] = cfg.solver.scale_bits;
  if (!cfg.model.is_null()) j["model"] = cfg.model;
  if (!cfg.calib.is_null()) j["calib"] = cfg.calib;
  j["out_dir"] = cfg.out_dir;
  return j;
}

std::string timestamp_utc() {
  char buf[32];
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CliError("write", "cannot create directory " + dir);
}

json mask_acceptance_summary(const SolveTrace& trace) {
  double sums[3] = {0, 0, 0};
  std::size_t counts[3] = {0, 0, 0};
  for (const TraceStep& s : trace.steps) {
    const int k = static_cast<int>(s.kind);
    sums[k] += s.accept_ratio;
    ++counts[k];
  }
  json j;
  j["alpha_r"] = counts[0] ? sums[0] / counts[0] : 1.0;
  j["alpha_c"] = counts[1] ? sums[1] / counts[1] : 1.0;
  j["b_row"] = counts[2] ? sums[2] / counts[2] : 1.0;
  return j;
}

double final_objective(const BlockSolve& bs) {
  return bs.trace.steps.empty() ? 0.0 : bs.trace.steps.back().objective;
}

void write_factorization_files(const std::string& dir, const std::string& stem,
                               const BlockSolve& bs, const RunConfig& cfg) {
  const std::string base = dir + "/" + stem;
  write_tensor(base + ".alpha_r.bqt", tensor_from_vector(bs.fact.alpha_r));
  write_tensor(base + ".alpha_c.bqt", tensor_from_vector(bs.fact.alpha_c));
  write_tensor(base + ".b.bqt", tensor_from_matrix(bs.fact.b, Dtype::I8Sign));
  json meta;
  meta["block"] = bs.block_index;
  meta["col_begin"] = bs.col_begin;
  meta["col_end"] = bs.col_end;
  meta["d_in"] = bs.fact.d_in();
  meta["d_out"] = bs.fact.d_out();
  meta["mode"] = mode_name(cfg.solver.mode);
  meta["amp"] = amp_name(cfg.solver.amp_policy);
  meta["seed"] = cfg.solver.seed;
  write_file_atomic(base + ".meta.json", meta.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// synth

int cmd_synth(std::uint64_t d_in, std::uint64_t d_out, std::uint64_t n,
              std::uint64_t seed, double noise, const std::string& out_dir) {
  if (d_in < 1 || d_out < 1 || n < 1)
    throw CliError("config", "dims must be >= 1");
  if (noise < 0) throw CliError("config", "noise must be >= 0");
  ensure_dir(out_dir);
  const SynthInstance inst = synth_instance(seed, d_in, d_out, n, noise);
  write_tensor(out_dir + "/w.bqt", tensor_from_matrix(inst.w));
  write_tensor(out_dir + "/x.bqt", tensor_from_matrix(inst.x));
  write_tensor(out_dir + "/x_hat.bqt", tensor_from_matrix(inst.x_hat));
  std::cout << "wrote w.bqt x.bqt x_hat.bqt to " << out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// quantize

struct QuantizeInputs {
  DenseMatrix w, x, x_hat;
};

QuantizeInputs load_quantize_inputs(const RunConfig& cfg) {
  if (cfg.calib.is_null())
    throw CliError("config", "quantize requires a calib entry");
  QuantizeInputs in;
  if (cfg.calib.contains("dir")) {
    check_keys(cfg.calib, {"dir"}, "calib");
    const std::string dir = cfg.calib.at("dir").get<std::string>();
    try {
      in.w = matrix_from_tensor(read_tensor(dir + "/w.bqt"));
      in.x = matrix_from_tensor(read_tensor(dir + "/x.bqt"));
      in.x_hat = matrix_from_tensor(read_tensor(dir + "/x_hat.bqt"));
    } catch (const TensorIoError& e) {
      throw CliError("calib", e.what());
    }
  } else {
    check_keys(cfg.calib, {"d_in", "d_out", "n", "noise"}, "calib");
    const auto d_in = get_or<std::uint64_t>(cfg.calib, "d_in", 0);
    const auto d_out = get_or<std::uint64_t>(cfg.calib, "d_out", 0);
    const auto n = get_or<std::uint64_t>(cfg.calib, "n", 0);
    const auto noise = get_or<double>(cfg.calib, "noise", 0.0);
    if (d_in < 1 || d_out < 1 || n < 1)
      throw CliError("config", "calib synth needs d_in, d_out, n >= 1");
    const SynthInstance inst =
        synth_instance(cfg.solver.seed, d_in, d_out, n, noise);
    in.w = inst.w;
    in.x = inst.x;
    in.x_hat = inst.x_hat;
  }
  if (in.x.cols != in.w.rows || in.x_hat.cols != in.w.rows ||
      in.x.rows != in.x_hat.rows)
    throw CliError("calib", "calibration shapes do not match the weight");
  return in;
}

int cmd_quantize(const RunConfig& cfg) {
  const QuantizeInputs in = load_quantize_inputs(cfg);
  const GramBundle grams = grams_from_data(in.x, in.x_hat);
  const SolveResult res = solve(in.w, grams, cfg.solver);
  ensure_dir(cfg.out_dir);

  CsvReport csv;
  csv.add_trace(0, res.trace);
  write_file_atomic(cfg.out_dir + "/trace.csv", csv.str());

  double total_obj = 0.0;
  int fallbacks = 0;
  json blocks = json::array();
  for (const BlockSolve& bs : res.blocks) {
    write_factorization_files(cfg.out_dir, "block_" + std::to_string(bs.block_index), bs, cfg);
    total_obj += final_objective(bs);
    fallbacks += bs.alpha_c_fallbacks;
    json b;
    b["block"] = bs.block_index;
    b["col_begin"] = bs.col_begin;
    b["col_end"] = bs.col_end;
    b["final_objective"] = final_objective(bs);
    b["iterations"] = bs.iterations;
    blocks.push_back(b);
  }

  json summary;
  summary["command"] = "quantize";
  summary["timestamp"] = timestamp_utc();
  summary["config"] = config_echo(cfg);
  summary["d_in"] = in.w.rows;
  summary["d_out"] = in.w.cols;
  summary["n_samples"] = grams.n_samples;
  summary["bits_per_weight"] =
      bits_per_weight(in.w.rows, in.w.cols, cfg.solver.block_width, cfg.solver.scale_bits);
  summary["total_final_objective"] = total_obj;
  summary["alpha_c_fallbacks"] = fallbacks;
  summary["mask_acceptance"] = mask_acceptance_summary(res.trace);
  summary["blocks"] = blocks;
  write_file_atomic(cfg.out_dir + "/summary.json", summary.dump(2) + "\n");
  std::cout << "quantized " << in.w.rows << "x" << in.w.cols << " into "
            << res.blocks.size() << " block(s), final objective "
            << format_double(total_obj) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// analyze

ModelSpec parse_model(const RunConfig& cfg, double path_noise) {
  if (!cfg.model.is_array() || cfg.model.empty())
    throw CliError("config", "model must be a non-empty array of block descriptors");
  std::vector<BlockSpec> shape;
  for (const json& bj : cfg.model) {
    check_keys(bj, {"layers", "nonlinearity", "residual", "row_normalize"}, "model block");
    BlockSpec b;
    const std::string nl = get_or<std::string>(bj, "nonlinearity", "identity");
    if (nl == "identity") b.nonlinearity = Nonlinearity::Identity;
    else if (nl == "relu") b.nonlinearity = Nonlinearity::Relu;
    else throw CliError("config", "invalid value '" + nl + "' for nonlinearity");
    b.residual = get_or<bool>(bj, "residual", false);
    b.row_normalize_output = get_or<bool>(bj, "row_normalize", false);
    if (!bj.contains("layers") || !bj.at("layers").is_array() || bj.at("layers").empty())
      throw CliError("config", "model block needs a non-empty layers array");
    for (const json& lj : bj.at("layers")) {
      check_keys(lj, {"d_in", "d_out", "role", "alignment", "rank1"}, "model layer");
      LayerSpec l;
      l.d_in = get_or<std::uint64_t>(lj, "d_in", 0);
      l.d_out = get_or<std::uint64_t>(lj, "d_out", 0);
      if (l.d_in < 1 || l.d_out < 1)
        throw CliError("config", "layer needs d_in and d_out >= 1");
      l.role = parse_role(get_or<std::string>(lj, "role", "plain"));
      if (lj.contains("alignment"))
        l.alignment = parse_mode(lj.at("alignment").get<std::string>());
      l.rank1_magnitude = get_or<bool>(lj, "rank1", false);
      b.layers.push_back(std::move(l));
    }
    shape.push_back(std::move(b));
  }
  try {
    return synth_model(shape, cfg.solver.seed, path_noise);
  } catch (const std::exception& e) {
    throw CliError("config", e.what());
  }
}

int cmd_analyze(const RunConfig& cfg) {
  if (cfg.calib.is_null())
    throw CliError("config", "analyze requires a calib entry");
  check_keys(cfg.calib, {"n_samples", "sample_len", "path_noise"}, "calib");
  const auto n_samples = get_or<std::uint64_t>(cfg.calib, "n_samples", 1);
  const auto sample_len = get_or<std::uint64_t>(cfg.calib, "sample_len", 16);
  const auto path_noise = get_or<double>(cfg.calib, "path_noise", 0.0);
  if (n_samples < 1 || sample_len < 1)
    throw CliError("config", "calib needs n_samples and sample_len >= 1");
  if (path_noise < 0) throw CliError("config", "path_noise must be >= 0");

  const ModelSpec model = parse_model(cfg, path_noise);
  const DenseMatrix x0 =
      normal_matrix(cfg.solver.seed, kStreamCalib, n_samples * sample_len,
                    model.blocks.front().layers.front().d_in);

  const QuantizedModel qm = quantize_model(model, x0, cfg.solver);
  const PropagationRecord fp = propagate(qm, x0, false);
  const PropagationRecord q = propagate(qm, x0, true);

  ensure_dir(cfg.out_dir);
  CsvReport trace_csv;
  SolveTrace all;
  for (const QuantizedLayer& ql : qm.layers) {
    trace_csv.add_trace(ql.layer_index, ql.solution.trace);
    all.steps.insert(all.steps.end(), ql.solution.trace.steps.begin(),
                     ql.solution.trace.steps.end());
  }
  write_file_atomic(cfg.out_dir + "/trace.csv", trace_csv.str());

  CsvReport metrics_csv;
  metrics_csv.add_metrics(error_metrics(qm, fp, q));
  metrics_csv.add_metrics(cosine_metrics(qm, fp, q));
  metrics_csv.add_metrics(token_metrics(qm, fp, q, sample_len));
  write_file_atomic(cfg.out_dir + "/metrics.csv", metrics_csv.str());

  json layers = json::array();
  for (const QuantizedLayer& ql : qm.layers) {
    json l;
    l["layer"] = ql.layer_index;
    l["block"] = ql.block_index;
    l["role"] = layer_role_name(ql.role);
    l["mode"] = mode_name(ql.mode);
    double obj = 0.0;
    for (const BlockSolve& bs : ql.solution.blocks) obj += final_objective(bs);
    l["final_objective"] = obj;
    l["bits_per_weight"] = bits_per_weight(ql.weight.rows, ql.weight.cols,
                                           cfg.solver.block_width,
                                           cfg.solver.scale_bits);
    layers.push_back(l);
  }

  json summary;
  summary["command"] = "analyze";
  summary["timestamp"] = timestamp_utc();
  summary["config"] = config_echo(cfg);
  summary["layers"] = layers;
  summary["end_to_end_mse"] = end_to_end_mse(fp, q);
  summary["mask_acceptance"] = mask_acceptance_summary(all);
  write_file_atomic(cfg.out_dir + "/summary.json", summary.dump(2) + "\n");
  std::cout << "analyzed " << qm.layers.size() << " layer(s), end-to-end MSE "
            << format_double(end_to_end_mse(fp, q)) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// report

int cmd_report(const std::vector<std::string>& dirs) {
  std::printf("%-24s %-9s %-10s %-10s %12s %14s %9s\n", "run", "command", "mode",
              "amp", "bits/weight", "objective|mse", "accept");
  for (const std::string& dir : dirs) {
    const std::string path = dir + "/summary.json";
    json j;
    try {
      j = json::parse(read_file(path));
    } catch (const std::exception& e) {
      throw CliError("report", path + ": " + std::string(e.what()));
    }
    try {
      const std::string command = j.at("command").get<std::string>();
      const json& cfgj = j.at("config");
      const double bits = command == "quantize"
                              ? j.at("bits_per_weight").get<double>()
                              : j.at("layers").front().at("bits_per_weight").get<double>();
      const double headline = command == "quantize"
                                  ? j.at("total_final_objective").get<double>()
                                  : j.at("end_to_end_mse").get<double>();
      const json& acc = j.at("mask_acceptance");
      const double mean_acc = (acc.at("alpha_r").get<double>() +
                               acc.at("alpha_c").get<double>() +
                               acc.at("b_row").get<double>()) / 3.0;
      std::printf("%-24s %-9s %-10s %-10s %12.6f %14.6g %9.3f\n", dir.c_str(),
                  command.c_str(), cfgj.at("mode").get<std::string>().c_str(),
                  cfgj.at("amp").get<std::string>().c_str(), bits, headline,
                  mean_acc);
    } catch (const json::exception& e) {
      throw CliError("report", path + ": " + std::string(e.what()));
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"1-bit weight quantization engine"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "write synthetic W/X/X̂ tensors");
  std::uint64_t s_din = 8, s_dout = 4, s_n = 16, s_seed = 0;
  double s_noise = 0.0;
  std::string s_out = ".";
  synth->add_option("--d-in", s_din, "input width");
  synth->add_option("--d-out", s_dout, "output width");
  synth->add_option("--n", s_n, "calibration rows");
  synth->add_option("--seed", s_seed, "PRNG seed");
  synth->add_option("--noise", s_noise, "quantized-path noise level");
  synth->add_option("--out-dir", s_out, "output directory");

  // shared config/override flags for quantize and analyze
  Overrides ov;
  std::string config_path;
  auto add_run_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run config")->required();
    cmd->add_option("--mode", [&ov](auto v) { ov.mode = v[0]; return true; },
                    "weight|activation|output");
    cmd->add_option("--amp", [&ov](auto v) { ov.amp = v[0]; return true; },
                    "off|agreement|heaviside");
    cmd->add_option("--iters", [&ov](auto v) { ov.iters = std::stoi(v[0]); return true; }, "T");
    cmd->add_option("--k", [&ov](auto v) { ov.k = std::stoi(v[0]); return true; }, "alpha_c period");
    cmd->add_option("--b-rows", [&ov](auto v) { ov.b_rows = std::stoi(v[0]); return true; }, "B rows per iter");
    cmd->add_option("--block-size", [&ov](auto v) { ov.block_size = std::stoull(v[0]); return true; }, "column block width");
    cmd->add_option("--rel-tol", [&ov](auto v) { ov.rel_tol = std::stod(v[0]); return true; }, "early-exit tolerance");
    cmd->add_option("--seed", [&ov](auto v) { ov.seed = std::stoull(v[0]); return true; }, "PRNG seed");
    cmd->add_option("--scale-bits", [&ov](auto v) { ov.scale_bits = std::stoi(v[0]); return true; }, "bits per stored scale");
    cmd->add_option("--out-dir", [&ov](auto v) { ov.out_dir = v[0]; return true; }, "output directory");
  };
  auto* quantize = app.add_subcommand("quantize", "quantize one weight matrix");
  add_run_flags(quantize);
  auto* analyze = app.add_subcommand("analyze", "quantize a toy model and emit metrics");
  add_run_flags(analyze);

  auto* report = app.add_subcommand("report", "summarize finished runs");
  std::vector<std::string> report_dirs;
  report->add_option("dirs", report_dirs, "run directories")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(s_din, s_dout, s_n, s_seed, s_noise, s_out);
    if (quantize->parsed()) return cmd_quantize(parse_config(config_path, ov));
    if (analyze->parsed()) return cmd_analyze(parse_config(config_path, ov));
    if (report->parsed()) return cmd_report(report_dirs);
  } catch (const CliError& e) {
    std::cerr << "binquant: " << e.what() << "\n";
    return 1;
  } catch (const TensorIoError& e) {
    std::cerr << "binquant: io: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "binquant: config: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "binquant: internal: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
