// nfcast: synthetic traces, window caches, training, tuning and evaluation.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "nfcast/config.hpp"
#include "nfcast/dataset.hpp"
#include "nfcast/error.hpp"
#include "nfcast/hpo.hpp"
#include "nfcast/metrics.hpp"
#include "nfcast/nn.hpp"
#include "nfcast/trainer.hpp"

namespace fs = std::filesystem;
using namespace nfcast;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::EmptySpace:
    case ErrorKind::KernelTooLarge:
      return kExitUsage;
    case ErrorKind::MissingColumn:
    case ErrorKind::MalformedRow:
    case ErrorKind::OutOfRange:
    case ErrorKind::NonFinite:
    case ErrorKind::TooFewWindows:
    case ErrorKind::VersionMismatch:
    case ErrorKind::Corrupt:
    case ErrorKind::Io:
      return kExitData;
    default:
      return kExitRuntime;
  }
}

// Config file (optional) overridden by repeated --set key=value flags.
Config load_config(const std::string& path, const std::vector<std::string>& sets) {
  Config c;
  if (!path.empty()) c = Config::read(path);
  Config flags;
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw Error(ErrorKind::InvalidArgument, "--set expects key=value, got " + kv);
    flags.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  c.override_with(flags);
  return c;
}

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
}

// Directory outputs get <dir>/manifest.txt; file outputs get <file>.manifest.txt.
void write_manifest(const fs::path& out, const std::string& command, const std::string& config_path,
                    const Config& resolved, bool directory = true) {
  Config m;
  m.set("command", command);
  m.set("config_file", config_path);
  m.set("artifact_dir", (directory ? fs::absolute(out) : fs::absolute(out).parent_path()).string());
  m.set("tool_version", NFCAST_VERSION);
  for (const auto& [k, v] : resolved.values()) m.set("param." + k, v);
  m.write(directory ? out / "manifest.txt" : fs::path(out.string() + ".manifest.txt"));
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  return out;
}

void write_report_dir(const fs::path& dir, const MetricsReport& rep) {
  auto out = open_out(dir / "report.txt");
  rep.write(out);
  auto ip = open_out(dir / "degree_ip.csv");
  write_degree_csv(ip, rep.ip_degrees);
  auto port = open_out(dir / "degree_port.csv");
  write_degree_csv(port, rep.port_degrees);
  for (auto r : kAllRelations) {
    auto rel = open_out(dir / ("degree_" + std::string(relation_name(r)) + ".csv"));
    write_degree_csv(rel, rep.relation_degrees[index(r)]);
  }
}

struct Options {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  std::string flows;
  std::string data;
  std::string model = "gnn";
  std::string run;
  std::string split = "test";
  std::string runs;
  std::size_t length = 512;
  std::size_t stride = 512;
  std::uint64_t split_seed = 0;
  std::size_t trials = 20;
  std::size_t parallel = 1;
  std::size_t max_epochs = 75;
};

int cmd_synth(const Options& o) {
  const Config c = load_config(o.config, o.sets);
  const TraceConfig t = trace_config_from(c);
  const fs::path out(o.out);
  if (out.has_parent_path()) prepare_out_dir(out.parent_path());
  Config resolved = c;
  resolved.set("n_flows", std::to_string(t.n_flows));
  resolved.set("trace_seed", std::to_string(t.seed));
  write_manifest(out, "synth", o.config, resolved, false);
  write_flow_csv(out, generate_synthetic_trace(t));
  std::cout << "wrote " << t.n_flows << " flows to " << out.string() << '\n';
  return 0;
}

int cmd_windows(const Options& o) {
  const fs::path out(o.out);
  prepare_out_dir(out);
  DatasetOptions d;
  d.window_length = o.length;
  d.stride = o.stride;
  d.split_seed = o.split_seed;
  Config resolved;
  resolved.set("window_length", std::to_string(o.length));
  resolved.set("stride", std::to_string(o.stride));
  resolved.set("split_seed", std::to_string(o.split_seed));
  resolved.set("flows", o.flows);
  write_manifest(out, "windows", "", resolved);
  const auto data = prepare_dataset(parse_flow_csv(fs::path(o.flows)), d);
  write_dataset(out, data);
  std::cout << "cached " << data.graphs.size() << " graphs (" << data.splits.count(Split::Train) << " train, "
            << data.splits.count(Split::Val) << " val, " << data.splits.count(Split::Test) << " test), vocabulary "
            << data.vocab.size() << '\n';
  return 0;
}

int cmd_train(const Options& o) {
  const ModelKind kind = parse_model_kind(o.model);
  Config c = load_config(o.config, o.sets);
  c.require_known(known_config_keys());
  c.set("model", std::string(to_string(kind)));
  const TrainConfig tc = train_config_from(c, kind);
  c.set("epochs", std::to_string(tc.epochs));
  c.set("batch_size", std::to_string(tc.batch_size));
  c.set("grad_accumulation", std::to_string(tc.grad_accumulation));
  c.set("seed", std::to_string(tc.seed));

  const fs::path out(o.out);
  prepare_out_dir(out);
  write_manifest(out, "train", o.config, c);
  const auto data = load_dataset(o.data);
  const auto examples = build_examples(data);
  auto model = make_model(kind, c, data, tc.seed);
  const auto result = train(*model, examples.train, examples.val, tc,
                            [](std::size_t epoch, double score) {
                              std::cout << "epoch " << epoch << " val_compscore " << score << '\n';
                              return true;
                            });
  nn::save_checkpoint(out / "checkpoint.nfck", model->parameters());
  c.write(out / "config.txt");
  auto hist = open_out(out / "history.csv");
  write_history_csv(hist, result.history);
  std::cout << "best epoch " << result.best_epoch << " val_compscore " << result.best_score << '\n';
  return 0;
}

int cmd_tune(const Options& o) {
  const ModelKind kind = parse_model_kind(o.model);
  Config base = load_config(o.config, o.sets);
  base.require_known(known_config_keys());
  base.set("model", std::string(to_string(kind)));
  const fs::path out(o.out);
  prepare_out_dir(out);
  Config resolved = base;
  resolved.set("trials", std::to_string(o.trials));
  resolved.set("parallel", std::to_string(o.parallel));
  resolved.set("max_epochs", std::to_string(o.max_epochs));
  write_manifest(out, "tune", o.config, resolved);

  const auto data = load_dataset(o.data);
  const auto examples = build_examples(data);
  const SearchSpace space = kind == ModelKind::Gnn ? default_gnn_space() : default_baseline_space();
  StudyConfig sc;
  sc.n_trials = o.trials;
  sc.parallel = o.parallel;
  sc.max_epochs = o.max_epochs;
  sc.journal = out / "journal.csv";

  const Objective objective = [&](const Assignment& params, TrialReporter& reporter) {
    Config c = base;
    for (const auto& [k, v] : to_param_map(space, params)) c.set(k, v);
    TrainConfig tc = train_config_from(c, kind);
    tc.epochs = o.max_epochs;
    auto model = make_model(kind, c, data, derive_seed(tc.seed, reporter.trial_id()));
    const auto result = train(*model, examples.train, examples.val, tc,
                              [&](std::size_t epoch, double score) { return reporter.report(epoch, score); });
    return result.best_score;
  };
  const auto study = run_study(objective, space, sc);

  Config best = base;
  for (const auto& [k, v] : to_param_map(space, study.best.params)) best.set(k, v);
  best.set("epochs", std::to_string(o.max_epochs));
  best.write(out / "best_config.txt");
  std::size_t pruned = 0;
  for (const auto& t : study.trials) pruned += t.status == TrialStatus::Pruned;
  std::cout << "best trial " << study.best.id << " score " << *study.best.final_score << " (" << pruned << " of "
            << study.trials.size() << " pruned)\n";
  return 0;
}

int cmd_eval(const Options& o) {
  const fs::path run(o.run);
  const Config c = Config::read(run / "config.txt");
  const ModelKind kind = parse_model_kind(c.get("model", ""));
  const Split split = parse_split(o.split);
  const fs::path out(o.out);
  prepare_out_dir(out);
  Config resolved = c;
  resolved.set("run", o.run);
  resolved.set("split", o.split);
  write_manifest(out, "eval", (run / "config.txt").string(), resolved);

  const auto data = load_dataset(o.data);
  auto examples = build_examples(data);
  auto model = make_model(kind, c, data, c.get_u64("seed", 0));
  nn::load_checkpoint(run / "checkpoint.nfck", model->parameters());
  const auto report = evaluate(*model, examples.of(split), data.vocab.size());
  write_report_dir(out, report);
  std::cout << "mae " << report.mae << " macro_accuracy " << report.macro_accuracy << " compound_score "
            << report.compound_score << '\n';
  return 0;
}

int cmd_report(const Options& o) {
  const fs::path out(o.out);
  if (out.has_parent_path()) prepare_out_dir(out.parent_path());
  Config resolved;
  resolved.set("runs", o.runs);
  write_manifest(out, "report", "", resolved, false);
  std::vector<MetricsReport> reports;
  std::stringstream list(o.runs);
  std::string item;
  while (std::getline(list, item, ',')) {
    if (item.empty()) continue;
    fs::path p(item);
    if (fs::is_directory(p)) p /= "report.txt";
    std::ifstream in(p);
    if (!in) throw Error(ErrorKind::Io, "cannot open report " + p.string());
    reports.push_back(MetricsReport::read(in));
  }
  if (reports.empty()) throw Error(ErrorKind::InvalidArgument, "--runs names no reports");
  auto csv = open_out(out);
  csv << "model,mae,mse,accuracy,auroc,precision\n";
  for (const auto& r : reports) {
    csv << r.model << ',' << r.mae << ',' << r.mse << ',' << r.macro_accuracy << ',' << r.macro_auroc << ','
        << r.macro_precision << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Per-flow NetFlow forecasting with graph and sequence models"};
  app.set_version_flag("--version", NFCAST_VERSION);
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic flow trace");
  synth->add_option("--config", o.config, "key=value config file")->check(CLI::ExistingFile);
  synth->add_option("--set", o.sets, "Override a config key (key=value)");
  synth->add_option("--out", o.out, "Output CSV")->required();

  auto* windows = app.add_subcommand("windows", "Window a trace, build the vocabulary, splits and graph cache");
  windows->add_option("--flows", o.flows, "Flow CSV")->required()->check(CLI::ExistingFile);
  windows->add_option("--out", o.out, "Data directory")->required();
  windows->add_option("--length", o.length, "Window length")->capture_default_str();
  windows->add_option("--stride", o.stride, "Window stride (must equal length)")->capture_default_str();
  windows->add_option("--split-seed", o.split_seed, "Split permutation seed")->capture_default_str();

  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--model", o.model, "gnn, dlinear or lstm")->capture_default_str();
  train_cmd->add_option("--data", o.data, "Data directory")->required();
  train_cmd->add_option("--config", o.config, "key=value config file")->check(CLI::ExistingFile);
  train_cmd->add_option("--set", o.sets, "Override a config key (key=value)");
  train_cmd->add_option("--out", o.out, "Run directory")->required();

  auto* tune = app.add_subcommand("tune", "Hyperparameter study with TPE and successive halving");
  tune->add_option("--model", o.model, "gnn, dlinear or lstm")->capture_default_str();
  tune->add_option("--data", o.data, "Data directory")->required();
  tune->add_option("--config", o.config, "Base key=value config file")->check(CLI::ExistingFile);
  tune->add_option("--set", o.sets, "Override a config key (key=value)");
  tune->add_option("--trials", o.trials, "Number of trials")->capture_default_str();
  tune->add_option("--parallel", o.parallel, "Concurrent trials")->capture_default_str()->check(CLI::PositiveNumber);
  tune->add_option("--max-epochs", o.max_epochs, "Epoch budget per trial")->capture_default_str();
  tune->add_option("--out", o.out, "Study directory")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate a trained run on a split");
  eval->add_option("--run", o.run, "Run directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--data", o.data, "Data directory")->required();
  eval->add_option("--split", o.split, "train, val or test")->capture_default_str();
  eval->add_option("--out", o.out, "Report directory")->required();

  auto* report = app.add_subcommand("report", "Aggregate evaluation reports into one table");
  report->add_option("--runs", o.runs, "Comma-separated report directories")->required();
  report->add_option("--out", o.out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(o);
    if (*windows) return cmd_windows(o);
    if (*train_cmd) return cmd_train(o);
    if (*tune) return cmd_tune(o);
    if (*eval) return cmd_eval(o);
    if (*report) return cmd_report(o);
  } catch (const Error& e) {
    std::cerr << "nfcast: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "nfcast: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
