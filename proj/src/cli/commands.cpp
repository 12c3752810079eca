#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "pit/arch.hpp"
#include "pit/cli.hpp"
#include "pit/container.hpp"
#include "pit/records.hpp"
#include "pit/run_config.hpp"

extern char** environ;

namespace pit {

namespace {

namespace fs = std::filesystem;

class VerificationFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  os << text;
  if (!os) throw DataError("cannot write " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

bool g_echo_config = true;

void log_config(const RunConfig& cfg, const fs::path& out) {
  const std::string text = resolved_config(cfg);
  write_file(out / "config.resolved.cfg", text);
  if (g_echo_config) std::cerr << "# resolved config\n" << text << "# end of resolved config\n";
}

NasModel warm_model(const RunConfig& cfg, const DataSplits& data, const std::string& warmup_ckpt,
                    History* history) {
  if (!warmup_ckpt.empty()) {
    NasModel m = load_checkpoint(warmup_ckpt);
    if (serialize_network(m.spec()) != serialize_network(cfg.network)) {
      throw ConfigError("warmup checkpoint " + warmup_ckpt + " was trained for a different network");
    }
    return m;
  }
  NasModel m = NasModel::build(cfg.network, cfg.search.rng_seed);
  const History h = warmup(m, data.train, data.val, cfg.search);
  if (history) *history = h;
  return m;
}

void report_terms(NasModel& model, const Dataset& val, const SearchConfig& cfg) {
  const Evaluation e = evaluate(model, val, cfg.batch_size);
  const CostBreakdown c = compute_costs(model);
  const double r = (cfg.reg_kind == RegKind::size ? c.r_size : c.r_ops).item();
  std::cout << "epoch 0: task loss " << fmt(e.loss) << ", lambda*R " << fmt(cfg.lambda * r) << " (lambda "
            << fmt(cfg.lambda) << ", R " << fmt(r) << ")\n";
}

// Search + fine-tune from a warm model, writing every artifact to `out`.
ParetoPoint search_to_dir(const RunConfig& cfg, const DataSplits& data, const NasModel& warm, const fs::path& out) {
  fs::create_directories(out);
  RunOutcome r = run_point(warm, data, cfg.search);
  r.point.checkpoint_path = out.string();
  save_checkpoint(out.string(), r.model);
  NamedTensors masks;
  for (const auto& [name, t] : r.model.named_tensors()) {
    if (name.ends_with(".alpha") || name.ends_with(".beta") || name.ends_with(".gamma")) masks.emplace_back(name, t);
  }
  save_tensors((out / "masks.pitd").string(), masks);
  write_file(out / "arch.cfg", serialize_arch(r.point.arch));
  write_file(out / "arch.txt", format_arch_table(r.point.arch));
  write_file(out / "history.jsonl", history_to_jsonl(r.search_history, "search") +
                                        history_to_jsonl(r.finetune.history, "finetune"));
  write_file(out / "metrics.json", point_to_json(r.point, false) + "\n");
  return r.point;
}

int cmd_warmup(const std::string& config, const std::string& out) {
  const RunConfig cfg = load_run_config(config);
  log_config(cfg, out);
  const DataSplits data = load_splits(cfg.data, cfg.network);
  History h;
  NasModel m = warm_model(cfg, data, "", &h);
  save_checkpoint(out, m);
  write_file(fs::path(out) / "history.jsonl", history_to_jsonl(h, "warmup"));
  const Evaluation e = evaluate(m, data.val, cfg.search.batch_size);
  std::cout << "warmup: " << h.epochs.size() << " epochs, best epoch " << h.best_epoch << ", validation "
            << e.metric_name << " " << fmt(e.metric) << "\n";
  report_terms(m, data.val, cfg.search);
  return kExitOk;
}

int cmd_search(const std::string& config, std::optional<double> lambda, const std::string& reg,
               const std::string& warmup_ckpt, const std::string& out) {
  RunConfig cfg = load_run_config(config);
  if (lambda) {
    cfg.lambdas = {*lambda};
    cfg.search.lambda = *lambda;
  }
  if (!reg.empty()) cfg.search.reg_kind = parse_reg_kind(reg);
  cfg.search.validate();
  log_config(cfg, out);
  const DataSplits data = load_splits(cfg.data, cfg.network);
  NasModel warm = warm_model(cfg, data, warmup_ckpt, nullptr);
  report_terms(warm, data.val, cfg.search);
  const ParetoPoint p = search_to_dir(cfg, data, warm, out);
  std::cout << read_file(fs::path(out) / "arch.txt");
  std::cout << p.metric_name << " " << fmt(p.metric_value) << " (validation " << fmt(p.val_metric) << ")\n";
  for (const auto& f : p.flags) std::cout << "flag: " << f << "\n";
  return kExitOk;
}

std::string point_dir_name(std::size_t index, double lambda) {
  std::ostringstream os;
  os << "lambda_" << std::setw(2) << std::setfill('0') << index << "_" << std::setprecision(4) << lambda;
  return os.str();
}

// Starts a worker whose stdout and stderr go to `log`.
int spawn_search(const std::vector<std::string>& args, const fs::path& log) {
  std::vector<char*> argv;
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_adddup2(&actions, STDOUT_FILENO, STDERR_FILENO);
  pid_t pid = 0;
  const int rc = posix_spawn(&pid, argv[0], &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  return rc == 0 ? pid : -1;
}

int cmd_sweep(const std::string& config, const std::vector<double>& lambdas_flag, const std::string& reg,
              const std::string& warmup_ckpt, const std::string& out, std::size_t workers, bool plot) {
  RunConfig cfg = load_run_config(config);
  if (!reg.empty()) cfg.search.reg_kind = parse_reg_kind(reg);
  std::vector<double> lambdas = lambdas_flag.empty() ? cfg.lambdas : lambdas_flag;
  if (lambdas.empty()) lambdas = {default_lambda(cfg.network)};
  for (double l : lambdas) {
    if (!(l >= 0.0)) throw ConfigError("lambda values must be non-negative");
  }
  lambdas = dedup_lambdas(lambdas);
  cfg.lambdas = lambdas;
  cfg.search.lambda = lambdas.front();
  log_config(cfg, out);
  const DataSplits data = load_splits(cfg.data, cfg.network);

  std::string warm_dir = warmup_ckpt;
  if (warm_dir.empty()) {
    warm_dir = (fs::path(out) / "warmup").string();
    History h;
    NasModel warm = warm_model(cfg, data, "", &h);
    save_checkpoint(warm_dir, warm);
    write_file(fs::path(warm_dir) / "history.jsonl", history_to_jsonl(h, "warmup"));
  }
  const NasModel warm = load_checkpoint(warm_dir);
  if (serialize_network(warm.spec()) != serialize_network(cfg.network)) {
    throw ConfigError("warmup checkpoint " + warm_dir + " was trained for a different network");
  }

  std::vector<fs::path> dirs;
  for (std::size_t i = 0; i < lambdas.size(); ++i) dirs.push_back(fs::path(out) / point_dir_name(i, lambdas[i]));
  std::vector<std::string> errors(lambdas.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
      RunConfig point_cfg = cfg;
      point_cfg.lambdas = {lambdas[i]};
      point_cfg.search.lambda = lambdas[i];
      try {
        write_file(dirs[i] / "config.resolved.cfg", resolved_config(point_cfg));
        search_to_dir(point_cfg, data, warm, dirs[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
      std::cout << "lambda " << fmt(lambdas[i]) << (errors[i].empty() ? " done" : " failed: " + errors[i]) << "\n";
    }
  } else {
    const std::string self = fs::read_symlink("/proc/self/exe").string();
    std::size_t next = 0, running = 0;
    std::map<pid_t, std::size_t> active;
    while (next < lambdas.size() || running > 0) {
      while (running < workers && next < lambdas.size()) {
        std::ostringstream l;
        l << std::setprecision(17) << lambdas[next];
        const std::vector<std::string> args{self, "search", "--config", config, "--lambda", l.str(),
                                            "--reg", to_string(cfg.search.reg_kind), "--warmup-ckpt", warm_dir,
                                            "--out", dirs[next].string(), "--quiet"};
        fs::create_directories(dirs[next]);
        const int pid = spawn_search(args, dirs[next] / "search.log");
        if (pid < 0) {
          errors[next] = "could not start worker";
        } else {
          active[pid] = next;
          ++running;
        }
        ++next;
      }
      if (running == 0) continue;
      int status = 0;
      const pid_t done = ::wait(&status);
      if (done < 0) break;
      const std::size_t i = active.at(done);
      active.erase(done);
      --running;
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        errors[i] = "worker exited with status " + std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1);
      }
      std::cout << "lambda " << fmt(lambdas[i]) << (errors[i].empty() ? " done" : " failed: " + errors[i]) << "\n";
    }
  }

  std::vector<ParetoPoint> points;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    ParetoPoint p;
    if (errors[i].empty()) {
      try {
        p = point_from_json(read_file(dirs[i] / "metrics.json"));
        p.arch = parse_arch(IniDocument::load((dirs[i] / "arch.cfg").string()));
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
    if (!errors[i].empty()) {
      p = ParetoPoint{};
      p.lambda = lambdas[i];
      p.reg_kind = cfg.search.reg_kind;
      p.rng_seed = cfg.search.rng_seed;
      p.metric_name = metric_name(data.train);
      p.checkpoint_path = dirs[i].string();
      p.error = errors[i];
    }
    points.push_back(std::move(p));
  }
  const auto front = pareto_filter(points);
  std::ostringstream jsonl;
  for (std::size_t i = 0; i < points.size(); ++i) {
    jsonl << point_to_json(points[i], std::find(front.begin(), front.end(), i) != front.end()) << "\n";
  }
  write_file(fs::path(out) / "pareto.jsonl", jsonl.str());
  if (plot) write_file(fs::path(out) / "pareto.svg", pareto_svg(points, front));

  std::cout << std::left << std::setw(12) << "lambda" << std::setw(10) << "weights" << std::setw(12) << "MACs"
            << std::setw(12) << points.front().metric_name << "front\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    std::cout << std::setw(12) << fmt(p.lambda, 4);
    if (p.failed()) {
      std::cout << "failed: " << p.error << "\n";
      continue;
    }
    std::cout << std::setw(10) << p.params << std::setw(12) << p.macs << std::setw(12) << fmt(p.metric_value, 5)
              << (std::find(front.begin(), front.end(), i) != front.end() ? "*" : "") << "\n";
  }
  return kExitOk;
}

int cmd_extract(const std::string& ckpt, const std::string& out) {
  NasModel m = load_checkpoint(ckpt);
  const EffectiveArch arch = extract(m);
  const ConcreteModel pruned = materialize(m, arch);
  write_file(fs::path(out) / "arch.cfg", serialize_arch(arch));
  write_file(fs::path(out) / "arch.txt", format_arch_table(arch));
  save_tensors((fs::path(out) / "pruned.pitd").string(), pruned.named_tensors());
  std::cout << format_arch_table(arch);
  return kExitOk;
}

int cmd_count(const std::string& arch_path) {
  if (!fs::exists(arch_path)) throw DataError("architecture file not found: " + arch_path);
  const EffectiveArch arch = parse_arch(IniDocument::load(arch_path));
  const IntegerCosts c = count(arch);
  std::cout << format_arch_table(arch);
  std::cout << "{\"params_weights_only\":" << c.weights << ",\"params_with_bias\":" << c.with_bias
            << ",\"macs\":" << c.macs << "}\n";
  return kExitOk;
}

int cmd_verify(const std::string& ckpt, std::size_t trials, double tol, std::uint64_t seed) {
  NasModel m = load_checkpoint(ckpt);
  ConcreteModel pruned = materialize(m, extract(m));
  const EquivalenceReport r = verify_equivalence(m, pruned, trials, tol, seed);
  std::cout << (r.passed ? "PASS" : "FAIL") << ": max |masked - pruned| = " << fmt(r.max_abs_diff, 3) << " over "
            << r.trials << " inputs (worst input " << r.worst_trial << ", tolerance " << fmt(r.tolerance, 3) << ")\n";
  if (!r.passed) {
    if (r.failing_layer) std::cout << "first diverging layer: " << *r.failing_layer << "\n";
    throw VerificationFailed("pruned model differs from the masked model");
  }
  return kExitOk;
}

int cmd_enumerate(const std::string& config, std::uint64_t cap) {
  if (!fs::exists(config)) throw ConfigError("config file not found: " + config);
  NetworkSpec spec;
  try {
    spec = parse_network(IniDocument::load(config), {"data", "train", "nas"});
  } catch (const ShapeError& e) {
    throw ConfigError(e.what());
  }
  const SearchSpaceCount c = enumerate_search_space(spec, cap);
  std::cout << "exact " << c.exact << "\nformula " << fmt(c.formula, 17) << "\nratio "
            << fmt(c.formula / static_cast<double>(c.exact)) << "\nper layer";
  for (auto n : c.per_layer) std::cout << " " << n;
  std::cout << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Differentiable channel, receptive-field and dilation search for 1D TCNs"};
  app.footer(
      "Exit codes: 0 ok, 1 internal error, 2 configuration error, 3 data error (missing or malformed files), "
      "4 verification failure, 5 search-space cap exceeded.");
  app.require_subcommand(1);

  std::string config, out, ckpt, warmup_ckpt, reg, arch_path, lambdas_text;
  std::optional<double> lambda;
  std::size_t workers = 1, trials = 100;
  std::uint64_t cap = 1000000, seed = 0;
  double tol = 1e-5;
  bool plot = false, quiet = false;

  auto* warmup_cmd = app.add_subcommand("warmup", "Train the seed weights with all masks at 1");
  warmup_cmd->add_option("--config", config, "Run configuration")->required();
  warmup_cmd->add_option("--out", out, "Output checkpoint directory")->required();

  auto* search_cmd = app.add_subcommand("search", "Search masks for one lambda, then fine-tune");
  search_cmd->add_option("--config", config, "Run configuration")->required();
  search_cmd->add_option("--lambda", lambda, "Regularization strength (default from config, else 1/seed weights)");
  search_cmd->add_option("--reg", reg, "Cost regularizer: size or ops");
  search_cmd->add_option("--warmup-ckpt", warmup_ckpt, "Warmup checkpoint directory (warms up first if absent)");
  search_cmd->add_option("--out", out, "Output directory")->required();
  search_cmd->add_flag("--quiet", quiet, "Do not echo the resolved config");

  auto* sweep_cmd = app.add_subcommand("sweep", "Search a list of lambdas and collect the Pareto front");
  sweep_cmd->add_option("--config", config, "Run configuration")->required();
  sweep_cmd->add_option("--lambdas", lambdas_text, "Comma separated lambdas (default from config)");
  sweep_cmd->add_option("--reg", reg, "Cost regularizer: size or ops");
  sweep_cmd->add_option("--warmup-ckpt", warmup_ckpt, "Shared warmup checkpoint directory");
  sweep_cmd->add_option("--out", out, "Output directory")->required();
  sweep_cmd->add_option("--workers", workers, "Parallel worker processes")->check(CLI::PositiveNumber);
  sweep_cmd->add_flag("--plot", plot, "Also write pareto.svg");

  auto* extract_cmd = app.add_subcommand("extract", "Extract and materialize the architecture of a checkpoint");
  extract_cmd->add_option("--ckpt", ckpt, "Checkpoint directory")->required();
  extract_cmd->add_option("--out", out, "Output directory")->required();

  auto* count_cmd = app.add_subcommand("count", "Count weights and MACs of an architecture file");
  count_cmd->add_option("--arch", arch_path, "Architecture file (arch.cfg)")->required();

  auto* verify_cmd = app.add_subcommand("verify", "Check the pruned model against the masked model");
  verify_cmd->add_option("--ckpt", ckpt, "Checkpoint directory")->required();
  verify_cmd->add_option("--trials", trials, "Random inputs")->check(CLI::PositiveNumber);
  verify_cmd->add_option("--tol", tol, "Maximum absolute output difference");
  verify_cmd->add_option("--seed", seed, "Input generator seed");

  auto* enumerate_cmd = app.add_subcommand("enumerate", "Count the architectures of a seed's search space");
  enumerate_cmd->add_option("--config", config, "Network or run configuration")->required();
  enumerate_cmd->add_option("--cap", cap, "Largest count to enumerate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*warmup_cmd) return cmd_warmup(config, out);
    if (*search_cmd) {
      g_echo_config = !quiet;
      return cmd_search(config, lambda, reg, warmup_ckpt, out);
    }
    if (*sweep_cmd) {
      std::vector<double> lambdas;
      for (const auto& item : split_list(lambdas_text)) {
        try {
          lambdas.push_back(std::stod(item));
        } catch (const std::exception&) {
          throw ConfigError("--lambdas has a non-numeric item '" + item + "'");
        }
      }
      return cmd_sweep(config, lambdas, reg, warmup_ckpt, out, workers, plot);
    }
    if (*extract_cmd) return cmd_extract(ckpt, out);
    if (*count_cmd) return cmd_count(arch_path);
    if (*verify_cmd) return cmd_verify(ckpt, trials, tol, seed);
    if (*enumerate_cmd) return cmd_enumerate(config, cap);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const VerificationFailed& e) {
    std::cerr << "verification failed: " << e.what() << "\n";
    return kExitVerification;
  } catch (const CapExceeded& e) {
    std::cerr << e.what() << "\n";
    return kExitCapExceeded;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace pit
