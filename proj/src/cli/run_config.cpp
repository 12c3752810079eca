#include "pit/run_config.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "pit/arch.hpp"
#include "pit/container.hpp"

namespace pit {

namespace {

std::string join_doubles(const std::vector<double>& v) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  return os.str();
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  return os.str();
}

std::optional<char> delimiter_char(const std::string& name) {
  if (name == "auto") return std::nullopt;
  if (name == "comma") return ',';
  if (name == "tab") return '\t';
  if (name == "space") return ' ';
  throw ConfigError("[data] delimiter must be auto, comma, tab or space, got '" + name + "'");
}

DataConfig parse_data(const IniSection* sec) {
  DataConfig d;
  if (!sec) return d;
  d.format = sec->get_string("format", d.format);
  if (d.format != "synthetic" && d.format != "ucr" && d.format != "pitd") {
    throw ConfigError("[data] format must be synthetic, ucr or pitd, got '" + d.format + "'");
  }
  d.train_path = sec->get_string("train", "");
  d.test_path = sec->get_string("test", "");
  d.delimiter = sec->get_string("delimiter", d.delimiter);
  delimiter_char(d.delimiter);
  d.val_fraction = sec->get_double("val_fraction", d.val_fraction);
  d.test_fraction = sec->get_double("test_fraction", d.test_fraction);
  d.normalize = sec->get_bool("normalize", d.normalize);
  d.split_seed = static_cast<std::uint64_t>(sec->get_size("split_seed", d.split_seed));
  d.samples = sec->get_size("samples", d.samples);
  d.length = sec->get_size("length", d.length);
  if (sec->has("lags")) d.lags = sec->get_size_list("lags");
  d.noise = sec->get_double("noise", d.noise);
  d.data_seed = static_cast<std::uint64_t>(sec->get_size("data_seed", d.data_seed));
  sec->reject_unused();
  if (d.val_fraction <= 0.0 || d.test_fraction < 0.0 || d.val_fraction + d.test_fraction >= 1.0) {
    throw ConfigError("[data] need val_fraction > 0, test_fraction >= 0 and their sum below 1");
  }
  if (d.format != "synthetic" && d.train_path.empty()) throw ConfigError("[data] train path is required");
  return d;
}

}  // namespace

PhaseSchedule parse_schedule(const std::string& s) {
  const auto parts = split_list(s, ':');
  try {
    if (parts.size() == 2 && parts[0] == "epochs") return PhaseSchedule::fixed(std::stoul(parts[1]));
    if ((parts.size() == 2 || parts.size() == 3) && parts[0] == "converge") {
      const std::size_t patience = std::stoul(parts[1]);
      if (patience == 0) throw ConfigError("patience must be at least 1");
      return PhaseSchedule::converge(patience, parts.size() == 3 ? std::stoul(parts[2]) : 200);
    }
  } catch (const std::logic_error&) {
  }
  throw ConfigError("schedule must be epochs:N or converge:PATIENCE[:MAX_EPOCHS], got '" + s + "'");
}

std::string to_string(const PhaseSchedule& s) {
  if (!s.to_convergence) return "epochs:" + std::to_string(s.epochs);
  return "converge:" + std::to_string(s.patience) + ":" + std::to_string(s.max_epochs);
}

RunConfig parse_run_config(const IniDocument& doc) {
  RunConfig cfg;
  for (const auto& sec : doc.sections()) {
    const std::string& n = sec.name();
    if (n != "network" && n != "data" && n != "train" && n != "nas" && n.rfind("block.", 0) != 0) {
      throw ConfigError(doc.origin() + ":" + std::to_string(sec.line()) + ": unknown section [" + n + "]");
    }
  }
  try {
    cfg.network = parse_network(doc, {"data", "train", "nas"});
  } catch (const ShapeError& e) {
    throw ConfigError(doc.origin() + ": " + e.what());
  }
  cfg.data = parse_data(doc.find("data"));
  SearchConfig& s = cfg.search;
  if (const IniSection* t = doc.find("train")) {
    s.batch_size = t->get_size("batch_size", s.batch_size);
    s.lr_weights = t->get_double("lr_weights", s.lr_weights);
    s.lr_masks = t->get_double("lr_masks", s.lr_masks);
    s.search_patience = t->get_size("patience", s.search_patience);
    s.search_max_epochs = t->get_size("max_epochs", s.search_max_epochs);
    s.rng_seed = static_cast<std::uint64_t>(t->get_size("rng_seed", s.rng_seed));
    t->reject_unused();
  }
  if (const IniSection* n = doc.find("nas")) {
    if (n->has("lambda") && n->has("lambda_list")) throw ConfigError("[nas] give either lambda or lambda_list");
    if (n->has("lambda")) cfg.lambdas = {n->get_double("lambda")};
    if (n->has("lambda_list")) cfg.lambdas = n->get_double_list("lambda_list");
    s.reg_kind = parse_reg_kind(n->get_string("reg", "size"));
    s.warmup = parse_schedule(n->get_string("warmup", to_string(s.warmup)));
    s.finetune = parse_schedule(n->get_string("finetune", to_string(s.finetune)));
    s.finetune_mode = parse_finetune_mode(n->get_string("finetune_mode", "finetune"));
    n->reject_unused();
  }
  for (double l : cfg.lambdas) {
    if (!(l >= 0.0)) throw ConfigError("[nas] lambda values must be non-negative");
  }
  s.lambda = cfg.lambdas.empty() ? default_lambda(cfg.network) : cfg.lambdas.front();
  s.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path);
  return parse_run_config(IniDocument::load(path));
}

std::string resolved_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << serialize_network(cfg.network) << "\n";
  const DataConfig& d = cfg.data;
  os << "[data]\nformat = " << d.format << "\n";
  if (d.format == "synthetic") {
    os << "samples = " << d.samples << "\nlength = " << d.length << "\nlags = " << join_sizes(d.lags)
       << "\nnoise = " << d.noise << "\ndata_seed = " << d.data_seed << "\n";
  } else {
    os << "train = " << d.train_path << "\n";
    if (!d.test_path.empty()) os << "test = " << d.test_path << "\n";
    os << "delimiter = " << d.delimiter << "\n";
  }
  os << "val_fraction = " << d.val_fraction << "\ntest_fraction = " << d.test_fraction
     << "\nnormalize = " << (d.normalize ? "true" : "false") << "\nsplit_seed = " << d.split_seed << "\n\n";
  const SearchConfig& s = cfg.search;
  os << "[train]\nbatch_size = " << s.batch_size << "\nlr_weights = " << s.lr_weights << "\nlr_masks = " << s.lr_masks
     << "\npatience = " << s.search_patience << "\nmax_epochs = " << s.search_max_epochs
     << "\nrng_seed = " << s.rng_seed << "\n\n";
  os << "[nas]\n";
  if (cfg.lambdas.size() > 1) {
    os << "lambda_list = " << join_doubles(cfg.lambdas) << "\n";
  } else {
    os << "lambda = " << s.lambda << "\n";
  }
  os << "reg = " << to_string(s.reg_kind) << "\nwarmup = " << to_string(s.warmup)
     << "\nfinetune = " << to_string(s.finetune) << "\nfinetune_mode = " << to_string(s.finetune_mode) << "\n";
  return os.str();
}

double default_lambda(const NetworkSpec& spec) {
  const NasModel seed = NasModel::build(spec, 0);
  return 1.0 / static_cast<double>(extract(seed).params_weights_only);
}

DataSplits load_splits(const DataConfig& cfg, const NetworkSpec& network) {
  DataSplits out;
  const SplitFractions three{1.0 - cfg.val_fraction - cfg.test_fraction, cfg.val_fraction, cfg.test_fraction};
  if (cfg.format == "synthetic") {
    out = split(synth_dilated_task(cfg.samples, cfg.length, cfg.lags, cfg.noise, cfg.data_seed), three, true,
                cfg.split_seed);
  } else {
    Dataset train = cfg.format == "ucr" ? load_ucr_csv(cfg.train_path, delimiter_char(cfg.delimiter))
                                        : load_dataset(cfg.train_path);
    if (cfg.test_path.empty()) {
      out = split(train, three, true, cfg.split_seed);
    } else {
      Dataset test = cfg.format == "ucr"
                         ? load_ucr_csv(cfg.test_path, delimiter_char(cfg.delimiter), &train.class_names)
                         : load_dataset(cfg.test_path);
      out = split(train, {1.0 - cfg.val_fraction, cfg.val_fraction, 0.0}, true, cfg.split_seed);
      out.test = std::move(test);
    }
  }
  if (cfg.normalize) {
    const NormStats stats = fit_normalization(out.train);
    apply_normalization(out.train, stats);
    apply_normalization(out.val, stats);
    if (out.test.size() > 0) apply_normalization(out.test, stats);
  }
  const Dataset& t = out.train;
  if (t.channels() != network.input_channels || t.length() != network.input_length) {
    throw DataError("data has " + std::to_string(t.channels()) + " channels of length " + std::to_string(t.length()) +
                    ", the network expects " + std::to_string(network.input_channels) + " x " +
                    std::to_string(network.input_length));
  }
  if (network.task == TaskKind::classification && t.num_classes != network.outputs) {
    throw DataError("data has " + std::to_string(t.num_classes) + " classes, the network has " +
                    std::to_string(network.outputs) + " outputs");
  }
  return out;
}

void save_checkpoint(const std::string& dir, const NasModel& model) {
  std::filesystem::create_directories(dir);
  save_tensors(dir + "/model.pitd", model.named_tensors());
  std::ofstream os(dir + "/network.cfg");
  os << serialize_network(model.spec());
  if (!os) throw DataError("cannot write " + dir + "/network.cfg");
}

NasModel load_checkpoint(const std::string& dir) {
  const std::string net = dir + "/network.cfg", weights = dir + "/model.pitd";
  if (!std::filesystem::exists(net) || !std::filesystem::exists(weights)) {
    throw DataError("not a checkpoint directory (needs network.cfg and model.pitd): " + dir);
  }
  NasModel model = NasModel::build(load_network(net), 0);
  try {
    model.load_named(load_tensors(weights));
  } catch (const ShapeError& e) {
    throw DataError(weights + ": " + e.what());
  }
  return model;
}

}  // namespace pit
