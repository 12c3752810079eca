#include "pit/network.hpp"

#include <algorithm>
#include <sstream>

#include "pit/tensor.hpp"

namespace pit {

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::fc: return "fc";
    case LayerKind::avgpool: return "avgpool";
  }
  return "?";
}

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "none"; }

std::string to_string(Residual r) {
  switch (r) {
    case Residual::none: return "none";
    case Residual::identity: return "identity";
    case Residual::pointwise: return "pointwise";
  }
  return "?";
}

std::string to_string(TaskKind t) {
  return t == TaskKind::classification ? "classification" : "regression";
}

std::string layer_name(std::size_t block, std::size_t layer) {
  return "block" + std::to_string(block) + ".layer" + std::to_string(layer);
}

std::string skip_name(std::size_t block) { return "block" + std::to_string(block) + ".skip"; }

bool has_masks(const LayerSpec& layer) {
  return layer.searchable && layer.kind != LayerKind::avgpool;
}

ShapeTable propagate_shapes(const NetworkSpec& spec) {
  if (spec.input_channels == 0 || spec.input_length == 0) {
    throw ShapeError("network: input_channels and input_length must be positive");
  }
  if (spec.blocks.empty() || spec.blocks.back().layers.empty()) {
    throw ShapeError("network: at least one layer (the task head) is required");
  }
  ShapeTable table;
  std::size_t c = spec.input_channels;
  std::size_t t = spec.input_length;
  std::size_t flat = 0;
  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const auto& block = spec.blocks[b];
    if (block.layers.empty()) throw ShapeError("block " + std::to_string(b) + ": no layers");
    const std::size_t c_block_in = c, t_block_in = t;
    std::vector<LayerShape> shapes;
    for (std::size_t m = 0; m < block.layers.size(); ++m, ++flat) {
      const auto& L = block.layers[m];
      const std::string where =
          layer_name(b, m) + " (layer index " + std::to_string(flat) + "): ";
      if (L.stride == 0) throw ShapeError(where + "stride must be positive");
      if (L.dropout < 0.0 || L.dropout >= 1.0) throw ShapeError(where + "dropout must be in [0,1)");
      LayerShape s{c, t, 0, 0};
      switch (L.kind) {
        case LayerKind::conv1d:
          if (L.c_out == 0 || L.f_seed == 0) throw ShapeError(where + "c_out and f must be positive");
          s.c_out = L.c_out;
          s.t_out = (t + L.stride - 1) / L.stride;
          break;
        case LayerKind::fc:
          if (L.c_out == 0) throw ShapeError(where + "c_out must be positive");
          if (L.f_seed != 1 || L.stride != 1) throw ShapeError(where + "fc layers need f = 1 and stride = 1");
          s.c_out = L.c_out;
          s.t_out = 1;
          break;
        case LayerKind::avgpool:
          if (L.f_seed == 0) throw ShapeError(where + "pooling window must be positive");
          if (L.f_seed > t) {
            throw ShapeError(where + "pooling window " + std::to_string(L.f_seed) +
                             " larger than sequence length " + std::to_string(t));
          }
          if (L.batchnorm) throw ShapeError(where + "avgpool cannot carry batchnorm");
          s.c_out = c;
          s.t_out = (t - L.f_seed) / L.stride + 1;
          break;
      }
      c = s.c_out;
      t = s.t_out;
      shapes.push_back(s);
    }
    std::optional<LayerShape> skip;
    if (block.residual != Residual::none) {
      if (t != t_block_in) {
        throw ShapeError("block " + std::to_string(b) + ": residual needs matching sequence lengths (" +
                         std::to_string(t_block_in) + " vs " + std::to_string(t) + ")");
      }
      if (block.residual == Residual::identity && c != c_block_in) {
        throw ShapeError("block " + std::to_string(b) + ": identity residual needs matching channels (" +
                         std::to_string(c_block_in) + " vs " + std::to_string(c) + ")");
      }
      if (block.residual == Residual::pointwise) skip = LayerShape{c_block_in, t, c, t};
    }
    table.layers.push_back(std::move(shapes));
    table.skips.push_back(skip);
  }
  const auto& head = spec.blocks.back().layers.back();
  if (head.kind != LayerKind::fc || head.searchable || head.c_out != spec.outputs) {
    throw ShapeError("network: the last layer must be a non-searchable fc head with " +
                     std::to_string(spec.outputs) + " outputs");
  }
  if (spec.blocks.back().residual != Residual::none) {
    throw ShapeError("network: the block holding the task head cannot have a residual");
  }
  if (head.activation != Activation::none || head.dropout != 0.0 || head.batchnorm) {
    throw ShapeError("network: the task head must be a plain fc layer");
  }
  return table;
}

namespace {

LayerKind parse_kind(const std::string& s) {
  if (s == "conv1d" || s == "conv") return LayerKind::conv1d;
  if (s == "fc") return LayerKind::fc;
  if (s == "avgpool") return LayerKind::avgpool;
  throw ConfigError("unknown layer kind '" + s + "'");
}

Residual parse_residual(const std::string& s) {
  if (s == "none") return Residual::none;
  if (s == "identity") return Residual::identity;
  if (s == "pointwise") return Residual::pointwise;
  throw ConfigError("unknown residual kind '" + s + "'");
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "none") return Activation::none;
  throw ConfigError("unknown activation '" + s + "'");
}

// Parses "block.N" or "block.N.layer.M"; returns false for other names.
bool parse_block_name(const std::string& name, std::size_t& block, std::optional<std::size_t>& layer) {
  auto parts = split_list(name, '.');
  if (parts.size() != 2 && parts.size() != 4) return false;
  if (parts[0] != "block") return false;
  try {
    block = std::stoul(parts[1]);
    layer.reset();
    if (parts.size() == 4) {
      if (parts[2] != "layer") return false;
      layer = std::stoul(parts[3]);
    }
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

}  // namespace

NetworkSpec parse_network(const IniDocument& doc, const std::vector<std::string>& other_sections) {
  const IniSection* net = doc.find("network");
  if (!net) throw ConfigError(doc.origin() + ": missing [network] section");
  if (net->has("seed")) {
    NetworkSpec spec = builtin_seed(net->get_string("seed"));
    net->reject_unused();
    if (!doc.with_prefix("block.").empty()) {
      throw ConfigError(doc.origin() + ": [block.*] sections cannot be combined with a built-in seed");
    }
    return spec;
  }
  NetworkSpec spec;
  spec.input_channels = net->get_size("input_channels");
  spec.input_length = net->get_size("input_length");
  const std::string head = net->get_string("head", "classification");
  if (head == "classification") {
    spec.task = TaskKind::classification;
  } else if (head == "regression") {
    spec.task = TaskKind::regression;
  } else {
    throw ConfigError("[network] head must be classification or regression, got '" + head + "'");
  }
  spec.outputs = net->has("outputs") ? net->get_size("outputs") : net->get_size("classes");
  net->reject_unused();

  std::map<std::size_t, BlockSpec> blocks;
  std::map<std::size_t, std::map<std::size_t, LayerSpec>> layers;
  for (const auto* sec : doc.with_prefix("block.")) {
    std::size_t b = 0;
    std::optional<std::size_t> m;
    if (!parse_block_name(sec->name(), b, m)) {
      throw ConfigError(doc.origin() + ":" + std::to_string(sec->line()) + ": bad section name [" +
                        sec->name() + "]");
    }
    if (!m) {
      blocks[b].residual = parse_residual(sec->get_string("residual", "none"));
      sec->reject_unused();
      continue;
    }
    LayerSpec L;
    L.kind = parse_kind(sec->get_string("kind"));
    L.c_out = sec->get_size("c_out", L.kind == LayerKind::avgpool ? std::optional<std::size_t>(0) : std::nullopt);
    L.f_seed = sec->get_size("f", 1);
    L.stride = sec->get_size("stride", 1);
    L.batchnorm = sec->get_bool("batchnorm", false);
    L.activation = parse_activation(sec->get_string("activation", "none"));
    L.dropout = sec->get_double("dropout", 0.0);
    L.searchable = sec->get_bool("searchable", L.kind != LayerKind::avgpool);
    sec->reject_unused();
    layers[b][*m] = L;
  }
  for (const auto& s : doc.sections()) {
    const bool other = std::find(other_sections.begin(), other_sections.end(), s.name()) != other_sections.end();
    if (!other && s.name() != "network" && s.name().rfind("block.", 0) != 0) {
      throw ConfigError(doc.origin() + ":" + std::to_string(s.line()) + ": unknown section [" + s.name() + "]");
    }
  }
  std::size_t expect_b = 0;
  for (auto& [b, ls] : layers) {
    if (b != expect_b++) throw ConfigError("network: block indices must be contiguous from 0");
    BlockSpec block;
    block.residual = blocks.count(b) ? blocks[b].residual : Residual::none;
    std::size_t expect_m = 0;
    for (auto& [m, L] : ls) {
      if (m != expect_m++) {
        throw ConfigError("network: layer indices of block " + std::to_string(b) + " must be contiguous from 0");
      }
      block.layers.push_back(L);
    }
    spec.blocks.push_back(std::move(block));
  }
  for (const auto& [b, _] : blocks) {
    if (!layers.count(b)) throw ConfigError("network: block " + std::to_string(b) + " has no layers");
  }
  propagate_shapes(spec);
  return spec;
}

NetworkSpec load_network(const std::string& path) { return parse_network(IniDocument::load(path)); }

std::string serialize_network(const NetworkSpec& spec) {
  std::ostringstream os;
  os << "[network]\n"
     << "input_channels = " << spec.input_channels << "\n"
     << "input_length = " << spec.input_length << "\n"
     << "head = " << to_string(spec.task) << "\n"
     << (spec.task == TaskKind::classification ? "classes = " : "outputs = ") << spec.outputs << "\n";
  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const auto& block = spec.blocks[b];
    os << "\n[block." << b << "]\nresidual = " << to_string(block.residual) << "\n";
    for (std::size_t m = 0; m < block.layers.size(); ++m) {
      const auto& L = block.layers[m];
      os << "\n[block." << b << ".layer." << m << "]\n"
         << "kind = " << to_string(L.kind) << "\n";
      if (L.kind != LayerKind::avgpool) os << "c_out = " << L.c_out << "\n";
      os << "f = " << L.f_seed << "\n"
         << "stride = " << L.stride << "\n"
         << "batchnorm = " << (L.batchnorm ? "true" : "false") << "\n"
         << "activation = " << to_string(L.activation) << "\n"
         << "dropout = " << L.dropout << "\n"
         << "searchable = " << (L.searchable ? "true" : "false") << "\n";
    }
  }
  return os.str();
}

namespace {

LayerSpec conv(std::size_t c_out, std::size_t f, bool bn, double dropout) {
  LayerSpec L;
  L.kind = LayerKind::conv1d;
  L.c_out = c_out;
  L.f_seed = f;
  L.batchnorm = bn;
  L.activation = Activation::relu;
  L.dropout = dropout;
  return L;
}

LayerSpec head(std::size_t outputs) {
  LayerSpec L;
  L.kind = LayerKind::fc;
  L.c_out = outputs;
  L.searchable = false;
  return L;
}

}  // namespace

NetworkSpec builtin_seed(std::string_view name) {
  NetworkSpec spec;
  if (name == "ecg_tcn") {
    // Residual TCN for ECG5000 (1 x 140, 5 classes). Receptive fields of the
    // dilated reference network (3 / 9 / 17 / 33) are kept with d = 1.
    spec.input_channels = 1;
    spec.input_length = 140;
    spec.outputs = 5;
    spec.blocks.push_back({{conv(8, 3, true, 0.0)}, Residual::none});
    spec.blocks.push_back({{conv(12, 9, true, 0.5), conv(12, 9, true, 0.5)}, Residual::pointwise});
    spec.blocks.push_back({{conv(12, 17, true, 0.5), conv(12, 17, true, 0.5)}, Residual::identity});
    spec.blocks.push_back({{conv(16, 33, true, 0.5), conv(16, 33, true, 0.5)}, Residual::pointwise});
    LayerSpec pool;
    pool.kind = LayerKind::avgpool;
    pool.f_seed = 35;
    pool.stride = 35;
    pool.searchable = false;
    spec.blocks.push_back({{pool, head(5)}, Residual::none});
    return spec;
  }
  if (name == "synth_small") {
    spec.input_channels = 1;
    spec.input_length = 32;
    spec.outputs = 2;
    spec.blocks.push_back({{conv(16, 16, false, 0.0), conv(16, 16, false, 0.0),
                            conv(16, 16, false, 0.0), head(2)},
                           Residual::none});
    return spec;
  }
  throw ConfigError("unknown built-in seed '" + std::string(name) + "' (expected ecg_tcn or synth_small)");
}

}  // namespace pit
