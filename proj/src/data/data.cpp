#include "pit/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "pit/rng.hpp"

namespace pit {

Dataset subset(const Dataset& data, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.num_classes = data.num_classes;
  out.class_names = data.class_names;
  out.inputs = gather_inputs(data, indices);
  if (data.is_classification()) {
    for (std::size_t i : indices) out.labels.push_back(data.labels.at(i));
  }
  if (data.targets.defined()) {
    const std::size_t o = data.targets.dim(1);
    out.targets = Tensor(Shape{indices.size(), o});
    for (std::size_t a = 0; a < indices.size(); ++a) {
      std::copy_n(data.targets.data().begin() + indices[a] * o, o, out.targets.data().begin() + a * o);
    }
  }
  return out;
}

Tensor gather_inputs(const Dataset& data, const std::vector<std::size_t>& indices) {
  const std::size_t c = data.channels(), t = data.length(), per = c * t;
  Tensor x(Shape{indices.size(), c, t});
  for (std::size_t a = 0; a < indices.size(); ++a) {
    if (indices[a] >= data.size()) throw DataError("sample index out of range");
    std::copy_n(data.inputs.data().begin() + indices[a] * per, per, x.data().begin() + a * per);
  }
  return x;
}

namespace {

char detect_delimiter(const std::string& line) {
  if (line.find(',') != std::string::npos) return ',';
  if (line.find('\t') != std::string::npos) return '\t';
  return ' ';
}

std::vector<std::string> split_cells(const std::string& line, char delim) {
  std::vector<std::string> cells;
  if (delim == ' ') {
    std::istringstream is(line);
    std::string cell;
    while (is >> cell) cells.push_back(cell);
    return cells;
  }
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, delim)) cells.push_back(cell);
  if (!line.empty() && line.back() == delim) cells.emplace_back();
  return cells;
}

bool parse_double(std::string s, double& out) {
  s.erase(0, s.find_first_not_of(" \t\r"));
  s.erase(s.find_last_not_of(" \t\r") + 1);
  if (s.empty()) return false;
  try {
    std::size_t used = 0;
    out = std::stod(s, &used);
    return used == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

std::string canonical_label(const std::string& cell, double value) {
  if (value == std::floor(value) && std::fabs(value) < 1e15) {
    return std::to_string(static_cast<long long>(value));
  }
  std::string s = cell;
  s.erase(0, s.find_first_not_of(" \t\r"));
  s.erase(s.find_last_not_of(" \t\r") + 1);
  return s;
}

}  // namespace

Dataset parse_ucr_text(const std::string& text, const std::string& origin, std::optional<char> delimiter,
                       const std::vector<std::string>* classes) {
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> raw_labels;
  std::vector<double> label_values;
  std::vector<double> values;
  std::size_t t_len = 0;
  char delim = delimiter.value_or('\0');
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (delim == '\0') delim = detect_delimiter(line);
    const auto cells = split_cells(line, delim);
    if (cells.size() < 2) throw DataError(origin + ":" + std::to_string(line_no) + ": expected a label and values");
    double label = 0.0;
    if (!parse_double(cells[0], label)) {
      throw DataError(origin + ":" + std::to_string(line_no) + ": non-numeric label '" + cells[0] + "'");
    }
    if (t_len == 0) {
      t_len = cells.size() - 1;
    } else if (cells.size() - 1 != t_len) {
      throw DataError(origin + ":" + std::to_string(line_no) + ": ragged row with " + std::to_string(cells.size() - 1) +
                      " values, expected " + std::to_string(t_len));
    }
    for (std::size_t j = 1; j < cells.size(); ++j) {
      double v = 0.0;
      if (!parse_double(cells[j], v)) {
        throw DataError(origin + ":" + std::to_string(line_no) + ": non-numeric cell " + std::to_string(j + 1) + " '" +
                        cells[j] + "'");
      }
      values.push_back(v);
    }
    raw_labels.push_back(canonical_label(cells[0], label));
    label_values.push_back(label);
  }
  if (raw_labels.empty()) throw DataError(origin + ": no samples");
  Dataset out;
  if (classes) {
    out.class_names = *classes;
  } else {
    std::map<double, std::string> ordered;
    for (std::size_t i = 0; i < raw_labels.size(); ++i) ordered.emplace(label_values[i], raw_labels[i]);
    for (const auto& [v, name] : ordered) out.class_names.push_back(name);
  }
  out.num_classes = out.class_names.size();
  std::map<std::string, int> index;
  for (std::size_t k = 0; k < out.class_names.size(); ++k) index[out.class_names[k]] = static_cast<int>(k);
  std::size_t row = 0;
  is.clear();
  for (const auto& name : raw_labels) {
    const auto it = index.find(name);
    if (it == index.end()) {
      throw DataError(origin + ": sample " + std::to_string(row + 1) + " has label '" + name +
                      "' that does not occur in the training data");
    }
    out.labels.push_back(it->second);
    ++row;
  }
  out.inputs = Tensor(Shape{raw_labels.size(), 1, t_len}, std::move(values));
  return out;
}

Dataset load_ucr_csv(const std::string& path, std::optional<char> delimiter, const std::vector<std::string>* classes) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_ucr_text(ss.str(), path, delimiter, classes);
}

NormStats fit_normalization(const Dataset& train) {
  const std::size_t n = train.size(), c = train.channels(), t = train.length();
  if (n == 0) throw DataError("cannot fit normalization on an empty dataset");
  NormStats s;
  s.mean.assign(c, 0.0);
  s.std.assign(c, 0.0);
  const double count = static_cast<double>(n * t);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < t; ++k) sum += train.inputs[(i * c + ch) * t + k];
    }
    const double mu = sum / count;
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < t; ++k) {
        const double d = train.inputs[(i * c + ch) * t + k] - mu;
        var += d * d;
      }
    }
    s.mean[ch] = mu;
    s.std[ch] = std::sqrt(var / count);
  }
  return s;
}

void apply_normalization(Dataset& data, const NormStats& stats) {
  const std::size_t n = data.size(), c = data.channels(), t = data.length();
  if (stats.mean.size() != c) throw DataError("normalization statistics do not match the channel count");
  Tensor x = data.inputs.clone();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double scale = stats.std[ch] > 0.0 ? 1.0 / stats.std[ch] : 1.0;
      for (std::size_t k = 0; k < t; ++k) {
        double& v = x[(i * c + ch) * t + k];
        v = (v - stats.mean[ch]) * scale;
      }
    }
  }
  data.inputs = x;
}

Dataset window(const Dataset& data, std::size_t length, std::size_t shift) {
  const std::size_t n = data.size(), c = data.channels(), t = data.length();
  if (shift == 0) throw DataError("window shift must be at least 1");
  if (length == 0 || length > t) {
    throw DataError("window length " + std::to_string(length) + " does not fit series of length " + std::to_string(t));
  }
  const std::size_t per = (t - length) / shift + 1;
  Dataset out;
  out.num_classes = data.num_classes;
  out.class_names = data.class_names;
  out.inputs = Tensor(Shape{n * per, c, length});
  std::vector<std::size_t> source;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t w = 0; w < per; ++w) {
      const std::size_t dst = i * per + w;
      for (std::size_t ch = 0; ch < c; ++ch) {
        std::copy_n(data.inputs.data().begin() + (i * c + ch) * t + w * shift, length,
                    out.inputs.data().begin() + (dst * c + ch) * length);
      }
      source.push_back(i);
    }
  }
  if (data.is_classification()) {
    for (std::size_t i : source) out.labels.push_back(data.labels[i]);
  }
  if (data.targets.defined()) out.targets = subset(data, source).targets;
  return out;
}

Dataset synth_dilated_task(std::size_t n, std::size_t t, const std::vector<std::size_t>& lags, double noise_std,
                           std::uint64_t rng_seed) {
  if (lags.empty()) throw DataError("synthetic task needs at least one lag");
  for (std::size_t lag : lags) {
    if (lag >= t) throw DataError("lag " + std::to_string(lag) + " does not fit series length " + std::to_string(t));
  }
  Rng rng(rng_seed);
  Dataset out;
  out.num_classes = 2;
  out.class_names = {"0", "1"};
  out.inputs = Tensor(Shape{n, 1, t});
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < t; ++k) out.inputs[i * t + k] = rng.normal();
    for (std::size_t lag : lags) s += out.inputs[i * t + (t - 1 - lag)];
    s += noise_std * rng.normal();
    out.labels.push_back(s > 0.0 ? 1 : 0);
  }
  return out;
}

DataSplits split(const Dataset& data, const SplitFractions& f, bool stratified, std::uint64_t rng_seed) {
  if (f.train < 0 || f.val < 0 || f.test < 0 || std::fabs(f.train + f.val + f.test - 1.0) > 1e-9) {
    throw DataError("split fractions must be non-negative and sum to 1");
  }
  const std::size_t parts = (f.train > 0) + (f.val > 0) + (f.test > 0);
  std::vector<std::vector<std::size_t>> groups;
  if (stratified && data.is_classification()) {
    groups.resize(data.num_classes);
    for (std::size_t i = 0; i < data.size(); ++i) groups[static_cast<std::size_t>(data.labels[i])].push_back(i);
  } else {
    groups.emplace_back(data.size());
    std::iota(groups[0].begin(), groups[0].end(), std::size_t{0});
  }
  Rng rng(rng_seed);
  std::vector<std::size_t> tr, va, te;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto& idx = groups[g];
    if (idx.empty()) continue;
    if (idx.size() < parts) {
      throw DataError("class '" + (g < data.class_names.size() ? data.class_names[g] : std::to_string(g)) + "' has " +
                      std::to_string(idx.size()) + " samples, fewer than the " + std::to_string(parts) + " splits");
    }
    const auto perm = rng.permutation(idx.size());
    std::vector<std::size_t> shuffled;
    for (std::size_t p : perm) shuffled.push_back(idx[p]);
    const double n = static_cast<double>(shuffled.size());
    std::size_t n_val = static_cast<std::size_t>(std::llround(f.val * n));
    std::size_t n_test = static_cast<std::size_t>(std::llround(f.test * n));
    if (f.val > 0 && n_val == 0) n_val = 1;
    if (f.test > 0 && n_test == 0) n_test = 1;
    if (f.train > 0 && n_val + n_test >= shuffled.size()) {
      // leave at least one training sample
      if (n_test > (f.test > 0 ? 1u : 0u)) {
        --n_test;
      } else {
        --n_val;
      }
    }
    if (f.train == 0) {
      if (f.test > 0) n_test = shuffled.size() - n_val; else n_val = shuffled.size();
    }
    const std::size_t n_train = shuffled.size() - n_val - n_test;
    tr.insert(tr.end(), shuffled.begin(), shuffled.begin() + static_cast<long>(n_train));
    va.insert(va.end(), shuffled.begin() + static_cast<long>(n_train),
              shuffled.begin() + static_cast<long>(n_train + n_val));
    te.insert(te.end(), shuffled.begin() + static_cast<long>(n_train + n_val), shuffled.end());
  }
  std::sort(tr.begin(), tr.end());
  std::sort(va.begin(), va.end());
  std::sort(te.begin(), te.end());
  return {subset(data, tr), subset(data, va), subset(data, te)};
}

void save_dataset(const std::string& path, const Dataset& data) {
  NamedTensors t{{"inputs", data.inputs}};
  if (data.is_classification()) {
    Tensor labels(Shape{data.labels.size()});
    for (std::size_t i = 0; i < data.labels.size(); ++i) labels[i] = data.labels[i];
    t.emplace_back("labels", labels);
  }
  if (data.targets.defined()) t.emplace_back("targets", data.targets);
  save_tensors(path, t);
}

Dataset load_dataset(const std::string& path) {
  Dataset out;
  for (auto& [name, t] : load_tensors(path)) {
    if (name == "inputs") {
      if (t.rank() != 3) throw DataError(path + ": inputs must be [N, C, T]");
      out.inputs = t;
    } else if (name == "labels") {
      int max_label = -1;
      for (double v : t.data()) {
        if (v < 0 || v != std::floor(v)) throw DataError(path + ": labels must be non-negative integers");
        out.labels.push_back(static_cast<int>(v));
        max_label = std::max(max_label, static_cast<int>(v));
      }
      out.num_classes = static_cast<std::size_t>(max_label + 1);
      for (std::size_t k = 0; k < out.num_classes; ++k) out.class_names.push_back(std::to_string(k));
    } else if (name == "targets") {
      out.targets = t;
    } else {
      throw DataError(path + ": unexpected record '" + name + "'");
    }
  }
  if (!out.inputs.defined()) throw DataError(path + ": missing inputs record");
  if (out.is_classification() && out.labels.size() != out.size()) throw DataError(path + ": label count mismatch");
  return out;
}

}  // namespace pit
