#include "pit/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <tuple>

namespace pit::oracle {

std::vector<double> finite_diff(const std::function<double(const std::vector<double>&)>& f,
                                const std::vector<double>& x, double step) {
  std::vector<double> g(x.size());
  std::vector<double> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double hi = f(probe);
    probe[i] = x[i] - step;
    const double lo = f(probe);
    probe[i] = x[i];
    g[i] = (hi - lo) / (2.0 * step);
  }
  return g;
}

double grad_error(double analytic, double numeric, double abs_floor) {
  const double diff = std::fabs(analytic - numeric);
  const double scale = std::max(std::fabs(analytic), std::fabs(numeric));
  if (scale < abs_floor) return diff <= abs_floor ? 0.0 : diff;
  return diff / scale;
}

std::vector<double> reference_conv(const std::vector<double>& x, std::size_t n, std::size_t c_in,
                                   std::size_t t_in, const std::vector<double>& w, std::size_t c_out,
                                   std::size_t k, const std::vector<double>& bias, std::size_t stride,
                                   std::size_t dilation) {
  if (x.size() != n * c_in * t_in || w.size() != c_out * c_in * k) {
    throw std::invalid_argument("reference_conv: size mismatch");
  }
  const std::size_t t_out = (t_in + stride - 1) / stride;
  std::vector<double> y(n * c_out * t_out, 0.0);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t m = 0; m < c_out; ++m) {
      for (std::size_t t = 0; t < t_out; ++t) {
        double s = bias.empty() ? 0.0 : bias[m];
        for (std::size_t i = 0; i < k; ++i) {
          const long long src = static_cast<long long>(t * stride) - static_cast<long long>(dilation * i);
          if (src < 0) continue;
          for (std::size_t l = 0; l < c_in; ++l) {
            s += x[(b * c_in + l) * t_in + static_cast<std::size_t>(src)] * w[(m * c_in + l) * k + i];
          }
        }
        y[(b * c_out + m) * t_out + t] = s;
      }
    }
  }
  return y;
}

PlainConv shrunk_layer(const std::vector<double>& seed_weight, const std::vector<double>& seed_bias,
                       std::size_t c_out_seed, std::size_t c_in, std::size_t f_seed,
                       const std::vector<std::size_t>& channels, std::size_t f, std::size_t d) {
  if (d == 0 || f == 0 || f > f_seed || (f - 1) % d != 0) {
    throw std::invalid_argument("shrunk_layer: f and d do not describe a regular tap set");
  }
  PlainConv out;
  out.c_out = channels.size();
  out.c_in = c_in;
  out.k = (f - 1) / d + 1;
  out.dilation = d;
  out.weight.assign(out.c_out * c_in * out.k, 0.0);
  for (std::size_t a = 0; a < channels.size(); ++a) {
    const std::size_t m = channels[a];
    if (m >= c_out_seed) throw std::invalid_argument("shrunk_layer: channel out of range");
    out.bias.push_back(seed_bias.empty() ? 0.0 : seed_bias[m]);
    for (std::size_t l = 0; l < c_in; ++l) {
      for (std::size_t j = 0; j < out.k; ++j) {
        out.weight[(a * c_in + l) * out.k + j] = seed_weight[(m * c_in + l) * f_seed + j * d];
      }
    }
  }
  return out;
}

std::vector<std::size_t> dominance_bruteforce(const std::vector<Point2>& points, bool maximize_metric) {
  const auto better_eq = [&](double a, double b) { return maximize_metric ? a >= b : a <= b; };
  std::vector<std::size_t> front;
  for (std::size_t i = 0; i < points.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < points.size() && !dominated; ++j) {
      if (i == j) continue;
      const auto& p = points[j];
      const auto& q = points[i];
      const bool same = p.metric == q.metric && p.cost == q.cost;
      if (same) {
        dominated = j < i;
        continue;
      }
      dominated = better_eq(p.metric, q.metric) && p.cost <= q.cost;
    }
    if (!dominated) front.push_back(i);
  }
  return front;
}

std::size_t layer_configurations_bruteforce(std::size_t c_out_seed, std::size_t f_seed) {
  // Receptive-field patterns: prefixes of ones (monotone). Dilation patterns:
  // for every binary gamma vector (entry 0 on), compute the aggregated mask.
  std::size_t len = 0;
  while ((std::size_t{1} << len) < f_seed) ++len;
  std::set<std::pair<std::size_t, std::size_t>> shapes;  // (F, d)
  const std::size_t gamma_patterns = len == 0 ? 1 : (std::size_t{1} << (len - 1));
  for (std::size_t fb = 1; fb <= f_seed; ++fb) {
    for (std::size_t g = 0; g < gamma_patterns; ++g) {
      std::vector<int> gamma(len, 0);
      if (len > 0) gamma[0] = 1;
      for (std::size_t q = 1; q < len; ++q) gamma[q] = (g >> (q - 1)) & 1;
      std::vector<std::size_t> taps;
      for (std::size_t i = 0; i < fb; ++i) {
        // tap i is gated by the gamma entries whose period divides i
        std::size_t v = 0;
        while (v + 1 < len && i != 0 && i % (std::size_t{1} << (v + 1)) == 0) ++v;
        const std::size_t first = i == 0 ? 0 : (len == 0 ? 0 : len - 1 - v);
        int total = 0;
        for (std::size_t q = first; q < len; ++q) total += gamma[q];
        if (len == 0 || total > 0) taps.push_back(i);
      }
      const std::size_t f = taps.back() + 1;
      const std::size_t d = taps.size() > 1 ? taps[1] : 1;
      shapes.emplace(f, d);
    }
  }
  return shapes.size() * c_out_seed;
}

}  // namespace pit::oracle
