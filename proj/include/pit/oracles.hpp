#pragma once

#include <cstddef>
#include <functional>
#include <vector>

// Reference implementations used to check the engine. They work on plain
// vectors and share no code with the modules they verify.
namespace pit::oracle {

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every i.
std::vector<double> finite_diff(const std::function<double(const std::vector<double>&)>& f,
                                const std::vector<double>& x, double step = 1e-4);

/// Relative error |a - b| / max(|a|, |b|), or the absolute error when both
/// magnitudes are below `abs_floor`.
double grad_error(double analytic, double numeric, double abs_floor = 1e-6);

/// Loop-nest causal conv. x is [n][c_in][t_in], w is [c_out][c_in][k],
/// result is [n][c_out][ceil(t_in / stride)].
std::vector<double> reference_conv(const std::vector<double>& x, std::size_t n, std::size_t c_in,
                                   std::size_t t_in, const std::vector<double>& w, std::size_t c_out,
                                   std::size_t k, const std::vector<double>& bias, std::size_t stride,
                                   std::size_t dilation);

struct PlainConv {
  std::vector<double> weight;  // [c_out][c_in][k]
  std::vector<double> bias;    // [c_out]
  std::size_t c_out = 0, c_in = 0, k = 0, dilation = 1;
};

/// Slices a seed conv ([c_out_seed][c_in][f_seed] weights) down to the given
/// output channels, receptive field f and dilation d: tap j of the result is
/// seed tap j * d, for j = 0 .. (f - 1) / d.
PlainConv shrunk_layer(const std::vector<double>& seed_weight, const std::vector<double>& seed_bias,
                       std::size_t c_out_seed, std::size_t c_in, std::size_t f_seed,
                       const std::vector<std::size_t>& channels, std::size_t f, std::size_t d);

struct Point2 {
  double metric = 0.0;
  double cost = 0.0;
};

/// Indices of the points no other point dominates. A point dominates another
/// when its metric is at least as good and its cost at most as high, with one
/// of the two strictly better; of exact duplicates only the first is kept.
std::vector<std::size_t> dominance_bruteforce(const std::vector<Point2>& points, bool maximize_metric);

/// Distinct (kept channels, F, d) triples reachable by one layer, found by
/// walking every binary pattern of the receptive-field and dilation masks.
std::size_t layer_configurations_bruteforce(std::size_t c_out_seed, std::size_t f_seed);

}  // namespace pit::oracle
