#pragma once

// Independent reference evaluations used only by tests. These transcribe the
// defining formulas directly and share no code with the library kernels.

#include <cmath>
#include <random>
#include <vector>

#include "cogrl/layers.hpp"
#include "cogrl/tensor.hpp"

namespace oracle {

inline cogrl::Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng,
                                   double lo = -1.0, double hi = 1.0) {
  cogrl::Tensor t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (double& v : t.values()) v = d(rng);
  return t;
}

// y_j(u,v) = g_j tanh( sum_i sum_{p,q} x_i(a-p, b-q) k_ij(p,q) ),
// (a,b) = (R-1 + u*stride, R-1 + v*stride): the kernel lies fully inside x.
inline cogrl::Tensor conv_direct(const cogrl::Tensor& kernels, const std::vector<double>& gains,
                                 std::size_t stride, const cogrl::Tensor& x) {
  const std::size_t out_c = kernels.dim(0), in_c = kernels.dim(1), r = kernels.dim(2);
  const std::size_t h = x.dim(1), w = x.dim(2);
  const std::size_t oh = (h - r) / stride + 1, ow = (w - r) / stride + 1;
  cogrl::Tensor y({out_c, oh, ow});
  for (std::size_t j = 0; j < out_c; ++j) {
    for (std::size_t u = 0; u < oh; ++u) {
      for (std::size_t v = 0; v < ow; ++v) {
        const long a = static_cast<long>(r - 1 + u * stride);
        const long b = static_cast<long>(r - 1 + v * stride);
        long double sum = 0.0L;
        for (std::size_t i = 0; i < in_c; ++i) {
          for (long p = 0; p < static_cast<long>(r); ++p) {
            for (long q = 0; q < static_cast<long>(r); ++q) {
              sum += static_cast<long double>(x.at(i, a - p, b - q)) * kernels.at(j, i, p, q);
            }
          }
        }
        y.at(j, u, v) = gains[j] * std::tanh(static_cast<double>(sum));
      }
    }
  }
  return y;
}

inline double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct LstmOut {
  std::vector<double> i, f, g, o, c, h;
};

// Scalar transcription of the six LSTM equations.
inline LstmOut lstm_direct(const cogrl::LSTMCell& cell, const std::vector<double>& x,
                           const std::vector<double>& h_prev, const std::vector<double>& c_prev) {
  const std::size_t nh = cell.hidden_size(), ni = cell.input_size();
  auto affine = [&](std::size_t gate, std::size_t u) {
    double z = 0.0;
    for (std::size_t k = 0; k < ni; ++k) z += cell.input_weights[gate].at(u, k) * x[k];
    z += cell.input_biases[gate][u];
    for (std::size_t k = 0; k < nh; ++k) z += cell.hidden_weights[gate].at(u, k) * h_prev[k];
    z += cell.hidden_biases[gate][u];
    return z;
  };
  LstmOut out;
  for (std::size_t u = 0; u < nh; ++u) {
    const double i = sig(affine(0, u));
    const double f = sig(affine(1, u));
    const double g = std::tanh(affine(2, u));
    const double o = sig(affine(3, u));
    const double c = f * c_prev[u] + i * g;
    out.i.push_back(i);
    out.f.push_back(f);
    out.g.push_back(g);
    out.o.push_back(o);
    out.c.push_back(c);
    out.h.push_back(o * std::tanh(c));
  }
  return out;
}

}  // namespace oracle
