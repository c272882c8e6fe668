#pragma once

// Batched jet evaluation of one subnetwork over many inputs. The value, first
// and second derivative channels are stacked as 3N rows so every layer is one
// matrix product; the backward pass is written out by hand.

#include <span>
#include <vector>

#include "tnn/autodiff.hpp"
#include "tnn/matrix.hpp"

namespace tnn {

/// Forward intermediates kept for the backward pass.
struct MlpCache {
  std::size_t rows = 0;           // N inputs
  std::vector<double> x;          // inputs
  std::vector<Matrix> pre;        // per hidden layer: 3N x width pre-activations
  std::vector<Matrix> post;       // per hidden layer: 3N x width activations
  std::vector<Matrix> sin_v;      // per hidden layer: N x width, sin of value channel
  std::vector<Matrix> cos_v;      // per hidden layer: N x width
  std::vector<Matrix> wt;         // transposed weights per layer (in x out)
};

/// out (3N x outputs): rows [0,N) values, [N,2N) first, [2N,3N) second derivatives.
void mlp_forward(const Arch& arch, std::span<const double> params, std::span<const double> x,
                 MlpCache& cache, Matrix& out);

/// Accumulates d(loss)/d(params) into grad given out_bar = d(loss)/d(out).
void mlp_backward(const Arch& arch, std::span<const double> params, const MlpCache& cache,
                  const Matrix& out_bar, std::span<double> grad);

}  // namespace tnn
