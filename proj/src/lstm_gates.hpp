#pragma once

#include <cstddef>

// Elementwise LSTM gate math. Lives in its own translation unit, compiled
// with vectorised libm; inputs are clamped so every value stays finite.
namespace vpf::nn::detail {

/// z holds raw pre-activations (batch x 4h) on entry and activated gates on
/// exit. Writes c, tanh(c) and h (batch x h).
void lstm_gates_forward(double* z, const double* c_prev, double* c, double* tanh_c, double* h, std::size_t batch,
                        std::size_t hidden);

/// Gate pre-activation gradients dz (batch x 4h) and dc_prev from dh, dc.
void lstm_gates_backward(const double* gates, const double* tanh_c, const double* c_prev, const double* dh,
                         const double* dc, double* dz, double* dc_prev, std::size_t batch, std::size_t hidden);

}  // namespace vpf::nn::detail
