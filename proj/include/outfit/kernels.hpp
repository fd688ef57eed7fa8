#pragma once

#include <span>

#include "outfit/nn.hpp"

// Dense image kernels used by the reference CNN. Every kernel has a naive
// serial version in `kernels::reference` that is kept for testing, and a fast
// version (im2col + GEMM, OpenMP over the batch). The fast versions write each
// image's contribution to its own buffer and reduce in index order, so results
// do not depend on the thread count.
//
// Tensors are contiguous doubles laid out [batch][channel][row][col].

namespace outfit::kernels {

struct ConvShape {
  int in_channels = 0;
  int out_channels = 0;
  int height = 0;
  int width = 0;
  int kernel = 3;
  int stride = 1;
  int pad = 1;

  int out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  int out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
  int patch() const { return in_channels * kernel * kernel; }
  std::size_t in_size() const { return static_cast<std::size_t>(in_channels) * height * width; }
  std::size_t out_size() const { return static_cast<std::size_t>(out_channels) * out_height() * out_width(); }
};

// weight: out_channels x (in_channels*kernel*kernel), bias: out_channels x 1.
void conv2d_forward(const ConvShape& s, int batch, std::span<const double> input, const Matrix& weight,
                    const Matrix& bias, std::span<double> output);
// Accumulates into d_weight / d_bias. d_input may be empty to skip it.
void conv2d_backward(const ConvShape& s, int batch, std::span<const double> input, const Matrix& weight,
                     std::span<const double> d_output, Matrix& d_weight, Matrix& d_bias, std::span<double> d_input);

// 2x2 average pooling, stride 2; height and width must be even.
void avg_pool2_forward(int channels, int height, int width, int batch, std::span<const double> input,
                       std::span<double> output);
void avg_pool2_backward(int channels, int height, int width, int batch, std::span<const double> d_output,
                        std::span<double> d_input);

// Global average pooling to a (channels x batch) matrix.
Batch global_avg_pool_forward(int channels, int height, int width, int batch, std::span<const double> input);
void global_avg_pool_backward(int channels, int height, int width, const Batch& d_output, std::span<double> d_input);

/// Euclidean distance from q to every column of points.
Vector column_distances(const Batch& points, const Vector& q);

namespace reference {

void conv2d_forward(const ConvShape& s, int batch, std::span<const double> input, const Matrix& weight,
                    const Matrix& bias, std::span<double> output);
void conv2d_backward(const ConvShape& s, int batch, std::span<const double> input, const Matrix& weight,
                     std::span<const double> d_output, Matrix& d_weight, Matrix& d_bias, std::span<double> d_input);
void avg_pool2_forward(int channels, int height, int width, int batch, std::span<const double> input,
                       std::span<double> output);
Vector column_distances(const Batch& points, const Vector& q);

}  // namespace reference
}  // namespace outfit::kernels
