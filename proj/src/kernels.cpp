#include "outfit/kernels.hpp"

#include <omp.h>

#include <cmath>
#include <vector>

#include "outfit/error.hpp"

namespace outfit::kernels {
namespace {

using RowMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstRowMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void check_conv(const ConvShape& s, int batch, std::size_t in, const Matrix& weight, std::size_t out) {
  if (weight.rows() != s.out_channels || weight.cols() != s.patch()) {
    throw Error(ErrorKind::kShape, "conv weight shape does not match the layer shape");
  }
  if (in != s.in_size() * batch || out != s.out_size() * batch) {
    throw Error(ErrorKind::kShape, "conv tensor size does not match the layer shape");
  }
}

// cols: patch x (oh*ow), row-major.
void im2col(const ConvShape& s, const double* img, double* cols) {
  const int oh = s.out_height();
  const int ow = s.out_width();
  const int k = s.kernel;
  for (int c = 0; c < s.in_channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols + static_cast<std::size_t>((c * k + ky) * k + kx) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * s.stride - s.pad + ky;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * s.stride - s.pad + kx;
            row[oy * ow + ox] = (iy >= 0 && iy < s.height && ix >= 0 && ix < s.width)
                                    ? img[(static_cast<std::size_t>(c) * s.height + iy) * s.width + ix]
                                    : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const ConvShape& s, const double* cols, double* img) {
  const int oh = s.out_height();
  const int ow = s.out_width();
  const int k = s.kernel;
  std::fill(img, img + s.in_size(), 0.0);
  for (int c = 0; c < s.in_channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = cols + static_cast<std::size_t>((c * k + ky) * k + kx) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * s.stride - s.pad + ky;
          if (iy < 0 || iy >= s.height) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * s.stride - s.pad + kx;
            if (ix < 0 || ix >= s.width) continue;
            img[(static_cast<std::size_t>(c) * s.height + iy) * s.width + ix] += row[oy * ow + ox];
          }
        }
      }
    }
  }
}

}  // namespace

void conv2d_forward(const ConvShape& s, int batch, std::span<const double> input, const Matrix& weight,
                    const Matrix& bias, std::span<double> output) {
  check_conv(s, batch, input.size(), weight, output.size());
  const int hw = s.out_height() * s.out_width();
#pragma omp parallel
  {
    std::vector<double> cols(static_cast<std::size_t>(s.patch()) * hw);
#pragma omp for schedule(static)
    for (int n = 0; n < batch; ++n) {
      im2col(s, input.data() + s.in_size() * n, cols.data());
      ConstRowMap c(cols.data(), s.patch(), hw);
      RowMap out(output.data() + s.out_size() * n, s.out_channels, hw);
      out.noalias() = weight * c;
      out.colwise() += bias.col(0);
    }
  }
}

void conv2d_backward(const ConvShape& s, int batch, std::span<const double> input, const Matrix& weight,
                     std::span<const double> d_output, Matrix& d_weight, Matrix& d_bias, std::span<double> d_input) {
  check_conv(s, batch, input.size(), weight, d_output.size());
  if (!d_input.empty() && d_input.size() != input.size()) throw Error(ErrorKind::kShape, "conv d_input size mismatch");
  const int hw = s.out_height() * s.out_width();
  std::vector<Matrix> dw(static_cast<std::size_t>(batch));
  std::vector<Vector> db(static_cast<std::size_t>(batch));
#pragma omp parallel
  {
    std::vector<double> cols(static_cast<std::size_t>(s.patch()) * hw);
    std::vector<double> dcols(static_cast<std::size_t>(s.patch()) * hw);
#pragma omp for schedule(static)
    for (int n = 0; n < batch; ++n) {
      im2col(s, input.data() + s.in_size() * n, cols.data());
      ConstRowMap c(cols.data(), s.patch(), hw);
      ConstRowMap dout(d_output.data() + s.out_size() * n, s.out_channels, hw);
      dw[n].noalias() = dout * c.transpose();
      db[n] = dout.rowwise().sum();
      if (!d_input.empty()) {
        RowMap dc(dcols.data(), s.patch(), hw);
        dc.noalias() = weight.transpose() * dout;
        col2im(s, dcols.data(), d_input.data() + s.in_size() * n);
      }
    }
  }
  for (int n = 0; n < batch; ++n) {
    d_weight += dw[n];
    d_bias.col(0) += db[n];
  }
}

void avg_pool2_forward(int channels, int height, int width, int batch, std::span<const double> input,
                       std::span<double> output) {
  if (height % 2 != 0 || width % 2 != 0) throw Error(ErrorKind::kShape, "avg_pool2 needs even spatial dims");
  const int oh = height / 2;
  const int ow = width / 2;
  const int planes = channels * batch;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const double* in = input.data() + static_cast<std::size_t>(p) * height * width;
    double* out = output.data() + static_cast<std::size_t>(p) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        const double* a = in + (2 * y) * width + 2 * x;
        out[y * ow + x] = 0.25 * (a[0] + a[1] + a[width] + a[width + 1]);
      }
    }
  }
}

void avg_pool2_backward(int channels, int height, int width, int batch, std::span<const double> d_output,
                        std::span<double> d_input) {
  const int oh = height / 2;
  const int ow = width / 2;
  const int planes = channels * batch;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const double* dout = d_output.data() + static_cast<std::size_t>(p) * oh * ow;
    double* din = d_input.data() + static_cast<std::size_t>(p) * height * width;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        const double g = 0.25 * dout[y * ow + x];
        double* a = din + (2 * y) * width + 2 * x;
        a[0] = g;
        a[1] = g;
        a[width] = g;
        a[width + 1] = g;
      }
    }
  }
}

Batch global_avg_pool_forward(int channels, int height, int width, int batch, std::span<const double> input) {
  Batch out(channels, batch);
  const std::size_t hw = static_cast<std::size_t>(height) * width;
#pragma omp parallel for schedule(static)
  for (int n = 0; n < batch; ++n) {
    for (int c = 0; c < channels; ++c) {
      const double* plane = input.data() + (static_cast<std::size_t>(n) * channels + c) * hw;
      double sum = 0.0;
      for (std::size_t i = 0; i < hw; ++i) sum += plane[i];
      out(c, n) = sum / static_cast<double>(hw);
    }
  }
  return out;
}

void global_avg_pool_backward(int channels, int height, int width, const Batch& d_output, std::span<double> d_input) {
  const std::size_t hw = static_cast<std::size_t>(height) * width;
  const int batch = static_cast<int>(d_output.cols());
#pragma omp parallel for schedule(static)
  for (int n = 0; n < batch; ++n) {
    for (int c = 0; c < channels; ++c) {
      double* plane = d_input.data() + (static_cast<std::size_t>(n) * channels + c) * hw;
      const double g = d_output(c, n) / static_cast<double>(hw);
      std::fill(plane, plane + hw, g);
    }
  }
}

Vector column_distances(const Batch& points, const Vector& q) {
  if (points.rows() != q.size()) throw Error(ErrorKind::kShape, "distance: dimension mismatch");
  const Eigen::Index n = points.cols();
  Vector out(n);
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < n; ++j) out[j] = (points.col(j) - q).norm();
  return out;
}

namespace reference {

void conv2d_forward(const ConvShape& s, int batch, std::span<const double> input, const Matrix& weight,
                    const Matrix& bias, std::span<double> output) {
  check_conv(s, batch, input.size(), weight, output.size());
  const int oh = s.out_height();
  const int ow = s.out_width();
  const int k = s.kernel;
  for (int n = 0; n < batch; ++n) {
    const double* img = input.data() + s.in_size() * n;
    double* out = output.data() + s.out_size() * n;
    for (int o = 0; o < s.out_channels; ++o) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          double acc = bias(o, 0);
          for (int c = 0; c < s.in_channels; ++c) {
            for (int ky = 0; ky < k; ++ky) {
              const int iy = oy * s.stride - s.pad + ky;
              if (iy < 0 || iy >= s.height) continue;
              for (int kx = 0; kx < k; ++kx) {
                const int ix = ox * s.stride - s.pad + kx;
                if (ix < 0 || ix >= s.width) continue;
                acc += weight(o, (c * k + ky) * k + kx) * img[(static_cast<std::size_t>(c) * s.height + iy) * s.width + ix];
              }
            }
          }
          out[(static_cast<std::size_t>(o) * oh + oy) * ow + ox] = acc;
        }
      }
    }
  }
}

void conv2d_backward(const ConvShape& s, int batch, std::span<const double> input, const Matrix& weight,
                     std::span<const double> d_output, Matrix& d_weight, Matrix& d_bias, std::span<double> d_input) {
  check_conv(s, batch, input.size(), weight, d_output.size());
  const int oh = s.out_height();
  const int ow = s.out_width();
  const int k = s.kernel;
  if (!d_input.empty()) std::fill(d_input.begin(), d_input.end(), 0.0);
  for (int n = 0; n < batch; ++n) {
    const double* img = input.data() + s.in_size() * n;
    const double* dout = d_output.data() + s.out_size() * n;
    double* din = d_input.empty() ? nullptr : d_input.data() + s.in_size() * n;
    for (int o = 0; o < s.out_channels; ++o) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          const double g = dout[(static_cast<std::size_t>(o) * oh + oy) * ow + ox];
          d_bias(o, 0) += g;
          for (int c = 0; c < s.in_channels; ++c) {
            for (int ky = 0; ky < k; ++ky) {
              const int iy = oy * s.stride - s.pad + ky;
              if (iy < 0 || iy >= s.height) continue;
              for (int kx = 0; kx < k; ++kx) {
                const int ix = ox * s.stride - s.pad + kx;
                if (ix < 0 || ix >= s.width) continue;
                const std::size_t at = (static_cast<std::size_t>(c) * s.height + iy) * s.width + ix;
                d_weight(o, (c * k + ky) * k + kx) += g * img[at];
                if (din) din[at] += g * weight(o, (c * k + ky) * k + kx);
              }
            }
          }
        }
      }
    }
  }
}

void avg_pool2_forward(int channels, int height, int width, int batch, std::span<const double> input,
                       std::span<double> output) {
  const int oh = height / 2;
  const int ow = width / 2;
  for (int p = 0; p < channels * batch; ++p) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double sum = 0.0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            sum += input[(static_cast<std::size_t>(p) * height + 2 * y + dy) * width + 2 * x + dx];
          }
        }
        output[(static_cast<std::size_t>(p) * oh + y) * ow + x] = sum / 4.0;
      }
    }
  }
}

Vector column_distances(const Batch& points, const Vector& q) {
  Vector out(points.cols());
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      const double d = points(i, j) - q[i];
      sum += d * d;
    }
    out[j] = std::sqrt(sum);
  }
  return out;
}

}  // namespace reference
}  // namespace outfit::kernels
