#include "ellipsedet/detector/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

namespace ellipsedet::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

struct ConvGeometry {
  int in_c, in_h, in_w, k, stride, pad, out_h, out_w;

  [[nodiscard]] int rows() const { return in_c * k * k; }
  [[nodiscard]] int cols() const { return out_h * out_w; }
  [[nodiscard]] bool identity_columns() const { return k == 1 && stride == 1; }
};

template <typename T>
void im2col(const Tensor<T>& x, const ConvGeometry& g, Buffer<T>& cols) {
  cols.assign(static_cast<std::size_t>(g.rows()) * static_cast<std::size_t>(g.cols()), T(0));
  const std::size_t ncols = static_cast<std::size_t>(g.cols());
  for (int c = 0; c < g.in_c; ++c) {
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        T* row = cols.data() + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * ncols;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          const T* src = x.data.data() + static_cast<std::size_t>(c) * x.plane() +
                         static_cast<std::size_t>(iy) * g.in_w;
          T* dst = row + static_cast<std::size_t>(oy) * g.out_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.in_w) dst[ox] = src[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, Tensor<T>& dx) {
  const std::size_t ncols = static_cast<std::size_t>(g.cols());
  for (int c = 0; c < g.in_c; ++c) {
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const T* row = cols + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * ncols;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          T* dst = dx.data.data() + static_cast<std::size_t>(c) * dx.plane() +
                   static_cast<std::size_t>(iy) * g.in_w;
          const T* src = row + static_cast<std::size_t>(oy) * g.out_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.in_w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// ParameterStore

template <typename T>
int ParameterStore<T>::add(std::string name, std::vector<int> shape) {
  if (find(name) >= 0) throw std::invalid_argument("duplicate parameter name: " + name);
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  params_.push_back({std::move(name), std::move(shape), Buffer<T>(n, T(0)),
                     Buffer<T>(n, T(0))});
  return static_cast<int>(params_.size()) - 1;
}

template <typename T>
std::size_t ParameterStore<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
int ParameterStore<T>::find(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), T(0));
}

template <typename T>
void ParameterStore<T>::scale_grad(T factor) {
  for (auto& p : params_) {
    for (T& g : p.grad) g *= factor;
  }
}

// ---------------------------------------------------------------------------
// Tape

template <typename T>
typename Tape<T>::Node Tape<T>::push(Tensor<T> value, std::function<void(Tape&, Node)> back) {
  nodes_.push_back(Record{std::move(value), {}, {}, std::move(back)});
  return static_cast<Node>(nodes_.size()) - 1;
}

template <typename T>
Tensor<T>& Tape<T>::grad(Node n) {
  Record& r = nodes_[static_cast<std::size_t>(n)];
  if (r.grad.size() != r.value.size()) r.grad = Tensor<T>(r.value.c, r.value.h, r.value.w);
  return r.grad;
}

template <typename T>
typename Tape<T>::Node Tape<T>::input(Tensor<T> value) {
  return push(std::move(value), nullptr);
}

template <typename T>
typename Tape<T>::Node Tape<T>::conv2d(Node x, int weight, int bias, ConvSpec spec) {
  const Tensor<T>& in = value(x);
  const Parameter<T>& wp = (*params_)[weight];
  const int out_c = wp.shape.at(0);
  if (wp.shape.at(1) != in.c || wp.shape.at(2) != spec.kernel) {
    throw std::invalid_argument("conv2d: weight " + wp.name + " does not match its input");
  }
  ConvGeometry g{in.c, in.h, in.w, spec.kernel, spec.stride, spec.kernel / 2, 0, 0};
  g.out_h = (in.h + 2 * g.pad - g.k) / g.stride + 1;
  g.out_w = (in.w + 2 * g.pad - g.k) / g.stride + 1;

  Buffer<T> cols;
  const T* col_ptr = in.data.data();
  if (!g.identity_columns()) {
    im2col(in, g, cols);
    col_ptr = cols.data();
  }
  Tensor<T> out(out_c, g.out_h, g.out_w);
  {
    Eigen::Map<const RowMat<T>> W(wp.value.data(), out_c, g.rows());
    Eigen::Map<const RowMat<T>> C(col_ptr, g.rows(), g.cols());
    Eigen::Map<RowMat<T>> Y(out.data.data(), out_c, g.cols());
    Eigen::Map<const Vec<T>> b((*params_)[bias].value.data(), out_c);
    Y.noalias() = W * C;
    Y.colwise() += b;
  }

  const Node id = push(std::move(out), [x, weight, bias, g, out_c](Tape& t, Node self) {
    Record& rec = t.nodes_[static_cast<std::size_t>(self)];
    Parameter<T>& wp = (*t.params_)[weight];
    Parameter<T>& bp = (*t.params_)[bias];
    const T* col_ptr = g.identity_columns() ? t.nodes_[static_cast<std::size_t>(x)].value.data.data()
                                            : rec.aux.data();
    Eigen::Map<const RowMat<T>> G(rec.grad.data.data(), out_c, g.cols());
    Eigen::Map<const RowMat<T>> C(col_ptr, g.rows(), g.cols());
    Eigen::Map<RowMat<T>> dW(wp.grad.data(), out_c, g.rows());
    Eigen::Map<Vec<T>> db(bp.grad.data(), out_c);
    dW.noalias() += G * C.transpose();
    db += G.rowwise().sum();
    if (!t.nodes_[static_cast<std::size_t>(x)].back) return;  // graph input
    Eigen::Map<const RowMat<T>> W(wp.value.data(), out_c, g.rows());
    Tensor<T>& dx = t.grad(x);
    if (g.identity_columns()) {
      Eigen::Map<RowMat<T>> DX(dx.data.data(), g.rows(), g.cols());
      DX.noalias() += W.transpose() * G;
    } else {
      RowMat<T> dcols = W.transpose() * G;
      col2im_add(dcols.data(), g, dx);
    }
  });
  nodes_[static_cast<std::size_t>(id)].aux = std::move(cols);
  return id;
}

template <typename T>
typename Tape<T>::Node Tape<T>::relu(Node x) {
  Tensor<T> out = value(x);
  for (T& v : out.data) v = v > T(0) ? v : T(0);
  return push(std::move(out), [x](Tape& t, Node self) {
    const Record& rec = t.nodes_[static_cast<std::size_t>(self)];
    Tensor<T>& dx = t.grad(x);
    for (std::size_t i = 0; i < dx.data.size(); ++i) {
      if (rec.value.data[i] > T(0)) dx.data[i] += rec.grad.data[i];
    }
  });
}

template <typename T>
typename Tape<T>::Node Tape<T>::sigmoid(Node x) {
  Tensor<T> out = value(x);
  for (T& v : out.data) v = T(1) / (T(1) + std::exp(-v));
  return push(std::move(out), [x](Tape& t, Node self) {
    const Record& rec = t.nodes_[static_cast<std::size_t>(self)];
    Tensor<T>& dx = t.grad(x);
    for (std::size_t i = 0; i < dx.data.size(); ++i) {
      const T y = rec.value.data[i];
      dx.data[i] += rec.grad.data[i] * y * (T(1) - y);
    }
  });
}

template <typename T>
typename Tape<T>::Node Tape<T>::add(Node a, Node b) {
  const Tensor<T>& va = value(a);
  const Tensor<T>& vb = value(b);
  if (va.c != vb.c || va.h != vb.h || va.w != vb.w) {
    throw std::invalid_argument("add: shape mismatch");
  }
  Tensor<T> out = va;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += vb.data[i];
  return push(std::move(out), [a, b](Tape& t, Node self) {
    for (Node in : {a, b}) {
      if (!t.nodes_[static_cast<std::size_t>(in)].back) continue;
      Tensor<T>& d = t.grad(in);
      const Tensor<T>& g = t.nodes_[static_cast<std::size_t>(self)].grad;
      for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] += g.data[i];
    }
  });
}

template <typename T>
typename Tape<T>::Node Tape<T>::scale(Node x, T factor) {
  Tensor<T> out = value(x);
  for (T& v : out.data) v *= factor;
  return push(std::move(out), [x, factor](Tape& t, Node self) {
    Tensor<T>& dx = t.grad(x);
    const Tensor<T>& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += g.data[i] * factor;
  });
}

template <typename T>
typename Tape<T>::Node Tape<T>::upsample2x(Node x, int height, int width) {
  const Tensor<T>& in = value(x);
  if ((height - 1) / 2 >= in.h || (width - 1) / 2 >= in.w) {
    throw std::invalid_argument("upsample2x: target larger than twice the input");
  }
  Tensor<T> out(in.c, height, width);
  for (int c = 0; c < in.c; ++c) {
    for (int y = 0; y < height; ++y) {
      for (int xx = 0; xx < width; ++xx) out.at(c, y, xx) = in.at(c, y / 2, xx / 2);
    }
  }
  return push(std::move(out), [x](Tape& t, Node self) {
    Tensor<T>& dx = t.grad(x);
    const Tensor<T>& g = t.nodes_[static_cast<std::size_t>(self)].grad;
    for (int c = 0; c < g.c; ++c) {
      for (int y = 0; y < g.h; ++y) {
        for (int xx = 0; xx < g.w; ++xx) dx.at(c, y / 2, xx / 2) += g.at(c, y, xx);
      }
    }
  });
}

template <typename T>
void Tape<T>::backward() {
  if (nodes_.empty()) throw std::logic_error("backward called before any forward pass");
  for (Node n = static_cast<Node>(nodes_.size()) - 1; n >= 0; --n) {
    Record& rec = nodes_[static_cast<std::size_t>(n)];
    if (!rec.back || rec.grad.size() == 0) continue;
    rec.back(*this, n);
  }
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace ellipsedet::nn
