#pragma once

#include <cstddef>
#include <functional>
#include <new>
#include <string>
#include <vector>

namespace ellipsedet::nn {

// Vectorised kernels peel leading elements up to an alignment boundary, so the
// floating-point summation order follows the buffer address. A fixed alignment
// keeps training bit-reproducible whatever the heap layout.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

template <typename T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

/// Channel-major 3-D activation (one image, no batch axis).
template <typename T>
struct Tensor {
  int c = 0;
  int h = 0;
  int w = 0;
  Buffer<T> data;

  Tensor() = default;
  Tensor(int channels, int height, int width, T fill = T(0))
      : c(channels), h(height), w(width),
        data(static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) *
                 static_cast<std::size_t>(width),
             fill) {}

  [[nodiscard]] std::size_t size() const { return data.size(); }
  [[nodiscard]] std::size_t plane() const {
    return static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }
  T& at(int ch, int y, int x) {
    return data[static_cast<std::size_t>(ch) * plane() + static_cast<std::size_t>(y) * w + x];
  }
  [[nodiscard]] T at(int ch, int y, int x) const {
    return data[static_cast<std::size_t>(ch) * plane() + static_cast<std::size_t>(y) * w + x];
  }
};

/// Named trainable tensor with its accumulated gradient.
template <typename T>
struct Parameter {
  std::string name;
  std::vector<int> shape;
  Buffer<T> value;
  Buffer<T> grad;
};

template <typename T>
class ParameterStore {
 public:
  int add(std::string name, std::vector<int> shape);

  Parameter<T>& operator[](int id) { return params_[static_cast<std::size_t>(id)]; }
  const Parameter<T>& operator[](int id) const { return params_[static_cast<std::size_t>(id)]; }

  [[nodiscard]] int size() const { return static_cast<int>(params_.size()); }
  [[nodiscard]] std::size_t scalar_count() const;

  /// Index of the parameter called `name`, or -1.
  [[nodiscard]] int find(const std::string& name) const;

  void zero_grad();
  void scale_grad(T factor);

  std::vector<Parameter<T>>& all() { return params_; }
  [[nodiscard]] const std::vector<Parameter<T>>& all() const { return params_; }

 private:
  std::vector<Parameter<T>> params_;
};

struct ConvSpec {
  int kernel = 3;
  int stride = 1;
};

/// Reverse-mode tape over per-image activations.
///
/// Each op stores its output and a closure that propagates the output
/// gradient to its inputs and to parameter gradients. backward() replays the
/// closures in reverse; gradients into parameters accumulate across calls
/// until the store is zeroed.
template <typename T>
class Tape {
 public:
  using Node = int;

  explicit Tape(ParameterStore<T>& params) : params_(&params) {}

  Node input(Tensor<T> value);
  /// Zero-padded (kernel / 2) convolution; weight shape [out, in, k, k].
  Node conv2d(Node x, int weight, int bias, ConvSpec spec);
  Node relu(Node x);
  Node sigmoid(Node x);
  Node add(Node a, Node b);
  Node scale(Node x, T factor);
  /// Nearest-neighbour upsampling to (height, width); output (y, x) reads (y / 2, x / 2).
  Node upsample2x(Node x, int height, int width);

  [[nodiscard]] const Tensor<T>& value(Node n) const { return nodes_[n].value; }
  /// Gradient buffer of a node, allocated with zeros on first use.
  Tensor<T>& grad(Node n);

  /// Throws std::logic_error when nothing has been recorded.
  void backward();
  void clear() { nodes_.clear(); }
  [[nodiscard]] bool empty() const { return nodes_.empty(); }

 private:
  struct Record {
    Tensor<T> value;
    Tensor<T> grad;
    Buffer<T> aux;  // im2col columns, masks, ...
    std::function<void(Tape&, Node)> back;
  };

  Node push(Tensor<T> value, std::function<void(Tape&, Node)> back);

  ParameterStore<T>* params_;
  std::vector<Record> nodes_;
};

}  // namespace ellipsedet::nn
