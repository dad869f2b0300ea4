#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace ellipsedet {

struct AdamSettings {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected adaptive-moment update over a set of parameter blocks.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamSettings settings = {}) : settings_(settings) {}

  /// Registers a block of `n` scalars; returns its slot.
  std::size_t add_block(std::size_t n) {
    first_.emplace_back(n, 0.0);
    second_.emplace_back(n, 0.0);
    return first_.size() - 1;
  }

  /// Advances the shared step counter; call once before updating the blocks.
  void begin_step() { ++step_; }

  void update(std::size_t slot, std::span<T> values, std::span<const T> grads) {
    update(slot, values, grads, settings_.learning_rate);
  }

  void update(std::size_t slot, std::span<T> values, std::span<const T> grads, double lr) {
    auto& m = first_[slot];
    auto& v = second_[slot];
    const double b1 = settings_.beta1;
    const double b2 = settings_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = static_cast<double>(grads[i]);
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      values[i] -= static_cast<T>(lr * m_hat / (std::sqrt(v_hat) + settings_.epsilon));
    }
  }

  [[nodiscard]] long step() const { return step_; }
  [[nodiscard]] const AdamSettings& settings() const { return settings_; }

 private:
  AdamSettings settings_;
  long step_ = 0;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

}  // namespace ellipsedet
