#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nfcast/autodiff.hpp"
#include "nfcast/rng.hpp"

namespace nfcast::nn {

enum class Init { XavierUniform, Zeros, Ones, Normal002 };

/// Named, ordered parameter registry. Each name may be registered once.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    ad::Tensor tensor;
  };

  ad::Tensor add(const std::string& name, ad::Shape shape, Init init, Rng& rng);
  const ad::Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::span<const Entry> entries() const noexcept { return entries_; }
  std::size_t parameter_count() const noexcept;
  void zero_grad();

  /// Deep copy of all parameter values, in registration order.
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

 private:
  std::vector<Entry> entries_;
};

struct Linear {
  ad::Tensor weight;  // in x out
  ad::Tensor bias;    // out

  ad::Tensor operator()(const ad::Tensor& x) const { return ad::add(ad::matmul(x, weight), bias); }
};

Linear make_linear(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moments are kept per parameter in registration order.
class Adam {
 public:
  Adam(const ParameterStore& store, AdamConfig cfg);

  /// Applies one update from the gradients currently held by the parameters.
  void step();

  std::int64_t steps() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return cfg_; }
  void set_learning_rate(double lr) noexcept { cfg_.learning_rate = lr; }
  std::span<const std::vector<double>> first_moments() const noexcept { return m_; }
  std::span<const std::vector<double>> second_moments() const noexcept { return v_; }

 private:
  const ParameterStore& store_;
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const ParameterStore& store);
/// Validates the hash, every name and every shape before writing any value.
void decode_checkpoint(std::span<const std::uint8_t> bytes, ParameterStore& store);
void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store);
void load_checkpoint(const std::filesystem::path& path, ParameterStore& store);

}  // namespace nfcast::nn
