#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kgqr/tape.hpp"

namespace kgqr {

enum class Backend { kBox, kBeta };

std::string_view to_string(Backend b);
std::optional<Backend> backend_from_string(std::string_view name);

struct ModelConfig {
  Backend backend = Backend::kBox;
  int dim = 64;          // entity embedding dimension d
  int dim_pos = 108;
  int dim_rol = 108;
  int dim_type = 108;
  double alpha_in = 0.02;   // box inside-distance weight (fixed, not trained)
  double beta_floor = 0.05;
  double beta_cap = 1e9;
  bool use_position = true;
  bool use_role = true;
  bool use_type = true;
  bool use_relation = true;
  bool use_integration = true;
  int context_samples = 120;         // K
  std::uint64_t context_seed = 1;    // keys the frozen endpoint samples
  double init_range = 0.375;         // uniform bound for embedding tables

  int query_width() const { return 2 * dim; }           // both backends: 2d
  int relation_width() const;                           // per-backend relation row width
  int context_entity_width() const;                     // l_v width
};

// Named, ordered, trainable tensor storage. Registration order is the
// contract between checkpoints, tape bindings, and optimizer state.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor t);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const;
  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return order_.size(); }
  Tensor& at(std::size_t i) { return tensors_[order_[i]]; }
  const Tensor& at(std::size_t i) const { return tensors_.at(order_[i]); }

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Tensor> tensors_;
};

// Tape-registered handles for every tensor of a store, in registration order,
// so Tape::parameter_grads() aligns with ParamStore indices.
struct TapeBinding {
  std::unordered_map<std::string, Value> by_name;
  Value at(const std::string& name) const;
};

TapeBinding bind(Tape& tape, const ParamStore& store);

// Binding over already-registered tape values, matched to the store's names
// by position; used by the finite-difference harness.
TapeBinding binding_from_values(const ParamStore& store, const std::vector<Value>& values);

}  // namespace kgqr
