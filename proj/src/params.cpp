#include "kgqr/params.hpp"

#include <optional>

namespace kgqr {

std::string_view to_string(Backend b) { return b == Backend::kBox ? "box" : "beta"; }

std::optional<Backend> backend_from_string(std::string_view name) {
  if (name == "box") return Backend::kBox;
  if (name == "beta") return Backend::kBeta;
  return std::nullopt;
}

int ModelConfig::relation_width() const {
  return backend == Backend::kBox ? dim : 2 * dim;
}

int ModelConfig::context_entity_width() const {
  return backend == Backend::kBox ? dim : 2 * dim;
}

Tensor& ParamStore::add(const std::string& name, Tensor t) {
  auto [it, inserted] = tensors_.emplace(name, std::move(t));
  if (!inserted) throw ConfigError(name, "duplicate parameter tensor");
  order_.push_back(name);
  return it->second;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ConfigError(name, "unknown parameter tensor");
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ConfigError(name, "unknown parameter tensor");
  return it->second;
}

bool ParamStore::has(const std::string& name) const { return tensors_.contains(name); }

Value TapeBinding::at(const std::string& name) const {
  auto it = by_name.find(name);
  if (it == by_name.end()) throw ConfigError(name, "tensor not bound to tape");
  return it->second;
}

TapeBinding bind(Tape& tape, const ParamStore& store) {
  TapeBinding binding;
  for (const std::string& name : store.names()) {
    binding.by_name.emplace(name, tape.parameter(store.get(name)));
  }
  return binding;
}

TapeBinding binding_from_values(const ParamStore& store, const std::vector<Value>& values) {
  if (values.size() != store.size()) {
    throw ShapeMismatchError("value list does not match the parameter registry");
  }
  TapeBinding binding;
  for (std::size_t i = 0; i < values.size(); ++i) {
    binding.by_name.emplace(store.names()[i], values[i]);
  }
  return binding;
}

}  // namespace kgqr
