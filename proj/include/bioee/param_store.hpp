#pragma once

// Named trainable parameters plus Adam state. Serialization is a JSON
// manifest next to a flat little-endian array of 64-bit values, so reloads
// are bitwise exact.

#include <bit>
#include <cstring>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "bioee/autodiff.hpp"
#include "bioee/common.hpp"

static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

namespace bioee::ad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t warmup_steps = 0;  // linear ramp of lr over the first N steps
};

class ParamStore {
 public:
  Tensor create(const std::string& name, Shape shape, std::vector<double> init) {
    if (params_.count(name)) fail("DuplicateParam", name);
    Tensor t = Tensor::param(std::move(shape), std::move(init));
    params_.emplace(name, t);
    opt_[name] = Moments{std::vector<double>(size_t(t.size()), 0.0), std::vector<double>(size_t(t.size()), 0.0)};
    return t;
  }

  Tensor get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) fail("MissingParam", name);
    return it->second;
  }

  bool contains(const std::string& name) const { return params_.count(name) > 0; }
  const std::map<std::string, Tensor>& params() const { return params_; }
  int64_t step() const { return step_; }

  void ensure_grads() {
    for (auto& [name, t] : params_) t.node()->ensure_grad();
  }

  void zero_grads() {
    for (auto& [name, t] : params_) t.clear_grad();
  }

  // Deep copy: fresh nodes with copied values and optimizer state.
  ParamStore clone() const {
    ParamStore out;
    for (const auto& [name, t] : params_) {
      Tensor copy = Tensor::param(t.shape(), t.values());
      out.params_.emplace(name, copy);
    }
    out.opt_ = opt_;
    out.step_ = step_;
    return out;
  }

  void save(const std::filesystem::path& manifest_path, const std::filesystem::path& bin_path) const {
    nlohmann::json manifest;
    manifest["step"] = step_;
    nlohmann::json entries = nlohmann::json::array();
    std::string blob;
    for (const auto& [name, t] : params_) {
      entries.push_back({{"name", name}, {"shape", t.shape()}});
      const auto& v = t.values();
      size_t old = blob.size();
      blob.resize(old + v.size() * sizeof(double));
      std::memcpy(blob.data() + old, v.data(), v.size() * sizeof(double));
    }
    manifest["params"] = entries;
    write_file(manifest_path, manifest.dump(2) + "\n");
    write_file(bin_path, blob);
  }

  static ParamStore load(const std::filesystem::path& manifest_path, const std::filesystem::path& bin_path) {
    ParamStore out;
    nlohmann::json manifest = nlohmann::json::parse(read_file(manifest_path));
    out.step_ = manifest.value("step", int64_t(0));
    const std::string blob = read_file(bin_path);
    size_t offset = 0;
    for (const auto& entry : manifest.at("params")) {
      const std::string name = entry.at("name");
      Shape shape = entry.at("shape").get<Shape>();
      const size_t count = size_t(numel(shape));
      if (offset + count * sizeof(double) > blob.size()) fail("CorruptParams", bin_path.string());
      std::vector<double> values(count);
      std::memcpy(values.data(), blob.data() + offset, count * sizeof(double));
      offset += count * sizeof(double);
      out.create(name, std::move(shape), std::move(values));
    }
    if (offset != blob.size()) fail("CorruptParams", bin_path.string() + ": trailing bytes");
    return out;
  }

  friend void adam_step(ParamStore& store, const AdamConfig& cfg);

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  std::map<std::string, Tensor> params_;
  std::map<std::string, Moments> opt_;
  int64_t step_ = 0;
};

// Standard Adam with bias correction; zeroes grads afterwards.
inline void adam_step(ParamStore& store, const AdamConfig& cfg) {
  store.step_ += 1;
  const double t = double(store.step_);
  double lr = cfg.lr;
  if (cfg.warmup_steps > 0 && store.step_ <= cfg.warmup_steps) lr = cfg.lr * t / double(cfg.warmup_steps);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, tensor] : store.params_) {
    Node& node = *tensor.node();
    if (node.grad.size() != node.values.size()) fail("MissingGrad", name);
    auto& mom = store.opt_[name];
    for (size_t i = 0; i < node.values.size(); ++i) {
      const double g = node.grad[i];
      mom.m[i] = cfg.beta1 * mom.m[i] + (1.0 - cfg.beta1) * g;
      mom.v[i] = cfg.beta2 * mom.v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = mom.m[i] / bc1;
      const double vhat = mom.v[i] / bc2;
      node.values[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
      node.grad[i] = 0.0;
    }
  }
}

}  // namespace bioee::ad
