#pragma once

// Single JSON document holding every module's settings. Unknown keys are rejected.

#include <set>
#include <string>

#include <json.hpp>

#include "grf/grounding.hpp"
#include "grf/io.hpp"
#include "grf/reasoning_flow.hpp"
#include "grf/training.hpp"

namespace grf {

struct DecodeConfig {
  std::size_t beam = 3;
  std::size_t max_len = 32;
};

struct RunConfig {
  ExtractionConfig extraction;
  FlowConfig flow;
  ModelConfig model;
  TrainConfig train;
  DecodeConfig decode;

  void validate() const {
    extraction.validate();
    flow.validate();
    model.validate();
    train.validate();
    if (decode.beam < 1) throw Error(ErrorCode::Config, "decode: beam must be >= 1");
  }
};

inline nlohmann::json to_json(const RunConfig& c) {
  return {
      {"extraction", {{"hops", c.extraction.hops}, {"top_b", c.extraction.top_b}, {"pos_filter", c.extraction.pos_filter}}},
      {"flow", {{"gamma", c.flow.gamma}, {"aggregator", to_string(c.flow.aggregator)}, {"hops", c.flow.hops}}},
      {"model",
       {{"d_model", c.model.d_model},
        {"heads", c.model.heads},
        {"layers", c.model.layers},
        {"max_len", c.model.max_len},
        {"d_graph", c.model.d_graph},
        {"graph_layers", c.model.graph_layers},
        {"tie_embeddings", c.model.tie_embeddings},
        {"variant", to_string(c.model.variant)}}},
      {"train",
       {{"alpha", c.train.alpha},
        {"beta", c.train.beta},
        {"lr", c.train.lr},
        {"total_steps", c.train.total_steps},
        {"batch_size", c.train.batch_size},
        {"seed", c.train.seed},
        {"adam_beta1", c.train.adam_beta1},
        {"adam_beta2", c.train.adam_beta2},
        {"adam_eps", c.train.adam_eps},
        {"checkpoint_every", c.train.checkpoint_every},
        {"patience", c.train.patience},
        {"gen_reduction", c.train.gen_reduction == GenReduction::Sum ? "sum" : "mean"}}},
      {"decode", {{"beam", c.decode.beam}, {"max_len", c.decode.max_len}}},
  };
}

namespace detail {

class Section {
 public:
  Section(const nlohmann::json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw Error(ErrorCode::Config, "config: '" + name_ + "' must be an object");
  }

  template <class V>
  void get(const char* key, V& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<V>();
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::Config, "config: bad value for '" + name_ + "." + key + "': " + it->dump());
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw Error(ErrorCode::Config, "config: unknown key '" + name_ + "." + it.key() + "'");
  }

 private:
  const nlohmann::json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace detail

/// Overlays the keys present in `j` onto `base`.
inline RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {}) {
  detail::Section top(j, "<root>");
  nlohmann::json empty = nlohmann::json::object();
  auto sub = [&](const char* k) -> const nlohmann::json& {
    auto it = j.find(k);
    return it == j.end() ? empty : *it;
  };
  for (const char* k : {"extraction", "flow", "model", "train", "decode"}) {
    nlohmann::json ignored;
    top.get(k, ignored);
  }
  top.finish();

  {
    detail::Section s(sub("extraction"), "extraction");
    s.get("hops", base.extraction.hops);
    s.get("top_b", base.extraction.top_b);
    s.get("pos_filter", base.extraction.pos_filter);
    s.finish();
  }
  {
    detail::Section s(sub("flow"), "flow");
    std::string agg = to_string(base.flow.aggregator);
    s.get("gamma", base.flow.gamma);
    s.get("aggregator", agg);
    s.get("hops", base.flow.hops);
    s.finish();
    base.flow.aggregator = aggregator_from_string(agg);
  }
  {
    detail::Section s(sub("model"), "model");
    std::string variant = to_string(base.model.variant);
    s.get("d_model", base.model.d_model);
    s.get("heads", base.model.heads);
    s.get("layers", base.model.layers);
    s.get("max_len", base.model.max_len);
    s.get("d_graph", base.model.d_graph);
    s.get("graph_layers", base.model.graph_layers);
    s.get("tie_embeddings", base.model.tie_embeddings);
    s.get("variant", variant);
    s.finish();
    base.model.variant = variant_from_string(variant);
  }
  {
    detail::Section s(sub("train"), "train");
    std::string red = base.train.gen_reduction == GenReduction::Sum ? "sum" : "mean";
    s.get("alpha", base.train.alpha);
    s.get("beta", base.train.beta);
    s.get("lr", base.train.lr);
    s.get("total_steps", base.train.total_steps);
    s.get("batch_size", base.train.batch_size);
    s.get("seed", base.train.seed);
    s.get("adam_beta1", base.train.adam_beta1);
    s.get("adam_beta2", base.train.adam_beta2);
    s.get("adam_eps", base.train.adam_eps);
    s.get("checkpoint_every", base.train.checkpoint_every);
    s.get("patience", base.train.patience);
    s.get("gen_reduction", red);
    s.finish();
    if (red != "sum" && red != "mean") throw Error(ErrorCode::Config, "config: train.gen_reduction must be 'sum' or 'mean'");
    base.train.gen_reduction = red == "sum" ? GenReduction::Sum : GenReduction::MeanPerToken;
  }
  {
    detail::Section s(sub("decode"), "decode");
    s.get("beam", base.decode.beam);
    s.get("max_len", base.decode.max_len);
    s.finish();
  }
  base.validate();
  return base;
}

inline RunConfig load_run_config(const std::string& path) {
  const auto text = io::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Config, "config: " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace grf
