#pragma once

// Translational embeddings for the knowledge graph: L1 triple scoring, margin
// loss with negative sampling, Adam training with periodic dev-MRR
// checkpointing, and filtered mean reciprocal rank.
//
// Embedding table file format: one JSON header line
// {"dim":..,"node_count":..,"relation_count":..,"nodes":[..],"relations":[..]}
// followed by row-major little-endian 64-bit floats (node rows in header
// order, then relation rows).

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bioee/common.hpp"
#include "bioee/kg.hpp"
#include "bioee/param_store.hpp"

namespace bioee::kg {

struct EmbeddingTable {
  int64_t dim = 0;
  std::map<std::string, std::vector<double>> node_vectors;
  std::map<std::string, std::vector<double>> relation_vectors;

  const std::vector<double>* node(const std::string& id) const {
    auto it = node_vectors.find(id);
    return it == node_vectors.end() ? nullptr : &it->second;
  }
  const std::vector<double>* relation(const std::string& label) const {
    auto it = relation_vectors.find(label);
    return it == relation_vectors.end() ? nullptr : &it->second;
  }

  void save(const std::filesystem::path& path) const {
    nlohmann::json header;
    header["dim"] = dim;
    header["node_count"] = node_vectors.size();
    header["relation_count"] = relation_vectors.size();
    auto nodes = nlohmann::json::array();
    auto relations = nlohmann::json::array();
    std::string blob;
    auto append = [&blob](const std::vector<double>& v) {
      size_t old = blob.size();
      blob.resize(old + v.size() * sizeof(double));
      std::memcpy(blob.data() + old, v.data(), v.size() * sizeof(double));
    };
    for (const auto& [id, vec] : node_vectors) {
      nodes.push_back(id);
      append(vec);
    }
    for (const auto& [label, vec] : relation_vectors) {
      relations.push_back(label);
      append(vec);
    }
    header["nodes"] = nodes;
    header["relations"] = relations;
    write_file(path, header.dump() + "\n" + blob);
  }

  static EmbeddingTable load(const std::filesystem::path& path) {
    const std::string content = read_file(path);
    const size_t newline = content.find('\n');
    if (newline == std::string::npos) fail("MalformedLine", path.string() + ": missing header line");
    nlohmann::json header = nlohmann::json::parse(content.substr(0, newline));
    EmbeddingTable table;
    table.dim = header.at("dim");
    size_t offset = newline + 1;
    auto read_row = [&](const std::string& key) {
      std::vector<double> v(size_t(table.dim));
      if (offset + v.size() * sizeof(double) > content.size()) fail("MalformedLine", path.string() + ": truncated " + key);
      std::memcpy(v.data(), content.data() + offset, v.size() * sizeof(double));
      offset += v.size() * sizeof(double);
      return v;
    };
    for (const auto& id : header.at("nodes")) table.node_vectors[id.get<std::string>()] = read_row("node row");
    for (const auto& label : header.at("relations")) table.relation_vectors[label.get<std::string>()] = read_row("relation row");
    if (size_t(header.at("node_count")) != table.node_vectors.size() ||
        size_t(header.at("relation_count")) != table.relation_vectors.size())
      fail("MalformedLine", path.string() + ": header counts disagree with id lists");
    return table;
  }
};

struct TransEConfig {
  double margin = 3.0;
  double learning_rate = 0.5;
  int batch_size = 128;
  int negative_ratio = 25;
  int epochs = 500;
  int checkpoint_interval = 50;  // epochs between dev-MRR checkpoints
  double dev_fraction = 0.1;
  int64_t dim = 300;

  void validate() const {
    if (margin <= 0) fail("InvalidConfig", "margin must be positive");
    if (negative_ratio < 1) fail("InvalidConfig", "negative_ratio must be at least 1");
    if (dim <= 0 || batch_size <= 0 || epochs < 0 || checkpoint_interval <= 0)
      fail("InvalidConfig", "non-positive TransE dimension/batch/interval");
    if (dev_fraction < 0 || dev_fraction >= 1) fail("InvalidConfig", "dev_fraction must be in [0,1)");
  }
};

// ‖h + r − t‖₁
inline double transe_score(std::span<const double> h, std::span<const double> r, std::span<const double> t) {
  if (h.size() != r.size() || h.size() != t.size())
    fail("DimMismatch", "transe_score dims " + std::to_string(h.size()) + "/" + std::to_string(r.size()) + "/" +
                            std::to_string(t.size()));
  double total = 0.0;
  for (size_t i = 0; i < h.size(); ++i) total += std::abs(h[i] + r[i] - t[i]);
  return total;
}

// Σ_i Σ_j max(0, d_gold[i] − d_neg[i][j] + γ)
inline double transe_loss(const std::vector<double>& gold_distances,
                          const std::vector<std::vector<double>>& negative_distances, double margin) {
  if (gold_distances.size() != negative_distances.size())
    fail("DimMismatch", "each gold must be paired with its negatives");
  double total = 0.0;
  for (size_t i = 0; i < gold_distances.size(); ++i)
    for (double dn : negative_distances[i]) total += std::max(0.0, gold_distances[i] - dn + margin);
  return total;
}

// `ratio` distinct corrupted triples: each differs from the gold in exactly
// the head or the tail, replacement stays in the gold endpoint's layer class,
// and none is present in the graph.
inline std::vector<Triple> sample_negatives(const KnowledgeGraph& kg, const Triple& gold, int ratio, Rng& rng) {
  const std::vector<std::string> head_pool = kg.entities_like(gold.head);
  const std::vector<std::string> tail_pool = kg.entities_like(gold.tail);

  std::set<Triple> chosen;
  auto try_add = [&](Triple t) {
    if (t == gold || kg.has_triple(t)) return;
    chosen.insert(std::move(t));
  };

  const int max_attempts = 64 * ratio + 64;
  for (int attempt = 0; attempt < max_attempts && int(chosen.size()) < ratio; ++attempt) {
    Triple t = gold;
    if (rng.uniform() < 0.5) {
      if (head_pool.size() > 1) t.head = head_pool[rng.below(head_pool.size())];
    } else {
      if (tail_pool.size() > 1) t.tail = tail_pool[rng.below(tail_pool.size())];
    }
    try_add(std::move(t));
  }
  if (int(chosen.size()) < ratio) {
    // deterministic sweep over every candidate before giving up
    for (const std::string& h : head_pool) {
      Triple t = gold;
      t.head = h;
      try_add(std::move(t));
    }
    for (const std::string& tl : tail_pool) {
      Triple t = gold;
      t.tail = tl;
      try_add(std::move(t));
    }
    if (int(chosen.size()) < ratio)
      fail("ExhaustedCandidates", "graph too small for " + std::to_string(ratio) + " distinct negatives");
    // keep a deterministic subset of size `ratio`
    std::vector<Triple> all(chosen.begin(), chosen.end());
    std::vector<Triple> out;
    for (int i = 0; i < ratio; ++i) out.push_back(all[size_t(i)]);
    return out;
  }
  return {chosen.begin(), chosen.end()};
}

// Filtered MRR of the gold tail among layer-compatible candidates; ties are
// broken by ascending entity id.
inline double mrr(const KnowledgeGraph& kg, const EmbeddingTable& table, const std::vector<Triple>& eval_triples) {
  if (eval_triples.empty()) fail("EmptyEvalSet", "no triples to evaluate");
  double total = 0.0;
  for (const Triple& t : eval_triples) {
    const std::vector<double>* h = table.node(t.head);
    const std::vector<double>* r = table.relation(t.relation);
    const std::vector<double>* gold_t = table.node(t.tail);
    if (!h || !r || !gold_t) fail("UnknownEndpoint", "unembedded entity or relation in eval triple " + t.head);
    const double gold_score = transe_score(*h, *r, *gold_t);
    int rank = 1;
    for (const std::string& candidate : kg.entities_like(t.tail)) {
      if (candidate == t.tail) continue;
      Triple filtered = t;
      filtered.tail = candidate;
      if (kg.has_triple(filtered)) continue;  // other gold tails are removed
      const std::vector<double>* cv = table.node(candidate);
      if (!cv) fail("UnknownEndpoint", "unembedded candidate " + candidate);
      const double score = transe_score(*h, *r, *cv);
      if (score < gold_score || (score == gold_score && candidate < t.tail)) ++rank;
    }
    total += 1.0 / double(rank);
  }
  return total / double(eval_triples.size());
}

struct PretrainResult {
  EmbeddingTable table;           // best dev-MRR checkpoint
  std::vector<double> epoch_mean_loss;  // mean margin loss per gold-negative pair
  double best_dev_mrr = 0.0;
  int trained_epochs = 0;
  std::vector<Triple> dev_triples;
};

namespace detail {

inline EmbeddingTable table_from_rows(const KnowledgeGraph& kg, const std::vector<std::string>& node_ids,
                                      const std::vector<std::string>& relation_ids,
                                      const std::vector<double>& node_rows, const std::vector<double>& rel_rows,
                                      int64_t dim) {
  (void)kg;
  EmbeddingTable table;
  table.dim = dim;
  for (size_t i = 0; i < node_ids.size(); ++i)
    table.node_vectors[node_ids[i]] =
        std::vector<double>(node_rows.begin() + int64_t(i) * dim, node_rows.begin() + int64_t(i + 1) * dim);
  for (size_t i = 0; i < relation_ids.size(); ++i)
    table.relation_vectors[relation_ids[i]] =
        std::vector<double>(rel_rows.begin() + int64_t(i) * dim, rel_rows.begin() + int64_t(i + 1) * dim);
  return table;
}

}  // namespace detail

// Margin-loss training with Adam. Every checkpoint_interval epochs the dev
// MRR is evaluated; the snapshot is kept while it improves and training stops
// at the first non-improving checkpoint.
inline PretrainResult pretrain_kge(const KnowledgeGraph& kg, const TransEConfig& config, uint64_t seed) {
  config.validate();
  if (kg.entity_count() < 2 || kg.relations.empty())
    fail("EmptyEvalSet", "knowledge graph needs at least 2 entities and 1 relation");

  std::vector<std::string> node_ids;
  for (const auto& [id, types] : kg.concept_types) node_ids.push_back(id);
  for (const std::string& id : kg.semantic_nodes) node_ids.push_back(id);
  std::sort(node_ids.begin(), node_ids.end());
  std::vector<std::string> relation_ids(kg.relation_labels.begin(), kg.relation_labels.end());

  std::map<std::string, int64_t> node_row, rel_row;
  for (size_t i = 0; i < node_ids.size(); ++i) node_row[node_ids[i]] = int64_t(i);
  for (size_t i = 0; i < relation_ids.size(); ++i) rel_row[relation_ids[i]] = int64_t(i);

  // deterministic hash split; dev falls back to the full set on tiny graphs
  std::vector<Triple> train_triples, dev_triples;
  for (const Triple& t : kg.relations) {
    const uint64_t h = fnv1a64(t.head + "\t" + t.relation + "\t" + t.tail);
    if (unit_double(mix64(h)) < config.dev_fraction)
      dev_triples.push_back(t);
    else
      train_triples.push_back(t);
  }
  if (dev_triples.empty()) dev_triples = kg.relations;
  if (train_triples.empty()) train_triples = kg.relations;

  const int64_t dim = config.dim;
  Rng rng(mix64(seed));
  const double init_bound = 6.0 / std::sqrt(double(dim));
  auto init_rows = [&](size_t count) {
    std::vector<double> rows(count * size_t(dim));
    for (double& v : rows) v = rng.uniform(-init_bound, init_bound);
    return rows;
  };

  ad::ParamStore store;
  ad::Tensor nodes = store.create("nodes", {int64_t(node_ids.size()), dim}, init_rows(node_ids.size()));
  ad::Tensor relations = store.create("relations", {int64_t(relation_ids.size()), dim}, init_rows(relation_ids.size()));

  PretrainResult result;
  result.dev_triples = dev_triples;
  result.table = detail::table_from_rows(kg, node_ids, relation_ids, nodes.values(), relations.values(), dim);
  result.best_dev_mrr = config.epochs == 0 ? 0.0 : -1.0;

  ad::AdamConfig adam;
  adam.lr = config.learning_rate;

  auto row = [&](const std::vector<double>& data, int64_t r) { return std::span<const double>(data.data() + r * dim, size_t(dim)); };

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<size_t> order(train_triples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng epoch_rng = rng.fork(uint64_t(epoch));
    epoch_rng.shuffle(order);

    double epoch_loss = 0.0;
    int64_t epoch_pairs = 0;

    for (size_t batch_start = 0; batch_start < order.size(); batch_start += size_t(config.batch_size)) {
      const size_t batch_end = std::min(order.size(), batch_start + size_t(config.batch_size));
      store.ensure_grads();
      auto& node_grad = nodes.node()->grad;
      auto& rel_grad = relations.node()->grad;
      const auto& node_vals = nodes.values();
      const auto& rel_vals = relations.values();

      for (size_t k = batch_start; k < batch_end; ++k) {
        const Triple& gold = train_triples[order[k]];
        const int64_t gh = node_row.at(gold.head), gr = rel_row.at(gold.relation), gt = node_row.at(gold.tail);
        const double d_gold = transe_score(row(node_vals, gh), row(rel_vals, gr), row(node_vals, gt));
        for (const Triple& neg : sample_negatives(kg, gold, config.negative_ratio, epoch_rng)) {
          const int64_t nh = node_row.at(neg.head), nt = node_row.at(neg.tail);
          const double d_neg = transe_score(row(node_vals, nh), row(rel_vals, gr), row(node_vals, nt));
          const double violation = d_gold - d_neg + config.margin;
          ++epoch_pairs;
          if (violation <= 0.0) continue;
          epoch_loss += violation;
          // subgradients of the two L1 distances
          for (int64_t j = 0; j < dim; ++j) {
            const double sg = node_vals[size_t(gh * dim + j)] + rel_vals[size_t(gr * dim + j)] - node_vals[size_t(gt * dim + j)];
            const double sign_g = sg > 0 ? 1.0 : (sg < 0 ? -1.0 : 0.0);
            node_grad[size_t(gh * dim + j)] += sign_g;
            rel_grad[size_t(gr * dim + j)] += sign_g;
            node_grad[size_t(gt * dim + j)] -= sign_g;
            const double sn = node_vals[size_t(nh * dim + j)] + rel_vals[size_t(gr * dim + j)] - node_vals[size_t(nt * dim + j)];
            const double sign_n = sn > 0 ? 1.0 : (sn < 0 ? -1.0 : 0.0);
            node_grad[size_t(nh * dim + j)] -= sign_n;
            rel_grad[size_t(gr * dim + j)] -= sign_n;
            node_grad[size_t(nt * dim + j)] += sign_n;
          }
        }
      }
      ad::adam_step(store, adam);
    }
    result.epoch_mean_loss.push_back(epoch_pairs > 0 ? epoch_loss / double(epoch_pairs) : 0.0);
    result.trained_epochs = epoch;

    const bool at_checkpoint = epoch % config.checkpoint_interval == 0 || epoch == config.epochs;
    if (at_checkpoint) {
      EmbeddingTable current = detail::table_from_rows(kg, node_ids, relation_ids, nodes.values(), relations.values(), dim);
      const double dev_mrr = mrr(kg, current, dev_triples);
      if (dev_mrr > result.best_dev_mrr) {
        result.best_dev_mrr = dev_mrr;
        result.table = std::move(current);
      } else {
        break;
      }
    }
  }
  if (result.best_dev_mrr < 0.0) result.best_dev_mrr = 0.0;
  return result;
}

}  // namespace bioee::kg
