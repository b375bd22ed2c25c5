#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bessgnn/hetero_graph.hpp"
#include "bessgnn/tensor.hpp"

namespace bessgnn {

enum class Arch : std::uint8_t { GCN = 0, SAGE = 1, GAT = 2 };
std::string to_string(Arch a);
Arch arch_from_string(const std::string& s);

struct ModelConfig {
    Arch arch = Arch::GCN;
    std::size_t hidden = 64;
    std::size_t layers = 3;
    std::size_t heads = 4; // GAT only
    std::uint64_t seed = 0;

    /// Throws ParameterError on K < 1, d_h < 4, or GAT width not divisible by heads.
    void check() const;
    bool operator==(const ModelConfig&) const = default;
};

/// Learnable tensors by name plus the normalization they were trained with.
///
/// Names: in.<type>.W/.b, l<k>.rel.<src->dst>.W, l<k>.self.<type>.W/.b,
/// l<k>.agg.<type>.W, l<k>.att.<src->dst> (GAT), head.<head>.W1/.b1/.W2/.b2.
/// At the last layer only node types read by a head are updated, so no
/// parameter is structurally cut off from the loss.
struct ModelState {
    ModelConfig config;
    GraphSchema schema;
    NormStats norm;
    std::vector<std::string> names;
    std::vector<nn::Tensor> params;

    const nn::Tensor& param(const std::string& name) const;
    nn::Tensor& param(const std::string& name);
    bool has(const std::string& name) const;
    std::size_t count_prefix(const std::string& prefix) const;
    std::size_t n_scalars() const;
    /// Rebuilds the name lookup after `names` changes.
    void reindex();

private:
    std::map<std::string, std::size_t> index_;
};

/// Xavier weights, zero biases; each tensor seeded from (seed, creation order).
/// Throws SchemaError for a relation outside the canonical set or a duplicate.
ModelState init_model(const ModelConfig& cfg, const GraphSchema& schema = {});

struct ForwardOutput {
    std::array<nn::Tensor, kHeads> normalized; // head outputs in z-score space
    std::array<nn::Tensor, kHeads> raw;        // de-normalized with the state's NormStats
};

/// `g` must already be normalized with `state.norm`.
ForwardOutput forward(const ModelState& state, const HeteroGraph& g);

/// Pre-head embeddings of every node type after the last layer that updates
/// it; exposed for tests of the message-passing semantics.
std::array<nn::Tensor, kNodeTypes> embeddings(const ModelState& state, const HeteroGraph& g);

/// Attention weights [E x heads] for relation `rel` at layer `layer` (GAT only).
nn::Tensor attention_weights(const ModelState& state, const HeteroGraph& g, std::size_t layer, std::size_t rel);

struct Predictions {
    std::array<Dense, kHeads> y; // raw units
};
Predictions predict(const ModelState& state, const HeteroGraph& normalized_graph);

struct AdamSnapshot {
    std::int64_t steps = 0;
    double lr = 0.0;
    std::vector<std::vector<double>> m, v;
};

struct Checkpoint {
    ModelState model;
    std::optional<AdamSnapshot> adam;
    std::uint64_t epoch = 0;
    double lambda_phys = 0.0;
    double best_val = 0.0;
};

/// Versioned, FNV-1a checksummed binary (see docs/formats.md).
void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
std::string checkpoint_bytes(const Checkpoint& ck);
/// Throws FormatError on corruption or version mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Additionally throws ConfigMismatchError unless the stored config equals `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);
Checkpoint checkpoint_from_bytes(const std::string& bytes, const std::string& what);

} // namespace bessgnn
