#pragma once

#include <map>
#include <string>
#include <vector>

#include "jsr/netops.hpp"
#include "jsr/rng.hpp"
#include "jsr/tensor.hpp"

namespace jsr::net {

enum class Variant { FlatUnet, UnetPS, JNet };
enum class BlockType { Naive, Baseline };
enum class EncoderDown { StridedConv, MaxPool };

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);
BlockType block_type_from_string(const std::string& s);
std::string to_string(BlockType b);

struct NetworkSpec {
    Variant variant = Variant::JNet;
    BlockType block_type = BlockType::Baseline;
    int64_t width = 64;
    int64_t blocks_per_stage = 2;
    int64_t encoder_levels = 3;
    int64_t scale = 2;
    int64_t in_channels = 3;
    int64_t out_channels = 3;
    EncoderDown encoder_down = EncoderDown::StridedConv;
    bool global_residual = false;

    void validate() const;
    std::string to_json() const;
    static NetworkSpec from_json(const std::string& json_text);

    /// Input dims must be divisible by this.
    int64_t divisibility() const { return int64_t{1} << encoder_levels; }
};

/// Named parameter tensors in a fixed deterministic order.
struct NetworkParams {
    std::vector<std::pair<std::string, Tensor>> named;
    std::map<std::string, size_t> index;

    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    int64_t total_size() const;
};

/// Initializes all parameters (fan-in-scaled Gaussian weights, zero biases,
/// unit layer-norm gains). Identical seed gives identical parameters.
NetworkParams build_network(const NetworkSpec& spec, SeededRng& rng);

/// Closed-form parameter count; matches enumeration of build_network output.
int64_t count_params(const NetworkSpec& spec);

/// Builds the computational graph on `lr_batch` (N,C,H,W). When `train` is
/// true, parameter leaves require grad and the returned graph supports
/// backward(); param_leaves receives the leaves in `params` order.
ops::Var forward_graph(const NetworkParams& params, const NetworkSpec& spec,
                       const Tensor& lr_batch, bool train,
                       std::vector<ops::Var>* param_leaves = nullptr);

/// Convenience inference path (no gradients retained).
Tensor forward(const NetworkParams& params, const NetworkSpec& spec, const Tensor& lr_batch);

/// Standalone baseline block (two residual stages of LN / pointwise conv /
/// depthwise conv / SimpleGate / SCA), exposed for direct testing.
NetworkParams make_baseline_block_params(int64_t width, SeededRng& rng);
ops::Var baseline_block_forward(const NetworkParams& params, const Tensor& x, bool train = false,
                                std::vector<ops::Var>* param_leaves = nullptr);

}  // namespace jsr::net
