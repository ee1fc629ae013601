#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "chestprog/volume.hpp"

namespace chestprog::deepnet {

struct Shape3 {
  int x = 1;
  int y = 1;
  int z = 1;
  int count() const noexcept { return x * y * z; }
  bool operator==(const Shape3&) const = default;
};

enum class Padding { kValid, kSame };
enum class ActivationPlan { kReluAll, kReluFirstOnly };

/// Conv stack -> fully connected layer -> two-node softmax output.
/// Each conv layer is followed by ReLU (per `activation`), a max-pool whose window equals
/// its stride (reduced to 1 on any axis shorter than the window) and dropout.
struct NetworkSpec {
  Shape3 input{32, 32, 8};
  int in_channels = 8;
  std::vector<int> conv_filters{50, 100, 100, 100};
  Shape3 kernel{5, 5, 2};
  Padding padding = Padding::kSame;
  Shape3 pool{2, 2, 2};
  int fc_units = 6000;
  ActivationPlan activation = ActivationPlan::kReluAll;
  double dropout = 0.35;
};

nlohmann::json to_json(const NetworkSpec& s);
NetworkSpec network_spec_from_json(const nlohmann::json& j);

struct ConvLayerShape {
  int in_channels = 0;
  int out_channels = 0;
  Shape3 in;
  Shape3 conv_out;
  Shape3 pool_window;
  Shape3 pooled;
  std::array<int, 3> pad_front{};
};

/// Throws if any layer would reach an empty spatial extent.
std::vector<ConvLayerShape> layer_shapes(const NetworkSpec& spec);
std::uint64_t parameter_count(const NetworkSpec& spec);

/// Channel-major activations: row = channel, column = voxel (x-fastest).
template <typename T>
using Tensor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
struct Sample {
  Tensor<T> input;
  int label = 0;
  std::string id;
};

/// Builds the 8-channel input [HU / 1000, 7 masks] block-averaged from the study lattice
/// down to `input` (each study dim must be an integer multiple of the input dim).
template <typename T>
Sample<T> make_sample(const StudyRecord& study, const Shape3& input);

/// Cached state of one forward pass, consumed by backward().
template <typename T>
struct Workspace {
  struct Conv {
    Tensor<T> col;        // (cin * k) x conv voxels
    Tensor<T> pre;        // cout x conv voxels
    Tensor<T> act;        // after activation
    Tensor<T> pooled;     // after pooling and dropout
    std::vector<int> argmax;
    Tensor<T> drop;       // dropout scale per pooled element (empty = none)
    bool relu = true;
  };
  std::vector<Conv> conv;
  Eigen::Matrix<T, Eigen::Dynamic, 1> flat, fc_pre, fc_act, fc_drop, logits;
  std::array<T, 2> probs{};
  bool fc_relu = true;
};

template <typename T>
class Network {
 public:
  Network() = default;
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const noexcept { return spec_; }
  const std::vector<ConvLayerShape>& shapes() const noexcept { return shapes_; }

  /// He-style uniform init, U(-sqrt(6 / fan_in), sqrt(6 / fan_in)); biases 0.
  void initialize(std::uint64_t seed);

  std::span<T> parameters() noexcept { return params_; }
  std::span<const T> parameters() const noexcept { return params_; }
  std::size_t size() const noexcept { return params_.size(); }

  /// Class probabilities (alive, dead). With `dropout_rng` set, dropout is active.
  std::array<T, 2> forward(const Tensor<T>& input, Workspace<T>& ws, std::mt19937_64* dropout_rng = nullptr) const;

  /// Cross-entropy gradient for the cached forward pass, written (not accumulated) into
  /// `grad`, which must have size() entries. Inside the probability clamp this is the exact
  /// gradient of bce_loss; outside it the unclamped softmax gradient is kept.
  void backward(Workspace<T>& ws, int label, std::span<T> grad) const;

  std::array<T, 2> predict(const Tensor<T>& input) const;

  // Views into the flat parameter vector.
  struct LayerView {
    std::size_t weight_offset = 0;
    int rows = 0;
    int cols = 0;
    std::size_t bias_offset = 0;
  };
  const std::vector<LayerView>& layers() const noexcept { return views_; }

 private:
  NetworkSpec spec_;
  std::vector<ConvLayerShape> shapes_;
  std::vector<LayerView> views_;  // conv layers, then fc, then output
  std::vector<T> params_;
};

inline constexpr double kProbClamp = 1e-7;

/// -y log p - (1 - y) log(1 - p), p = class-1 probability clamped to [1e-7, 1 - 1e-7].
double bce_loss(double p, int label);

struct TrainConfig {
  int epochs = 120;
  int batch_size = 8;
  double lr_initial = 5e-4;
  double lr_final = 1e-5;
  int lr_hold_until = 10;  // lr_initial for epochs 1..hold
  int lr_final_from = 60;  // lr_final from this epoch on; log-linear in between
  double rho = 0.9;
  double epsilon = 1e-6;
  std::optional<double> dropout;  // overrides the spec's rate
  std::uint64_t seed = 0;
  int threads = 1;
  bool stop_when_train_perfect = false;
};

nlohmann::json to_json(const TrainConfig& c);

/// Learning rate for a 1-based epoch.
double learning_rate(const TrainConfig& cfg, int epoch);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;       // mean over the update passes of the epoch
  double eval_loss = 0.0;       // dropout-free loss on the training set after the epoch
  double train_accuracy = 0.0;  // dropout-free, threshold 0.5
};

template <typename T>
struct RmsState {
  std::vector<T> mean_square;
};

/// a <- rho a + (1 - rho) g^2;  theta <- theta - lr g / sqrt(a + eps).
template <typename T>
void rmsprop_step(std::span<T> params, std::span<const T> grad, RmsState<T>& state, double lr, double rho,
                  double eps);

template <typename T>
struct TrainResult {
  Network<T> net;
  RmsState<T> optimizer;
  std::vector<EpochLog> log;
};

/// Mini-batch RMSprop on the mean batch loss. Per-sample gradients are summed in sample
/// order, dropout masks come from RNGs seeded by (seed, epoch, sample), so the result is
/// independent of `threads`. Throws on an empty set or a non-finite loss.
template <typename T>
TrainResult<T> train(const NetworkSpec& spec, const std::vector<Sample<T>>& data, const TrainConfig& cfg);

void write_epoch_log(const std::vector<EpochLog>& log, const std::filesystem::path& csv);

// Binary network file: "CPNET001", u32 scalar bytes, u32 json length, json
// {spec, train_config, epochs_done}, u64 n, n parameters, u64 m, m optimizer values.
// All integers and scalars little-endian.
template <typename T>
void write_network(const std::filesystem::path& path, const Network<T>& net, const RmsState<T>& opt,
                   const nlohmann::json& meta);
template <typename T>
Network<T> read_network(const std::filesystem::path& path, RmsState<T>* opt = nullptr,
                        nlohmann::json* meta = nullptr);

}  // namespace chestprog::deepnet
