#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uavmon/preprocess.hpp"
#include "uavmon/rng.hpp"

namespace uavmon {

// 1D convolutional autoencoder over a single-channel window:
//   conv(f1, k, stride) -> relu -> dropout -> conv(f2, k, stride) -> relu
//   -> deconv(f2, k, stride) -> relu -> dropout -> deconv(f1, k, stride) -> relu
//   -> deconv(1, k, 1) -> crop to input_length
// All layers use "same" padding, so the lengths for W = 25 run
// 25 -> 13 -> 7 -> 14 -> 28 -> 28 -> 25.
struct Architecture {
  int input_length = 25;
  int filters1 = 32;
  int filters2 = 16;
  int kernel_size = 3;
  int stride = 2;
  double dropout = 0.2;
  // Window values (degrees) are multiplied by this before entering the network;
  // losses are measured in the scaled units (radians by default).
  double input_scale = std::numbers::pi / 180.0;

  void validate() const;
};

enum class LayerKind { conv, deconv };

struct LayerShape {
  std::string name;
  LayerKind kind = LayerKind::conv;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
  int pad_before = 0;
  int in_length = 0;
  int out_length = 0;
  bool relu = true;
  double dropout_after = 0.0;

  std::size_t weight_count() const {
    return static_cast<std::size_t>(in_channels) * out_channels * kernel;
  }
};

// Weights are row-major: conv [out][in][k], deconv [in][out][k].
struct Layer {
  LayerShape shape;
  std::vector<double> weights;
  std::vector<double> bias;
};

std::vector<LayerShape> layer_shapes(const Architecture& arch);

struct ModelMetadata {
  double sample_rate = 5.0;
  double window_length = 5.0;
  double overlap = 2.5;
  std::optional<double> threshold;
  int n_consecutive = 4;
  std::uint64_t seed = 0;
  int epochs_trained = 0;
  std::optional<double> final_loss;
  std::vector<double> loss_history;
};

struct ParameterTensor {
  std::string name;
  std::span<double> values;
};

using Gradients = std::vector<std::vector<double>>;  // same order as parameters()

class AutoencoderModel {
 public:
  // He-uniform weights from the seed; zero biases.
  AutoencoderModel(const Architecture& arch, std::uint64_t seed);
  // All weights and biases zero.
  static AutoencoderModel zeros(const Architecture& arch);

  const Architecture& architecture() const { return arch_; }
  int input_length() const { return arch_.input_length; }
  const std::vector<Layer>& layers() const { return layers_; }
  ModelMetadata& metadata() { return meta_; }
  const ModelMetadata& metadata() const { return meta_; }

  // Inference mode: dropout disabled, deterministic. Input and output in degrees.
  std::vector<double> forward(std::span<const double> window) const;
  // Training mode: dropout masks drawn from rng.
  std::vector<double> forward(std::span<const double> window, Rng& dropout_rng) const;

  // MSE between the scaled window and its reconstruction.
  double reconstruction_loss(std::span<const double> window) const;
  std::vector<double> reconstruction_losses(std::span<const HeadingWindow> windows) const;

  std::vector<ParameterTensor> parameters();
  std::size_t parameter_count() const;

  // Mean MSE over the batch (dropout disabled) and its gradient for every
  // parameter tensor. Used by the gradient check.
  double loss_and_gradients(std::span<const std::vector<double>> batch, Gradients& grads) const;
  // Sign pattern of every ReLU pre-activation for the batch.
  std::vector<std::uint8_t> relu_pattern(std::span<const std::vector<double>> batch) const;

  friend bool operator==(const AutoencoderModel& a, const AutoencoderModel& b);

 private:
  explicit AutoencoderModel(const Architecture& arch);
  void check_length(std::size_t n) const;

  Architecture arch_;
  std::vector<Layer> layers_;
  ModelMetadata meta_;

  friend class Trainer;
  friend AutoencoderModel model_from_json_text(const std::string& text);
};

double mse_loss(std::span<const double> original, std::span<const double> reconstruction);

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 128;
  int max_epochs = 300;
  int patience = 20;
  double min_delta = 1e-5;
  std::uint64_t seed = 0;

  void validate() const;
};

using EpochCallback = std::function<void(int epoch, double loss)>;

// Adam on the MSE reconstruction objective. Bit-reproducible for a given seed:
// shuffle order and dropout masks derive only from (seed, epoch, position).
// Stops when the epoch loss fails to improve by min_delta for `patience` epochs.
AutoencoderModel train(std::span<const HeadingWindow> windows, const TrainConfig& config,
                       const Architecture& arch = {}, const EpochCallback& on_epoch = {});

// Versioned JSON model file; doubles round-trip exactly.
std::string model_to_json_text(const AutoencoderModel& model);
AutoencoderModel model_from_json_text(const std::string& text);
void save_model(const AutoencoderModel& model, const std::filesystem::path& path);
AutoencoderModel load_model(const std::filesystem::path& path);

}  // namespace uavmon
