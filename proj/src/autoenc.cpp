#include "uavmon/autoenc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <nlohmann/json.hpp>
#include <sstream>

#include "uavmon/errors.hpp"

namespace uavmon {

namespace {

constexpr int kMaxLanes = 16;
constexpr const char* kMagic = "uavmon-autoencoder";
constexpr int kFormatVersion = 1;

int conv_same_length(int in, int stride) { return (in + stride - 1) / stride; }

int conv_same_pad_before(int in, int out, int kernel, int stride) {
  return std::max((out - 1) * stride + kernel - in, 0) / 2;
}

// Transposed "same" convolution produces in * stride samples; the padding is
// that of the forward convolution mapping the output back to the input.
int deconv_same_pad_before(int kernel, int stride) { return std::max(kernel - stride, 0) / 2; }

}  // namespace

void Architecture::validate() const {
  if (input_length < 4) throw ValidationError("input_length must be >= 4");
  if (filters1 < 1 || filters2 < 1 || kernel_size < 1 || stride < 1) {
    throw ValidationError("architecture sizes must be positive");
  }
  if (!(dropout >= 0.0) || !(dropout < 1.0)) throw ValidationError("dropout must be in [0, 1)");
  if (!(input_scale > 0.0)) throw ValidationError("input_scale must be positive");
}

std::vector<LayerShape> layer_shapes(const Architecture& arch) {
  arch.validate();
  std::vector<LayerShape> shapes;
  const int k = arch.kernel_size, s = arch.stride;

  auto conv = [&](std::string name, int in_ch, int out_ch, int in_len, double dropout) {
    LayerShape l;
    l.name = std::move(name);
    l.kind = LayerKind::conv;
    l.in_channels = in_ch;
    l.out_channels = out_ch;
    l.kernel = k;
    l.stride = s;
    l.in_length = in_len;
    l.out_length = conv_same_length(in_len, s);
    l.pad_before = conv_same_pad_before(in_len, l.out_length, k, s);
    l.dropout_after = dropout;
    shapes.push_back(l);
    return l.out_length;
  };
  auto deconv = [&](std::string name, int in_ch, int out_ch, int in_len, int stride, bool relu, double dropout) {
    LayerShape l;
    l.name = std::move(name);
    l.kind = LayerKind::deconv;
    l.in_channels = in_ch;
    l.out_channels = out_ch;
    l.kernel = k;
    l.stride = stride;
    l.in_length = in_len;
    l.out_length = in_len * stride;
    l.pad_before = deconv_same_pad_before(k, stride);
    l.relu = relu;
    l.dropout_after = dropout;
    shapes.push_back(l);
    return l.out_length;
  };

  int len = arch.input_length;
  len = conv("encoder_conv1", 1, arch.filters1, len, arch.dropout);
  len = conv("encoder_conv2", arch.filters1, arch.filters2, len, 0.0);
  len = deconv("decoder_deconv1", arch.filters2, arch.filters2, len, s, true, arch.dropout);
  len = deconv("decoder_deconv2", arch.filters2, arch.filters1, len, s, true, 0.0);
  deconv("decoder_output", arch.filters1, 1, len, 1, false, 0.0);
  return shapes;
}

namespace {

// Decides whether element `element` of the dropout layer after layer `layer`
// is kept for batch lane `lane`.
using MaskFn = std::function<bool(int lane, int layer, int element)>;

// Forward/backward over up to kMaxLanes samples at once. Activations are laid
// out [channel][position][lane] so the innermost loops run over lanes.
class Engine {
 public:
  Engine(const std::vector<Layer>& layers, const Architecture& arch) : layers_(layers), arch_(arch) {
    const std::size_t n = layers_.size();
    acts_.resize(n + 1);
    pre_.resize(n);
    masks_.resize(n);
    grad_lanes_.resize(n);
    bias_lanes_.resize(n);
    acts_[0].resize(static_cast<std::size_t>(arch.input_length) * kMaxLanes);
    for (std::size_t l = 0; l < n; ++l) {
      const auto& sh = layers_[l].shape;
      const std::size_t out = static_cast<std::size_t>(sh.out_channels) * sh.out_length * kMaxLanes;
      acts_[l + 1].resize(out);
      pre_[l].resize(out);
      if (sh.dropout_after > 0.0) masks_[l].resize(out);
    }
    gbuf_.resize(acts_.size());
    for (std::size_t l = 0; l < acts_.size(); ++l) gbuf_[l].resize(acts_[l].size());
  }

  // Loads `lanes` windows (degrees) and runs the network. mask == nullptr
  // means inference mode.
  void forward(std::span<const std::span<const double>> inputs, const MaskFn* mask) {
    lanes_ = static_cast<int>(inputs.size());
    const int w = arch_.input_length;
    const int L = lanes_;
    for (int b = 0; b < L; ++b) {
      for (int i = 0; i < w; ++i) acts_[0][static_cast<std::size_t>(i) * L + b] = inputs[b][i] * arch_.input_scale;
    }
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& layer = layers_[l];
      const auto& sh = layer.shape;
      double* z = pre_[l].data();
      layer_forward(layer, acts_[l].data(), z);
      double* a = acts_[l + 1].data();
      const std::size_t count = static_cast<std::size_t>(sh.out_channels) * sh.out_length * L;
      if (sh.relu) {
        for (std::size_t i = 0; i < count; ++i) a[i] = z[i] > 0.0 ? z[i] : 0.0;
      } else {
        std::copy(z, z + count, a);
      }
      if (sh.dropout_after > 0.0 && mask) {
        const double keep_scale = 1.0 / (1.0 - sh.dropout_after);
        double* m = masks_[l].data();
        const int elems = sh.out_channels * sh.out_length;
        for (int e = 0; e < elems; ++e) {
          for (int b = 0; b < L; ++b) {
            const std::size_t idx = static_cast<std::size_t>(e) * L + b;
            m[idx] = (*mask)(b, static_cast<int>(l), e) ? keep_scale : 0.0;
            a[idx] *= m[idx];
          }
        }
      }
      dropout_active_ = mask != nullptr;
    }
  }

  // Reconstruction of lane b in scaled units (first input_length samples).
  double output(int b, int i) const { return acts_.back()[static_cast<std::size_t>(i) * lanes_ + b]; }

  double lane_loss(int b, std::span<const double> window) const {
    double sum = 0.0;
    for (int i = 0; i < arch_.input_length; ++i) {
      const double d = output(b, i) - window[i] * arch_.input_scale;
      sum += d * d;
    }
    return sum / arch_.input_length;
  }

  bool relu_active(std::size_t layer, std::size_t idx) const { return pre_[layer][idx] > 0.0; }
  std::size_t pre_count(std::size_t layer) const {
    const auto& sh = layers_[layer].shape;
    return static_cast<std::size_t>(sh.out_channels) * sh.out_length * lanes_;
  }

  void zero_grad_lanes() {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      grad_lanes_[l].assign(layers_[l].weights.size() * kMaxLanes, 0.0);
      bias_lanes_[l].assign(layers_[l].bias.size() * kMaxLanes, 0.0);
    }
    accum_lanes_ = 0;
  }

  // Backpropagates d(loss)/d(output) where loss for lane b is
  // weight * mse(lane b). Accumulates per-lane parameter gradients.
  void backward(std::span<const std::span<const double>> inputs, double weight) {
    const int L = lanes_;
    accum_lanes_ = std::max(accum_lanes_, L);
    auto& gout = gbuf_.back();
    const auto& last = layers_.back().shape;
    std::fill(gout.begin(), gout.begin() + static_cast<std::ptrdiff_t>(last.out_length * L), 0.0);
    const double coeff = 2.0 * weight / arch_.input_length;
    for (int b = 0; b < L; ++b) {
      for (int i = 0; i < arch_.input_length; ++i) {
        const std::size_t idx = static_cast<std::size_t>(i) * L + b;
        gout[idx] = coeff * (acts_.back()[idx] - inputs[b][i] * arch_.input_scale);
      }
    }
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const auto& sh = layers_[l].shape;
      double* g = gbuf_[l + 1].data();
      const std::size_t count = static_cast<std::size_t>(sh.out_channels) * sh.out_length * L;
      if (sh.dropout_after > 0.0 && dropout_active_) {
        const double* m = masks_[l].data();
        for (std::size_t i = 0; i < count; ++i) g[i] *= m[i];
      }
      if (sh.relu) {
        const double* z = pre_[l].data();
        for (std::size_t i = 0; i < count; ++i) g[i] = z[i] > 0.0 ? g[i] : 0.0;
      }
      double* gin = l > 0 ? gbuf_[l].data() : nullptr;
      if (gin) std::fill(gin, gin + static_cast<std::ptrdiff_t>(sh.in_channels * sh.in_length * L), 0.0);
      layer_backward(layers_[l], acts_[l].data(), g, gin, grad_lanes_[l].data(), bias_lanes_[l].data());
    }
  }

  // Sums lanes in fixed order into grads (same layout as parameters()).
  void reduce(Gradients& grads) const {
    grads.resize(layers_.size() * 2);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      reduce_one(grad_lanes_[l], layers_[l].weights.size(), grads[2 * l]);
      reduce_one(bias_lanes_[l], layers_[l].bias.size(), grads[2 * l + 1]);
    }
  }

 private:
  void reduce_one(const std::vector<double>& lanes, std::size_t n, std::vector<double>& out) const {
    out.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (int b = 0; b < accum_lanes_; ++b) s += lanes[i * kMaxLanes + b];
      out[i] = s;
    }
  }

  void layer_forward(const Layer& layer, const double* in, double* out) const {
    const auto& sh = layer.shape;
    const int L = lanes_;
    const int K = sh.kernel, S = sh.stride, P = sh.pad_before;
    for (int f = 0; f < sh.out_channels; ++f) {
      double* row = out + static_cast<std::size_t>(f) * sh.out_length * L;
      std::fill(row, row + static_cast<std::ptrdiff_t>(sh.out_length * L), layer.bias[f]);
    }
    for (int c = 0; c < sh.in_channels; ++c) {
      for (int f = 0; f < sh.out_channels; ++f) {
        for (int k = 0; k < K; ++k) {
          if (sh.kind == LayerKind::conv) {
            const double wv = layer.weights[(static_cast<std::size_t>(f) * sh.in_channels + c) * K + k];
            for (int o = 0; o < sh.out_length; ++o) {
              const int i = o * S + k - P;
              if (i < 0 || i >= sh.in_length) continue;
              const double* src = in + (static_cast<std::size_t>(c) * sh.in_length + i) * L;
              double* dst = out + (static_cast<std::size_t>(f) * sh.out_length + o) * L;
              for (int b = 0; b < L; ++b) dst[b] += wv * src[b];
            }
          } else {
            const double wv = layer.weights[(static_cast<std::size_t>(c) * sh.out_channels + f) * K + k];
            for (int i = 0; i < sh.in_length; ++i) {
              const int o = i * S + k - P;
              if (o < 0 || o >= sh.out_length) continue;
              const double* src = in + (static_cast<std::size_t>(c) * sh.in_length + i) * L;
              double* dst = out + (static_cast<std::size_t>(f) * sh.out_length + o) * L;
              for (int b = 0; b < L; ++b) dst[b] += wv * src[b];
            }
          }
        }
      }
    }
  }

  void layer_backward(const Layer& layer, const double* in, const double* gz, double* gin, double* gw_lanes,
                      double* gb_lanes) const {
    const auto& sh = layer.shape;
    const int L = lanes_;
    const int K = sh.kernel, S = sh.stride, P = sh.pad_before;
    for (int f = 0; f < sh.out_channels; ++f) {
      double* gb = gb_lanes + static_cast<std::size_t>(f) * kMaxLanes;
      for (int o = 0; o < sh.out_length; ++o) {
        const double* g = gz + (static_cast<std::size_t>(f) * sh.out_length + o) * L;
        for (int b = 0; b < L; ++b) gb[b] += g[b];
      }
    }
    for (int c = 0; c < sh.in_channels; ++c) {
      for (int f = 0; f < sh.out_channels; ++f) {
        for (int k = 0; k < K; ++k) {
          const std::size_t widx = sh.kind == LayerKind::conv
                                       ? (static_cast<std::size_t>(f) * sh.in_channels + c) * K + k
                                       : (static_cast<std::size_t>(c) * sh.out_channels + f) * K + k;
          const double wv = layer.weights[widx];
          double* gw = gw_lanes + widx * kMaxLanes;
          const int span_len = sh.kind == LayerKind::conv ? sh.out_length : sh.in_length;
          for (int j = 0; j < span_len; ++j) {
            int i, o;
            if (sh.kind == LayerKind::conv) {
              o = j;
              i = o * S + k - P;
            } else {
              i = j;
              o = i * S + k - P;
            }
            if (i < 0 || i >= sh.in_length || o < 0 || o >= sh.out_length) continue;
            const double* g = gz + (static_cast<std::size_t>(f) * sh.out_length + o) * L;
            const double* x = in + (static_cast<std::size_t>(c) * sh.in_length + i) * L;
            for (int b = 0; b < L; ++b) gw[b] += g[b] * x[b];
            if (gin) {
              double* gx = gin + (static_cast<std::size_t>(c) * sh.in_length + i) * L;
              for (int b = 0; b < L; ++b) gx[b] += wv * g[b];
            }
          }
        }
      }
    }
  }

  const std::vector<Layer>& layers_;
  const Architecture& arch_;
  int lanes_ = 0;
  int accum_lanes_ = 0;
  bool dropout_active_ = false;
  std::vector<std::vector<double>> acts_;
  std::vector<std::vector<double>> pre_;
  std::vector<std::vector<double>> masks_;
  std::vector<std::vector<double>> gbuf_;
  std::vector<std::vector<double>> grad_lanes_;
  std::vector<std::vector<double>> bias_lanes_;
};

template <typename Fn>
void for_each_chunk(std::size_t n, Fn&& fn) {
  for (std::size_t begin = 0; begin < n; begin += kMaxLanes) {
    fn(begin, std::min(n, begin + kMaxLanes));
  }
}

}  // namespace

AutoencoderModel::AutoencoderModel(const Architecture& arch) : arch_(arch) {
  for (auto& sh : layer_shapes(arch_)) {
    Layer l;
    l.weights.assign(sh.weight_count(), 0.0);
    l.bias.assign(static_cast<std::size_t>(sh.out_channels), 0.0);
    l.shape = std::move(sh);
    layers_.push_back(std::move(l));
  }
}

AutoencoderModel::AutoencoderModel(const Architecture& arch, std::uint64_t seed) : AutoencoderModel(arch) {
  meta_.seed = seed;
  Rng rng(mix_seed(seed, 0x1a17));
  for (auto& l : layers_) {
    const double fan_in = static_cast<double>(l.shape.in_channels) * l.shape.kernel;
    const double limit = std::sqrt(6.0 / fan_in);
    for (double& w : l.weights) w = rng.uniform(-limit, limit);
  }
}

AutoencoderModel AutoencoderModel::zeros(const Architecture& arch) { return AutoencoderModel(arch); }

void AutoencoderModel::check_length(std::size_t n) const {
  if (n != static_cast<std::size_t>(arch_.input_length)) {
    throw ValidationError("window length " + std::to_string(n) + " does not match model input length " +
                          std::to_string(arch_.input_length));
  }
}

std::vector<double> AutoencoderModel::forward(std::span<const double> window) const {
  check_length(window.size());
  Engine engine(layers_, arch_);
  const std::span<const double> in[1] = {window};
  engine.forward(in, nullptr);
  std::vector<double> out(window.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = engine.output(0, static_cast<int>(i)) / arch_.input_scale;
  return out;
}

std::vector<double> AutoencoderModel::forward(std::span<const double> window, Rng& dropout_rng) const {
  check_length(window.size());
  Engine engine(layers_, arch_);
  const std::span<const double> in[1] = {window};
  const double rate = arch_.dropout;
  const MaskFn mask = [&](int, int, int) { return dropout_rng.uniform() >= rate; };
  engine.forward(in, &mask);
  std::vector<double> out(window.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = engine.output(0, static_cast<int>(i)) / arch_.input_scale;
  return out;
}

double AutoencoderModel::reconstruction_loss(std::span<const double> window) const {
  check_length(window.size());
  Engine engine(layers_, arch_);
  const std::span<const double> in[1] = {window};
  engine.forward(in, nullptr);
  return engine.lane_loss(0, window);
}

std::vector<double> AutoencoderModel::reconstruction_losses(std::span<const HeadingWindow> windows) const {
  Engine engine(layers_, arch_);
  std::vector<double> losses(windows.size());
  std::vector<std::span<const double>> chunk;
  for_each_chunk(windows.size(), [&](std::size_t begin, std::size_t end) {
    chunk.clear();
    for (std::size_t i = begin; i < end; ++i) {
      check_length(windows[i].values.size());
      chunk.emplace_back(windows[i].values);
    }
    engine.forward(chunk, nullptr);
    for (std::size_t i = begin; i < end; ++i) losses[i] = engine.lane_loss(static_cast<int>(i - begin), chunk[i - begin]);
  });
  return losses;
}

std::vector<ParameterTensor> AutoencoderModel::parameters() {
  std::vector<ParameterTensor> out;
  for (auto& l : layers_) {
    out.push_back({l.shape.name + ".weights", l.weights});
    out.push_back({l.shape.name + ".bias", l.bias});
  }
  return out;
}

std::size_t AutoencoderModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

double AutoencoderModel::loss_and_gradients(std::span<const std::vector<double>> batch, Gradients& grads) const {
  if (batch.empty()) throw ValidationError("empty batch");
  Engine engine(layers_, arch_);
  engine.zero_grad_lanes();
  const double weight = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  std::vector<std::span<const double>> chunk;
  for_each_chunk(batch.size(), [&](std::size_t begin, std::size_t end) {
    chunk.clear();
    for (std::size_t i = begin; i < end; ++i) {
      check_length(batch[i].size());
      chunk.emplace_back(batch[i]);
    }
    engine.forward(chunk, nullptr);
    for (std::size_t i = begin; i < end; ++i) total += engine.lane_loss(static_cast<int>(i - begin), chunk[i - begin]);
    engine.backward(chunk, weight);
  });
  engine.reduce(grads);
  return total * weight;
}

std::vector<std::uint8_t> AutoencoderModel::relu_pattern(std::span<const std::vector<double>> batch) const {
  Engine engine(layers_, arch_);
  std::vector<std::uint8_t> pattern;
  std::vector<std::span<const double>> chunk;
  for_each_chunk(batch.size(), [&](std::size_t begin, std::size_t end) {
    chunk.clear();
    for (std::size_t i = begin; i < end; ++i) chunk.emplace_back(batch[i]);
    engine.forward(chunk, nullptr);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      if (!layers_[l].shape.relu) continue;
      for (std::size_t i = 0; i < engine.pre_count(l); ++i) pattern.push_back(engine.relu_active(l, i) ? 1 : 0);
    }
  });
  return pattern;
}

bool operator==(const AutoencoderModel& a, const AutoencoderModel& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t i = 0; i < a.layers_.size(); ++i) {
    if (a.layers_[i].weights != b.layers_[i].weights || a.layers_[i].bias != b.layers_[i].bias) return false;
  }
  return a.arch_.input_length == b.arch_.input_length;
}

double mse_loss(std::span<const double> original, std::span<const double> reconstruction) {
  if (original.size() != reconstruction.size()) throw ValidationError("mse_loss: length mismatch");
  if (original.empty()) throw ValidationError("mse_loss: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    const double d = original[i] - reconstruction[i];
    sum += d * d;
  }
  return sum / static_cast<double>(original.size());
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0) ||
      !(epsilon > 0.0)) {
    throw ValidationError("invalid optimizer hyperparameters");
  }
  if (batch_size < 1 || max_epochs < 1 || patience < 1 || !(min_delta >= 0.0)) {
    throw ValidationError("invalid training schedule");
  }
}

class Trainer {
 public:
  Trainer(AutoencoderModel& model, const TrainConfig& config) : model_(model), config_(config) {
    for (const auto& l : model_.layers_) {
      m_.emplace_back(l.weights.size(), 0.0);
      v_.emplace_back(l.weights.size(), 0.0);
      m_.emplace_back(l.bias.size(), 0.0);
      v_.emplace_back(l.bias.size(), 0.0);
    }
  }

  double run_epoch(std::span<const HeadingWindow> windows, int epoch, std::vector<std::size_t>& order) {
    Rng shuffle_rng(mix_seed(config_.seed, 0x5f00 + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }
    const std::uint64_t epoch_key = mix_seed(config_.seed, 0xd40f00 + static_cast<std::uint64_t>(epoch));
    const double keep_threshold = model_.arch_.dropout;

    Engine engine(model_.layers_, model_.arch_);
    std::vector<std::span<const double>> chunk;
    std::size_t chunk_begin = 0;
    const MaskFn mask = [&](int lane, int layer, int element) {
      const std::uint64_t sample = chunk_begin + static_cast<std::uint64_t>(lane);
      const std::uint64_t key = mix_seed(mix_seed(epoch_key, sample), (static_cast<std::uint64_t>(layer) << 32) |
                                                                          static_cast<std::uint64_t>(element));
      return to_unit_interval(key) >= keep_threshold;
    };

    double epoch_loss = 0.0;
    const std::size_t n = order.size();
    const auto batch = static_cast<std::size_t>(config_.batch_size);
    for (std::size_t bstart = 0; bstart < n; bstart += batch) {
      const std::size_t bend = std::min(n, bstart + batch);
      const double weight = 1.0 / static_cast<double>(bend - bstart);
      engine.zero_grad_lanes();
      for (std::size_t cstart = bstart; cstart < bend; cstart += kMaxLanes) {
        const std::size_t cend = std::min(bend, cstart + kMaxLanes);
        chunk.clear();
        for (std::size_t i = cstart; i < cend; ++i) chunk.emplace_back(windows[order[i]].values);
        chunk_begin = cstart;
        engine.forward(chunk, &mask);
        for (std::size_t i = cstart; i < cend; ++i) {
          epoch_loss += engine.lane_loss(static_cast<int>(i - cstart), chunk[i - cstart]);
        }
        engine.backward(chunk, weight);
      }
      engine.reduce(grads_);
      adam_step();
    }
    return epoch_loss / static_cast<double>(n);
  }

 private:
  void adam_step() {
    ++step_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double correction1 = 1.0 - std::pow(b1, step_);
    const double correction2 = 1.0 - std::pow(b2, step_);
    std::size_t t = 0;
    for (auto& l : model_.layers_) {
      for (auto* params : {&l.weights, &l.bias}) {
        auto& m = m_[t];
        auto& v = v_[t];
        const auto& g = grads_[t];
        for (std::size_t i = 0; i < params->size(); ++i) {
          m[i] = b1 * m[i] + (1.0 - b1) * g[i];
          v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
          const double mhat = m[i] / correction1;
          const double vhat = v[i] / correction2;
          (*params)[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
        }
        ++t;
      }
    }
  }

  AutoencoderModel& model_;
  const TrainConfig& config_;
  std::vector<std::vector<double>> m_, v_;
  Gradients grads_;
  int step_ = 0;
};

AutoencoderModel train(std::span<const HeadingWindow> windows, const TrainConfig& config, const Architecture& arch,
                       const EpochCallback& on_epoch) {
  config.validate();
  if (windows.empty()) throw ValidationError("training set is empty");
  for (const auto& w : windows) {
    if (w.values.size() != static_cast<std::size_t>(arch.input_length)) {
      throw ValidationError("training window length does not match the architecture input length");
    }
  }
  AutoencoderModel model(arch, config.seed);
  Trainer trainer(model, config);
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    const double loss = trainer.run_epoch(windows, epoch, order);
    auto& meta = model.metadata();
    meta.loss_history.push_back(loss);
    meta.epochs_trained = epoch + 1;
    meta.final_loss = loss;
    if (on_epoch) on_epoch(epoch + 1, loss);
    if (loss < best - config.min_delta) {
      best = loss;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  return model;
}

std::string model_to_json_text(const AutoencoderModel& model) {
  const auto& arch = model.architecture();
  const auto& meta = model.metadata();
  nlohmann::ordered_json doc;
  doc["magic"] = kMagic;
  doc["version"] = kFormatVersion;
  doc["metadata"] = {
      {"input_length", arch.input_length},
      {"sample_rate", meta.sample_rate},
      {"window_length", meta.window_length},
      {"overlap", meta.overlap},
      {"threshold", meta.threshold ? nlohmann::ordered_json(*meta.threshold) : nlohmann::ordered_json(nullptr)},
      {"n_consecutive", meta.n_consecutive},
      {"seed", meta.seed},
      {"epochs", meta.epochs_trained},
      {"final_loss", meta.final_loss ? nlohmann::ordered_json(*meta.final_loss) : nlohmann::ordered_json(nullptr)},
      {"loss_history", meta.loss_history},
  };
  doc["architecture"] = {
      {"filters1", arch.filters1},   {"filters2", arch.filters2}, {"kernel_size", arch.kernel_size},
      {"stride", arch.stride},       {"dropout", arch.dropout},   {"input_scale", arch.input_scale},
  };
  auto layers = nlohmann::ordered_json::array();
  for (const auto& l : model.layers()) {
    layers.push_back({{"name", l.shape.name},
                      {"kind", l.shape.kind == LayerKind::conv ? "conv" : "deconv"},
                      {"in_channels", l.shape.in_channels},
                      {"out_channels", l.shape.out_channels},
                      {"kernel", l.shape.kernel},
                      {"stride", l.shape.stride},
                      {"weights", l.weights},
                      {"bias", l.bias}});
  }
  doc["layers"] = std::move(layers);
  return doc.dump(1) + "\n";
}

AutoencoderModel model_from_json_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (!doc.is_object() || doc.value("magic", std::string()) != kMagic) {
      throw ParseError("not an autoencoder model file (bad magic)");
    }
    if (doc.at("version").get<int>() != kFormatVersion) {
      throw ParseError("unsupported model file version " + doc.at("version").dump());
    }
    const auto& md = doc.at("metadata");
    const auto& ad = doc.at("architecture");
    Architecture arch;
    arch.input_length = md.at("input_length").get<int>();
    arch.filters1 = ad.at("filters1").get<int>();
    arch.filters2 = ad.at("filters2").get<int>();
    arch.kernel_size = ad.at("kernel_size").get<int>();
    arch.stride = ad.at("stride").get<int>();
    arch.dropout = ad.at("dropout").get<double>();
    arch.input_scale = ad.at("input_scale").get<double>();

    AutoencoderModel model(arch);
    auto& meta = model.meta_;
    meta.sample_rate = md.at("sample_rate").get<double>();
    meta.window_length = md.at("window_length").get<double>();
    meta.overlap = md.at("overlap").get<double>();
    if (!md.at("threshold").is_null()) meta.threshold = md.at("threshold").get<double>();
    meta.n_consecutive = md.at("n_consecutive").get<int>();
    meta.seed = md.at("seed").get<std::uint64_t>();
    meta.epochs_trained = md.at("epochs").get<int>();
    if (!md.at("final_loss").is_null()) meta.final_loss = md.at("final_loss").get<double>();
    meta.loss_history = md.at("loss_history").get<std::vector<double>>();

    const auto& layers = doc.at("layers");
    if (!layers.is_array() || layers.size() != model.layers_.size()) throw ParseError("model file: layer count mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      auto& l = model.layers_[i];
      const auto& ld = layers[i];
      if (ld.at("name").get<std::string>() != l.shape.name) throw ParseError("model file: unexpected layer order");
      auto weights = ld.at("weights").get<std::vector<double>>();
      auto bias = ld.at("bias").get<std::vector<double>>();
      if (weights.size() != l.weights.size() || bias.size() != l.bias.size()) {
        throw ParseError("model file: parameter count mismatch in layer " + l.shape.name);
      }
      l.weights = std::move(weights);
      l.bias = std::move(bias);
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model file is corrupt: ") + e.what());
  }
}

void save_model(const AutoencoderModel& model, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write model file " + tmp.string());
    out << model_to_json_text(model);
    if (!out) throw Error("failed writing model file " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

AutoencoderModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return model_from_json_text(buf.str());
}

}  // namespace uavmon
