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

#include "coronary/features.hpp"
#include "coronary/labels.hpp"

namespace coronary {

using ProbVector = std::array<double, kLabelCount>;
using Rng = std::mt19937_64;

/// Raw prediction: highest-probability label, ties to the lowest index.
ArteryLabel argmax_label(const ProbVector& probs);

/// Layer widths of the classifier. Each hidden block is
/// affine -> batch norm -> ReLU; dropout follows the last hidden block,
/// then an affine output layer feeds a softmax.
struct Architecture {
    std::size_t input = kFeatureCount;
    std::vector<std::size_t> hidden{50, 100, 75, 50};
    std::size_t output = kLabelCount;
    double dropout = 0.2;

    static constexpr double kBatchNormEpsilon = 1e-5;

    /// Throws ConfigError on empty/zero widths or dropout outside [0, 1).
    void validate() const;
    std::size_t affine_layers() const { return hidden.size() + 1; }

    friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Learnable tensors. Visiting order (also the on-disk order) is, per
/// affine layer l: weight, bias, then batch-norm scale and shift if l is hidden.
struct Parameters {
    std::vector<Eigen::MatrixXd> weights;  // out x in
    std::vector<Eigen::VectorXd> biases;
    std::vector<Eigen::VectorXd> bn_scale;
    std::vector<Eigen::VectorXd> bn_shift;

    static Parameters zeros(const Architecture& arch);

    /// Calls fn(std::span<double>) for every tensor in visiting order.
    template <typename Fn>
    void for_each_tensor(Fn&& fn) {
        for (std::size_t l = 0; l < weights.size(); ++l) {
            fn(std::span<double>(weights[l].data(), static_cast<std::size_t>(weights[l].size())));
            fn(std::span<double>(biases[l].data(), static_cast<std::size_t>(biases[l].size())));
            if (l < bn_scale.size()) {
                fn(std::span<double>(bn_scale[l].data(), static_cast<std::size_t>(bn_scale[l].size())));
                fn(std::span<double>(bn_shift[l].data(), static_cast<std::size_t>(bn_shift[l].size())));
            }
        }
    }
    template <typename Fn>
    void for_each_tensor(Fn&& fn) const {
        const_cast<Parameters*>(this)->for_each_tensor([&](std::span<double> t) {
            fn(std::span<const double>(t.data(), t.size()));
        });
    }

    std::size_t count() const;
};

/// Batch-norm running statistics (not learnable).
struct RunningStats {
    std::vector<Eigen::VectorXd> mean;
    std::vector<Eigen::VectorXd> variance;

    std::size_t count() const;
};

enum class Mode { train, eval };

struct TrainConfig {
    int epochs = 3000;
    int batch_size = 64;
    double gamma = 2.0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double bn_momentum = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Activations recorded by a train-mode forward pass; consumed by backward().
struct ForwardTrace {
    struct Block {
        Eigen::MatrixXd input;       // in x B
        Eigen::MatrixXd normalized;  // batch-normalized pre-activation
        Eigen::VectorXd inv_std;
        Eigen::MatrixXd activated;   // BN output before ReLU
    };
    std::vector<Block> blocks;
    Eigen::MatrixXd dropped;  // last hidden output after ReLU and dropout
    Eigen::MatrixXd dropout_scale;  // empty when dropout was not applied
    Eigen::MatrixXd probs;    // out x B
    std::vector<Eigen::VectorXd> batch_mean;
    std::vector<Eigen::VectorXd> batch_variance;  // biased
};

class Mlp {
public:
    explicit Mlp(Architecture arch = {});

    const Architecture& architecture() const { return arch_; }
    Parameters& parameters() { return params_; }
    const Parameters& parameters() const { return params_; }
    RunningStats& running_stats() { return stats_; }
    const RunningStats& running_stats() const { return stats_; }

    Mode mode() const { return mode_; }
    void set_mode(Mode mode) { mode_ = mode; }

    const std::optional<TrainConfig>& training_config() const { return training_config_; }
    void set_training_config(std::optional<TrainConfig> config) { training_config_ = std::move(config); }

    /// He-uniform affine weights, zero biases, unit BN scale, zero BN shift.
    void initialize(Rng& rng);

    /// Rounds every parameter and running statistic to float32.
    void quantize();

    /// Affine weights + biases + BN scale + shift; running statistics excluded.
    std::size_t param_count() const { return params_.count(); }

    /// Class probabilities (out x B) for column-wise inputs (in x B).
    /// Train mode uses batch statistics and, when `rng` is given, dropout.
    /// Never mutates the model.
    Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs, Rng* rng = nullptr) const;

    std::vector<ProbVector> forward(std::span<const FeatureVector> batch, Rng* rng = nullptr) const;

    /// Single eval-mode pass.
    ProbVector predict(const FeatureVector& features) const;

    /// Train-mode pass that records activations. `dropout_scale` (last hidden
    /// width x B, entries 0 or 1/(1-p)) overrides random dropout; pass nullptr
    /// together with a null `rng` to disable dropout entirely.
    ForwardTrace forward_train(const Eigen::MatrixXd& inputs, Rng* rng,
                               const Eigen::MatrixXd* dropout_scale = nullptr) const;

    /// Gradients of a loss with respect to every learnable tensor, given
    /// d(loss)/d(logits).
    Parameters backward(const ForwardTrace& trace, const Eigen::MatrixXd& grad_logits) const;

    /// Blends batch statistics from `trace` into the running statistics.
    void update_running_stats(const ForwardTrace& trace, double momentum);

private:
    void check_inputs(const Eigen::MatrixXd& inputs) const;

    Architecture arch_;
    Parameters params_;
    RunningStats stats_;
    Mode mode_ = Mode::train;
    std::optional<TrainConfig> training_config_;
};

/// Mean of -(1 - p_t)^gamma * ln(max(p_t, 1e-12)) over the batch.
double focal_loss(std::span<const ProbVector> probs, std::span<const ArteryLabel> targets, double gamma);

struct LossAndGradient {
    double loss = 0.0;
    Eigen::MatrixXd grad_logits;  // out x B, already divided by B
};

/// Focal loss of softmax probabilities (out x B) and its gradient with respect
/// to the pre-softmax logits.
LossAndGradient focal_loss_gradient(const Eigen::MatrixXd& probs, std::span<const int> targets, double gamma);

Eigen::MatrixXd to_matrix(std::span<const FeatureVector> batch);

class AdamOptimizer {
public:
    AdamOptimizer(const Architecture& arch, const TrainConfig& config);
    void step(Parameters& params, const Parameters& grads);

private:
    TrainConfig config_;
    Parameters first_;
    Parameters second_;
    long steps_ = 0;
};

/// One optimisation step on a mini-batch; returns the batch loss before the update.
class Trainer {
public:
    Trainer(Mlp& model, const TrainConfig& config, Rng& rng);

    /// Throws TrainingError if the loss is not finite.
    double step(const Eigen::MatrixXd& inputs, std::span<const int> targets);

private:
    Mlp& model_;
    TrainConfig config_;
    Rng& rng_;
    AdamOptimizer optimizer_;
};

struct TrainResult {
    Mlp model;
    std::vector<double> loss_history;  // mean batch loss per epoch
    std::vector<std::string> warnings;
    double seconds = 0.0;
};

/// Seeded mini-batch training; the returned model is in eval mode and quantized to float32.
TrainResult train(std::span<const LabelledExample> examples, const TrainConfig& config,
                  const Architecture& arch = {});

/// Ordered list of batches (as example indices) for one epoch. A trailing
/// batch of one example is merged into the previous batch.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t examples, int batch_size, Rng& rng);

// Model files

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// float32 bytes taken by the learnable parameters.
std::size_t weight_payload_bytes(const Mlp& model);

std::string serialize_model(const Mlp& model);
/// Throws SchemaError on bad magic, version, header, checksum or size.
Mlp deserialize_model(std::string_view bytes);

void save_model(const Mlp& model, const std::filesystem::path& path);
Mlp load_model(const std::filesystem::path& path);

}  // namespace coronary
