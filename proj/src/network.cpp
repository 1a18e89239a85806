#include "coronary/network.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "coronary/error.hpp"
#include "coronary/json_io.hpp"
#include "coronary/util.hpp"

namespace coronary {

ArteryLabel argmax_label(const ProbVector& probs) {
    const auto it = std::max_element(probs.begin(), probs.end());  // first maximum
    return label_at(static_cast<std::size_t>(std::distance(probs.begin(), it)));
}

void Architecture::validate() const {
    if (input == 0 || output == 0 || hidden.empty()) throw ConfigError("architecture widths must be positive");
    if (std::any_of(hidden.begin(), hidden.end(), [](std::size_t w) { return w == 0; })) {
        throw ConfigError("architecture widths must be positive");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
}

Parameters Parameters::zeros(const Architecture& arch) {
    Parameters p;
    std::size_t fan_in = arch.input;
    for (std::size_t l = 0; l < arch.affine_layers(); ++l) {
        const std::size_t width = l < arch.hidden.size() ? arch.hidden[l] : arch.output;
        p.weights.push_back(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(fan_in)));
        p.biases.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(width)));
        if (l < arch.hidden.size()) {
            p.bn_scale.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(width)));
            p.bn_shift.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(width)));
        }
        fan_in = width;
    }
    return p;
}

std::size_t Parameters::count() const {
    std::size_t n = 0;
    for_each_tensor([&](std::span<const double> t) { n += t.size(); });
    return n;
}

std::size_t RunningStats::count() const {
    std::size_t n = 0;
    for (const auto& m : mean) n += static_cast<std::size_t>(m.size());
    for (const auto& v : variance) n += static_cast<std::size_t>(v.size());
    return n;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("focal gamma must be >= 0");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("Adam betas must lie in [0, 1)");
    }
    if (!(adam_epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
    if (!(bn_momentum >= 0.0 && bn_momentum <= 1.0)) throw ConfigError("batch-norm momentum must lie in [0, 1]");
}

// ---------------------------------------------------------------------------
// Mlp

Mlp::Mlp(Architecture arch) : arch_(std::move(arch)) {
    arch_.validate();
    params_ = Parameters::zeros(arch_);
    for (std::size_t l = 0; l < arch_.hidden.size(); ++l) {
        const auto width = static_cast<Eigen::Index>(arch_.hidden[l]);
        params_.bn_scale[l].setOnes();
        stats_.mean.push_back(Eigen::VectorXd::Zero(width));
        stats_.variance.push_back(Eigen::VectorXd::Ones(width));
    }
}

void Mlp::initialize(Rng& rng) {
    for (std::size_t l = 0; l < params_.weights.size(); ++l) {
        Eigen::MatrixXd& w = params_.weights[l];
        const double bound = std::sqrt(6.0 / static_cast<double>(w.cols()));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
        params_.biases[l].setZero();
    }
    for (std::size_t l = 0; l < params_.bn_scale.size(); ++l) {
        params_.bn_scale[l].setOnes();
        params_.bn_shift[l].setZero();
        stats_.mean[l].setZero();
        stats_.variance[l].setOnes();
    }
}

void Mlp::quantize() {
    auto round = [](std::span<double> t) {
        for (double& v : t) v = static_cast<double>(static_cast<float>(v));
    };
    params_.for_each_tensor(round);
    for (auto& m : stats_.mean) round({m.data(), static_cast<std::size_t>(m.size())});
    for (auto& v : stats_.variance) round({v.data(), static_cast<std::size_t>(v.size())});
}

void Mlp::check_inputs(const Eigen::MatrixXd& inputs) const {
    if (static_cast<std::size_t>(inputs.rows()) != arch_.input) {
        throw ShapeError("expected " + std::to_string(arch_.input) + " input features, got " +
                         std::to_string(inputs.rows()));
    }
    if (inputs.cols() == 0) throw ShapeError("empty batch");
    if (mode_ == Mode::train && inputs.cols() < 2) {
        throw ShapeError("train-mode batch normalisation needs at least two examples");
    }
}

namespace {

void softmax_columns(Eigen::MatrixXd& logits) {
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        auto col = logits.col(c);
        col.array() -= col.maxCoeff();
        col = col.array().exp().matrix();
        col /= col.sum();
    }
}

Eigen::MatrixXd sample_dropout(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
    Eigen::MatrixXd scale(rows, cols);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const double keep = 1.0 - rate;
    for (Eigen::Index i = 0; i < scale.size(); ++i) scale.data()[i] = uniform(rng) < keep ? 1.0 / keep : 0.0;
    return scale;
}

}  // namespace

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& inputs, Rng* rng) const {
    check_inputs(inputs);
    if (mode_ == Mode::train) return forward_train(inputs, rng).probs;

    Eigen::MatrixXd a = inputs;
    for (std::size_t l = 0; l < arch_.hidden.size(); ++l) {
        Eigen::MatrixXd z = (params_.weights[l] * a).colwise() + params_.biases[l];
        const Eigen::VectorXd scale =
            params_.bn_scale[l].array() / (stats_.variance[l].array() + Architecture::kBatchNormEpsilon).sqrt();
        z.colwise() -= stats_.mean[l];
        z = (z.array().colwise() * scale.array()).matrix();
        z.colwise() += params_.bn_shift[l];
        a = z.cwiseMax(0.0);
    }
    Eigen::MatrixXd logits = (params_.weights.back() * a).colwise() + params_.biases.back();
    softmax_columns(logits);
    return logits;
}

ForwardTrace Mlp::forward_train(const Eigen::MatrixXd& inputs, Rng* rng, const Eigen::MatrixXd* dropout_scale) const {
    if (static_cast<std::size_t>(inputs.rows()) != arch_.input) {
        throw ShapeError("expected " + std::to_string(arch_.input) + " input features, got " +
                         std::to_string(inputs.rows()));
    }
    if (inputs.cols() < 2) throw ShapeError("train-mode batch normalisation needs at least two examples");

    const double batch = static_cast<double>(inputs.cols());
    ForwardTrace trace;
    trace.blocks.reserve(arch_.hidden.size());
    Eigen::MatrixXd a = inputs;
    for (std::size_t l = 0; l < arch_.hidden.size(); ++l) {
        ForwardTrace::Block block;
        Eigen::MatrixXd z = (params_.weights[l] * a).colwise() + params_.biases[l];
        const Eigen::VectorXd mean = z.rowwise().sum() / batch;
        z.colwise() -= mean;
        const Eigen::VectorXd variance = z.array().square().rowwise().sum() / batch;
        block.inv_std = (variance.array() + Architecture::kBatchNormEpsilon).rsqrt();
        block.normalized = (z.array().colwise() * block.inv_std.array()).matrix();
        block.activated = (block.normalized.array().colwise() * params_.bn_scale[l].array()).matrix();
        block.activated.colwise() += params_.bn_shift[l];
        block.input = std::move(a);
        a = block.activated.cwiseMax(0.0);
        trace.batch_mean.push_back(mean);
        trace.batch_variance.push_back(variance);
        trace.blocks.push_back(std::move(block));
    }

    if (dropout_scale) {
        if (dropout_scale->rows() != a.rows() || dropout_scale->cols() != a.cols()) {
            throw ShapeError("dropout mask shape does not match the last hidden block");
        }
        trace.dropout_scale = *dropout_scale;
    } else if (rng && arch_.dropout > 0.0) {
        trace.dropout_scale = sample_dropout(a.rows(), a.cols(), arch_.dropout, *rng);
    }
    if (trace.dropout_scale.size() > 0) a = a.cwiseProduct(trace.dropout_scale);
    trace.dropped = std::move(a);

    trace.probs = (params_.weights.back() * trace.dropped).colwise() + params_.biases.back();
    softmax_columns(trace.probs);
    return trace;
}

Parameters Mlp::backward(const ForwardTrace& trace, const Eigen::MatrixXd& grad_logits) const {
    Parameters grads = Parameters::zeros(arch_);
    const std::size_t out = params_.weights.size() - 1;
    const double batch = static_cast<double>(grad_logits.cols());

    grads.weights[out] = grad_logits * trace.dropped.transpose();
    grads.biases[out] = grad_logits.rowwise().sum();
    Eigen::MatrixXd upstream = params_.weights[out].transpose() * grad_logits;
    if (trace.dropout_scale.size() > 0) upstream = upstream.cwiseProduct(trace.dropout_scale);

    for (std::size_t l = arch_.hidden.size(); l-- > 0;) {
        const ForwardTrace::Block& block = trace.blocks[l];
        // ReLU
        const Eigen::MatrixXd d_bn = (block.activated.array() > 0.0).select(upstream, 0.0);
        grads.bn_scale[l] = d_bn.cwiseProduct(block.normalized).rowwise().sum();
        grads.bn_shift[l] = d_bn.rowwise().sum();

        const Eigen::MatrixXd d_norm = (d_bn.array().colwise() * params_.bn_scale[l].array()).matrix();
        const Eigen::VectorXd sum_d = d_norm.rowwise().sum();
        const Eigen::VectorXd sum_dx = d_norm.cwiseProduct(block.normalized).rowwise().sum();
        Eigen::MatrixXd d_pre = batch * d_norm;
        d_pre.colwise() -= sum_d;
        d_pre -= (block.normalized.array().colwise() * sum_dx.array()).matrix();
        d_pre = (d_pre.array().colwise() * (block.inv_std.array() / batch)).matrix();

        grads.weights[l] = d_pre * block.input.transpose();
        grads.biases[l] = d_pre.rowwise().sum();
        if (l > 0) upstream = params_.weights[l].transpose() * d_pre;
    }
    return grads;
}

void Mlp::update_running_stats(const ForwardTrace& trace, double momentum) {
    const double batch = static_cast<double>(trace.probs.cols());
    const double unbias = batch / (batch - 1.0);
    for (std::size_t l = 0; l < stats_.mean.size(); ++l) {
        stats_.mean[l] = (1.0 - momentum) * stats_.mean[l] + momentum * trace.batch_mean[l];
        stats_.variance[l] = (1.0 - momentum) * stats_.variance[l] + (momentum * unbias) * trace.batch_variance[l];
    }
}

Eigen::MatrixXd to_matrix(std::span<const FeatureVector> batch) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(kFeatureCount), static_cast<Eigen::Index>(batch.size()));
    for (std::size_t c = 0; c < batch.size(); ++c) {
        for (std::size_t r = 0; r < kFeatureCount; ++r) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = batch[c].values[r];
        }
    }
    return m;
}

std::vector<ProbVector> Mlp::forward(std::span<const FeatureVector> batch, Rng* rng) const {
    if (arch_.input != kFeatureCount || arch_.output != kLabelCount) {
        throw ShapeError("model architecture does not map feature vectors to artery labels");
    }
    const Eigen::MatrixXd probs = forward(to_matrix(batch), rng);
    std::vector<ProbVector> out(batch.size());
    for (std::size_t c = 0; c < batch.size(); ++c) {
        for (std::size_t r = 0; r < kLabelCount; ++r) {
            out[c][r] = probs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        }
    }
    return out;
}

ProbVector Mlp::predict(const FeatureVector& features) const {
    if (mode_ != Mode::eval) throw ShapeError("predict requires an eval-mode model");
    return forward(std::span<const FeatureVector>(&features, 1)).front();
}

// ---------------------------------------------------------------------------
// Focal loss

namespace {

constexpr double kProbFloor = 1e-12;

double focal_term(double p_true, double gamma) {
    const double remainder = std::max(0.0, 1.0 - p_true);
    return -std::pow(remainder, gamma) * std::log(std::max(p_true, kProbFloor));
}

}  // namespace

double focal_loss(std::span<const ProbVector> probs, std::span<const ArteryLabel> targets, double gamma) {
    if (probs.size() != targets.size()) throw ShapeError("focal_loss: probabilities and targets differ in length");
    if (probs.empty()) throw ShapeError("focal_loss: empty batch");
    if (!(gamma >= 0.0)) throw ConfigError("focal_loss: gamma must be >= 0");
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) total += focal_term(probs[i][index_of(targets[i])], gamma);
    return total / static_cast<double>(probs.size());
}

LossAndGradient focal_loss_gradient(const Eigen::MatrixXd& probs, std::span<const int> targets, double gamma) {
    if (static_cast<std::size_t>(probs.cols()) != targets.size()) {
        throw ShapeError("focal_loss: probabilities and targets differ in length");
    }
    if (targets.empty()) throw ShapeError("focal_loss: empty batch");
    const double batch = static_cast<double>(targets.size());

    LossAndGradient result;
    result.grad_logits.resize(probs.rows(), probs.cols());
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
        const int t = targets[static_cast<std::size_t>(c)];
        if (t < 0 || t >= probs.rows()) throw ShapeError("focal_loss: target index out of range");
        const double p = probs(t, c);
        const double remainder = std::max(0.0, 1.0 - p);
        const double log_p = std::log(std::max(p, kProbFloor));
        result.loss += -std::pow(remainder, gamma) * log_p;

        // d/dp of -(1-p)^g ln p; the clamped log has zero slope below the floor.
        double d_p = 0.0;
        if (gamma > 0.0 && remainder > 0.0) d_p += gamma * std::pow(remainder, gamma - 1.0) * log_p;
        if (p >= kProbFloor) d_p -= std::pow(remainder, gamma) / p;

        // softmax Jacobian: dp_t/dz_j = p_t (delta_tj - p_j)
        auto col = result.grad_logits.col(c);
        col = -(d_p * p) * probs.col(c);
        col(t) += d_p * p;
        col /= batch;
    }
    result.loss /= batch;
    return result;
}

// ---------------------------------------------------------------------------
// Optimisation

AdamOptimizer::AdamOptimizer(const Architecture& arch, const TrainConfig& config)
    : config_(config), first_(Parameters::zeros(arch)), second_(Parameters::zeros(arch)) {}

void AdamOptimizer::step(Parameters& params, const Parameters& grads) {
    ++steps_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    const double lr = config_.learning_rate;
    const double eps = config_.adam_epsilon;

    std::vector<std::span<double>> p_tensors, m_tensors, v_tensors;
    std::vector<std::span<const double>> g_tensors;
    params.for_each_tensor([&](std::span<double> t) { p_tensors.push_back(t); });
    first_.for_each_tensor([&](std::span<double> t) { m_tensors.push_back(t); });
    second_.for_each_tensor([&](std::span<double> t) { v_tensors.push_back(t); });
    grads.for_each_tensor([&](std::span<const double> t) { g_tensors.push_back(t); });

    for (std::size_t k = 0; k < p_tensors.size(); ++k) {
        auto p = p_tensors[k];
        auto m = m_tensors[k];
        auto v = v_tensors[k];
        auto g = g_tensors[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

Trainer::Trainer(Mlp& model, const TrainConfig& config, Rng& rng)
    : model_(model), config_(config), rng_(rng), optimizer_(model.architecture(), config) {
    config_.validate();
}

double Trainer::step(const Eigen::MatrixXd& inputs, std::span<const int> targets) {
    if (model_.mode() != Mode::train) throw TrainingError("train step requires a train-mode model");
    const ForwardTrace trace = model_.forward_train(inputs, &rng_);
    const LossAndGradient lg = focal_loss_gradient(trace.probs, targets, config_.gamma);
    if (!std::isfinite(lg.loss)) {
        throw TrainingError("non-finite focal loss (" + std::to_string(lg.loss) + "); training aborted");
    }
    const Parameters grads = model_.backward(trace, lg.grad_logits);
    optimizer_.step(model_.parameters(), grads);
    model_.update_running_stats(trace, config_.bn_momentum);
    return lg.loss;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t examples, int batch_size, Rng& rng) {
    std::vector<std::size_t> order(examples);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    const auto size = static_cast<std::size_t>(batch_size);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t begin = 0; begin < examples; begin += size) {
        const std::size_t end = std::min(examples, begin + size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    if (batches.size() > 1 && batches.back().size() == 1) {
        batches[batches.size() - 2].push_back(batches.back().front());
        batches.pop_back();
    }
    return batches;
}

TrainResult train(std::span<const LabelledExample> examples, const TrainConfig& config, const Architecture& arch) {
    config.validate();
    if (examples.empty()) throw TrainingError("cannot train on an empty dataset");
    if (examples.size() < 2) throw TrainingError("training needs at least two examples for batch statistics");
    if (arch.input != kFeatureCount || arch.output != kLabelCount) {
        throw ConfigError("training architecture must map 14 features to 13 labels");
    }

    const auto started = std::chrono::steady_clock::now();
    TrainResult result{Mlp(arch), {}, {}, 0.0};

    std::array<std::size_t, kLabelCount> class_counts{};
    for (const auto& e : examples) ++class_counts[index_of(e.label)];
    for (std::size_t k = 0; k < kLabelCount; ++k) {
        if (class_counts[k] == 0) {
            result.warnings.push_back("no training examples for label " + std::string(label_name(label_at(k))));
        }
    }

    std::vector<FeatureVector> features;
    std::vector<int> labels;
    features.reserve(examples.size());
    labels.reserve(examples.size());
    for (const auto& e : examples) {
        features.push_back(e.features);
        labels.push_back(static_cast<int>(index_of(e.label)));
    }
    const Eigen::MatrixXd all_inputs = to_matrix(features);

    Rng rng(config.seed);
    Mlp& model = result.model;
    model.initialize(rng);
    model.set_mode(Mode::train);
    Trainer trainer(model, config, rng);

    Eigen::MatrixXd batch_inputs;
    std::vector<int> batch_targets;
    result.loss_history.reserve(static_cast<std::size_t>(config.epochs));
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double epoch_loss = 0.0;
        const auto batches = epoch_batches(examples.size(), config.batch_size, rng);
        for (const auto& batch : batches) {
            batch_inputs = all_inputs(Eigen::all, batch);
            batch_targets.clear();
            for (std::size_t i : batch) batch_targets.push_back(labels[i]);
            epoch_loss += trainer.step(batch_inputs, batch_targets);
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(batches.size()));
    }

    model.set_mode(Mode::eval);
    model.quantize();
    model.set_training_config(config);
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

// ---------------------------------------------------------------------------
// Model files
//
// Layout (little-endian):
//   8 bytes   magic "CORMLP\0\1"
//   u32       format version
//   u32       header length N
//   N bytes   JSON header (architecture, counts, checksum, training config)
//   float32[] learnable parameters in Parameters visiting order
//             (weight matrices column-major, out x in)
//   float32[] running mean then running variance for each batch-norm block

namespace {

constexpr std::string_view kMagic{"CORMLP\0\1", 8};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t offset) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + static_cast<std::size_t>(i)]))
             << (8 * i);
    }
    return v;
}

void put_floats(std::string& out, std::span<const double> values) {
    for (double v : values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

void get_floats(std::string_view bytes, std::size_t& offset, std::span<double> values) {
    for (double& v : values) {
        v = static_cast<double>(std::bit_cast<float>(get_u32(bytes, offset)));
        offset += 4;
    }
}

std::string encode_payload(const Mlp& model, std::size_t& weight_bytes) {
    std::string payload;
    model.parameters().for_each_tensor([&](std::span<const double> t) { put_floats(payload, t); });
    weight_bytes = payload.size();
    for (const auto& m : model.running_stats().mean) put_floats(payload, {m.data(), static_cast<std::size_t>(m.size())});
    for (const auto& v : model.running_stats().variance) {
        put_floats(payload, {v.data(), static_cast<std::size_t>(v.size())});
    }
    return payload;
}

}  // namespace

std::size_t weight_payload_bytes(const Mlp& model) { return model.param_count() * sizeof(float); }

std::string serialize_model(const Mlp& model) {
    std::size_t weight_bytes = 0;
    const std::string payload = encode_payload(model, weight_bytes);

    nlohmann::json header;
    header["architecture"] = model.architecture();
    header["parameter_count"] = model.param_count();
    header["running_stat_count"] = model.running_stats().count();
    header["weight_payload_bytes"] = weight_bytes;
    header["payload_fnv1a64"] = hex64(fnv1a64(payload));
    header["mode"] = model.mode() == Mode::eval ? "eval" : "train";
    header["train_config"] = model.training_config() ? nlohmann::json(*model.training_config()) : nlohmann::json();
    const std::string header_text = header.dump();

    std::string out(kMagic);
    put_u32(out, kModelFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(header_text.size()));
    out += header_text;
    out += payload;
    return out;
}

Mlp deserialize_model(std::string_view bytes) {
    if (bytes.size() < kMagic.size() + 8 || bytes.substr(0, kMagic.size()) != kMagic) {
        throw SchemaError("not a model file (bad magic)");
    }
    const std::uint32_t version = get_u32(bytes, kMagic.size());
    if (version != kModelFormatVersion) {
        throw SchemaError("unsupported model format version " + std::to_string(version));
    }
    const std::uint32_t header_size = get_u32(bytes, kMagic.size() + 4);
    std::size_t offset = kMagic.size() + 8;
    if (bytes.size() < offset + header_size) throw SchemaError("model file truncated inside header");

    nlohmann::json header;
    Architecture arch;
    std::optional<TrainConfig> train_config;
    std::size_t params = 0;
    std::size_t stats = 0;
    std::string checksum;
    Mode mode = Mode::eval;
    try {
        header = nlohmann::json::parse(bytes.substr(offset, header_size));
        arch = header.at("architecture").get<Architecture>();
        params = header.at("parameter_count").get<std::size_t>();
        stats = header.at("running_stat_count").get<std::size_t>();
        checksum = header.at("payload_fnv1a64").get<std::string>();
        mode = header.at("mode").get<std::string>() == "train" ? Mode::train : Mode::eval;
        if (!header.at("train_config").is_null()) train_config = header.at("train_config").get<TrainConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("corrupt model header: ") + e.what());
    } catch (const ConfigError& e) {
        throw SchemaError(std::string("corrupt model header: ") + e.what());
    }
    offset += header_size;

    Mlp model(arch);
    if (params != model.param_count() || stats != model.running_stats().count()) {
        throw SchemaError("model header counts do not match its architecture");
    }
    const std::size_t payload_size = (params + stats) * sizeof(float);
    if (bytes.size() != offset + payload_size) {
        throw SchemaError("model payload has " + std::to_string(bytes.size() - offset) + " bytes, expected " +
                          std::to_string(payload_size));
    }
    if (hex64(fnv1a64(bytes.substr(offset))) != checksum) throw SchemaError("model payload checksum mismatch");

    model.parameters().for_each_tensor([&](std::span<double> t) { get_floats(bytes, offset, t); });
    for (auto& m : model.running_stats().mean) get_floats(bytes, offset, {m.data(), static_cast<std::size_t>(m.size())});
    for (auto& v : model.running_stats().variance) {
        get_floats(bytes, offset, {v.data(), static_cast<std::size_t>(v.size())});
    }
    model.set_mode(mode);
    model.set_training_config(train_config);
    return model;
}

void save_model(const Mlp& model, const std::filesystem::path& path) { write_file_atomic(path, serialize_model(model)); }

Mlp load_model(const std::filesystem::path& path) { return deserialize_model(read_file(path)); }

}  // namespace coronary
