#ifndef FEDMED_NN_HPP
#define FEDMED_NN_HPP

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedmed/autodiff.hpp"
#include "fedmed/rng.hpp"
#include "fedmed/tensor.hpp"

// Learnable models. Weight init is fan-in-scaled normal: std = sqrt(2 / fan_in)
// (fan_in = in_channels * kh * kw for convs, input width for linears), biases
// zero, drawn in registration order from a single seeded stream.

namespace fedmed {

enum class Direction { a_to_b, b_to_a };

inline const char* direction_name(Direction d) {
    return d == Direction::a_to_b ? "a_to_b" : "b_to_a";
}

/// Per-sample discriminator head outputs: realness probability plus raw
/// class logits for the three auxiliary heads.
struct HeadOutputs {
    double realness = 0.5; // sigmoid of head_d output, clamped into (0, 1)
    std::array<double, 4> rot_logits{};
    std::array<double, 4> trans_logits{};
    std::array<double, 3> scale_logits{};
};

constexpr double kRealnessEps = 1e-7;

namespace nn_detail {

template <class T>
ad::VarPtr<T> make_conv_param(int co, int ci, int kh, int kw, Rng& rng) {
    Tensor<T> w(co, ci, kh, kw);
    const double std_dev = std::sqrt(2.0 / (static_cast<double>(ci) * kh * kw));
    for (auto& v : w.data) v = static_cast<T>(rng.normal(0.0, std_dev));
    return ad::param(std::move(w));
}

template <class T>
ad::VarPtr<T> make_linear_param(int m, int k, Rng& rng) {
    Tensor<T> w(m, k, 1, 1);
    const double std_dev = std::sqrt(2.0 / static_cast<double>(k));
    for (auto& v : w.data) v = static_cast<T>(rng.normal(0.0, std_dev));
    return ad::param(std::move(w));
}

template <class T>
ad::VarPtr<T> make_bias_param(int m) {
    return ad::param(Tensor<T>(m, 1, 1, 1, T(0)));
}

} // namespace nn_detail

template <class T>
struct ConvLayer {
    ad::VarPtr<T> w, b;
    int stride = 1, pad = 1;

    ad::VarPtr<T> operator()(const ad::VarPtr<T>& x) const {
        return ad::conv2d(x, w, b, stride, pad);
    }
};

template <class T>
struct LinearLayer {
    ad::VarPtr<T> w, b;

    ad::VarPtr<T> operator()(const ad::VarPtr<T>& x) const { return ad::linear(x, w, b); }
};

struct GeneratorConfig {
    int depth = 3; // number of stride-2 stages; input dims must divide 2^depth
    int base = 16; // channels at full resolution

    bool operator==(const GeneratorConfig&) const = default;
};

/// U-Net translator: single channel in/out, tanh-bounded output in [-1, 1].
/// Stage channels double per level; decoder convs consume upsampled state
/// concatenated with the matching encoder skip.
template <class T>
class Generator {
public:
    Generator(GeneratorConfig cfg, Direction dir, std::uint64_t seed)
        : cfg_(cfg), dir_(dir) {
        if (cfg.depth < 1 || cfg.base < 1)
            throw std::invalid_argument("Generator: depth and base must be >= 1");
        Rng rng(seed);
        auto reg = [&](ad::VarPtr<T> w, ad::VarPtr<T> b, int stride) {
            params_.push_back(w);
            params_.push_back(b);
            return ConvLayer<T>{w, b, stride, 1};
        };
        stem_ = reg(nn_detail::make_conv_param<T>(cfg.base, 1, 3, 3, rng),
                    nn_detail::make_bias_param<T>(cfg.base), 1);
        for (int i = 1; i <= cfg.depth; ++i) {
            const int ci = cfg.base << (i - 1), co = cfg.base << i;
            downs_.push_back(reg(nn_detail::make_conv_param<T>(co, ci, 3, 3, rng),
                                 nn_detail::make_bias_param<T>(co), 2));
        }
        for (int i = cfg.depth - 1; i >= 0; --i) {
            const int skip = cfg.base << i, above = cfg.base << (i + 1);
            ups_.push_back(reg(nn_detail::make_conv_param<T>(skip, above + skip, 3, 3, rng),
                               nn_detail::make_bias_param<T>(skip), 1));
        }
        head_ = reg(nn_detail::make_conv_param<T>(1, cfg.base, 3, 3, rng),
                    nn_detail::make_bias_param<T>(1), 1);
    }

    ad::VarPtr<T> forward(const ad::VarPtr<T>& x) const {
        const int div = 1 << cfg_.depth;
        if (x->val.h % div != 0 || x->val.w % div != 0)
            throw std::invalid_argument("Generator: spatial dims " + x->val.shape_str() +
                                        " must be divisible by 2^depth = " + std::to_string(div));
        constexpr T slope = T(0.2);
        std::vector<ad::VarPtr<T>> skips;
        auto z = ad::leaky_relu(stem_(x), slope);
        skips.push_back(z);
        for (const auto& down : downs_) {
            z = ad::leaky_relu(down(z), slope);
            skips.push_back(z);
        }
        for (int i = 0; i < cfg_.depth; ++i) {
            const auto& skip = skips[cfg_.depth - 1 - i];
            z = ad::leaky_relu(ups_[i](ad::concat_ch(ad::upsample2x(z), skip)), slope);
        }
        return ad::tanh_op(head_(z));
    }

    Tensor<T> forward_values(const Tensor<T>& x) const {
        ad::NoGradGuard guard;
        return forward(ad::constant(x))->val;
    }

    const std::vector<ad::VarPtr<T>>& params() const { return params_; }
    Direction direction() const { return dir_; }
    const GeneratorConfig& config() const { return cfg_; }

    /// Closed-form parameter count for the architecture above.
    static long long param_count(int depth, int base) {
        long long total = 10LL * base; // stem: (1*9 + 1) * base
        for (int i = 1; i <= depth; ++i) {
            const long long ci = static_cast<long long>(base) << (i - 1);
            const long long co = static_cast<long long>(base) << i;
            total += 9 * ci * co + co;
        }
        for (int i = depth - 1; i >= 0; --i) {
            const long long skip = static_cast<long long>(base) << i;
            total += 9 * (3 * skip) * skip + skip; // in = 2*skip (above) + skip
        }
        total += 9LL * base + 1; // head
        return total;
    }

private:
    GeneratorConfig cfg_;
    Direction dir_;
    ConvLayer<T> stem_, head_;
    std::vector<ConvLayer<T>> downs_, ups_;
    std::vector<ad::VarPtr<T>> params_;
};

struct DiscriminatorConfig {
    int depth = 3; // stride-2 conv stages
    int base = 8;  // channels after the first conv
    static constexpr int feature_dim = 512;
    static constexpr int head_hidden = 128;

    bool operator==(const DiscriminatorConfig&) const = default;
};

template <class T>
struct DiscHeadNodes {
    ad::VarPtr<T> realness;      // [N,1] sigmoid output
    ad::VarPtr<T> rot_logits;    // [N,4]
    ad::VarPtr<T> trans_logits;  // [N,4]
    ad::VarPtr<T> scale_logits;  // [N,3]
};

/// Shared conv encoder ending in a 512-dim pooled feature, with the
/// real/fake head plus rotation/translation/scaling heads, each a
/// (512 -> 128 -> K) two-layer MLP.
template <class T>
class Discriminator {
public:
    Discriminator(DiscriminatorConfig cfg, Direction dir, std::uint64_t seed)
        : cfg_(cfg), dir_(dir) {
        if (cfg.depth < 1 || cfg.base < 1)
            throw std::invalid_argument("Discriminator: depth and base must be >= 1");
        Rng rng(seed);
        auto reg_conv = [&](int co, int ci, int k, int stride, int pad) {
            auto w = nn_detail::make_conv_param<T>(co, ci, k, k, rng);
            auto b = nn_detail::make_bias_param<T>(co);
            params_.push_back(w);
            params_.push_back(b);
            return ConvLayer<T>{w, b, stride, pad};
        };
        auto reg_linear = [&](int m, int k) {
            auto w = nn_detail::make_linear_param<T>(m, k, rng);
            auto b = nn_detail::make_bias_param<T>(m);
            params_.push_back(w);
            params_.push_back(b);
            return LinearLayer<T>{w, b};
        };
        int ci = 1;
        for (int i = 0; i < cfg.depth; ++i) {
            const int co = cfg.base << i;
            convs_.push_back(reg_conv(co, ci, 3, 2, 1));
            ci = co;
        }
        proj_ = reg_conv(DiscriminatorConfig::feature_dim, ci, 1, 1, 0);
        head_d1_ = reg_linear(cfg.head_hidden, cfg.feature_dim);
        head_d2_ = reg_linear(1, cfg.head_hidden);
        head_r1_ = reg_linear(cfg.head_hidden, cfg.feature_dim);
        head_r2_ = reg_linear(4, cfg.head_hidden);
        head_t1_ = reg_linear(cfg.head_hidden, cfg.feature_dim);
        head_t2_ = reg_linear(4, cfg.head_hidden);
        head_s1_ = reg_linear(cfg.head_hidden, cfg.feature_dim);
        head_s2_ = reg_linear(3, cfg.head_hidden);
    }

    /// Encoder: convs -> 1x1 projection to 512 channels -> global average
    /// pooling. Output is [N, 512, 1, 1] for any valid input size.
    ad::VarPtr<T> encode(const ad::VarPtr<T>& x) const {
        const int div = 1 << cfg_.depth;
        if (x->val.h % div != 0 || x->val.w % div != 0)
            throw std::invalid_argument("Discriminator: spatial dims " + x->val.shape_str() +
                                        " must be divisible by 2^depth = " + std::to_string(div));
        constexpr T slope = T(0.2);
        auto z = x;
        for (const auto& conv : convs_) z = ad::leaky_relu(conv(z), slope);
        z = ad::leaky_relu(proj_(z), slope);
        return ad::global_avg_pool(z);
    }

    DiscHeadNodes<T> heads(const ad::VarPtr<T>& feat) const {
        if (feat->val.c != DiscriminatorConfig::feature_dim)
            throw std::invalid_argument("Discriminator heads: expected feature dim " +
                                        std::to_string(DiscriminatorConfig::feature_dim) +
                                        ", got " + std::to_string(feat->val.c));
        constexpr T slope = T(0.2);
        auto hidden = [&](const LinearLayer<T>& l) { return ad::leaky_relu(l(feat), slope); };
        return {ad::sigmoid(head_d2_(hidden(head_d1_))), head_r2_(hidden(head_r1_)),
                head_t2_(hidden(head_t1_)), head_s2_(hidden(head_s1_))};
    }

    Tensor<T> encode_values(const Tensor<T>& x) const {
        ad::NoGradGuard guard;
        return encode(ad::constant(x))->val;
    }

    /// Per-sample head outputs from a feature batch [N, 512, 1, 1].
    std::vector<HeadOutputs> heads_forward(const Tensor<T>& features) const {
        ad::NoGradGuard guard;
        auto out = heads(ad::constant(features));
        std::vector<HeadOutputs> result(features.n);
        for (int i = 0; i < features.n; ++i) {
            auto& r = result[i];
            r.realness = std::clamp(static_cast<double>(out.realness->val.at(i, 0, 0, 0)),
                                    kRealnessEps, 1.0 - kRealnessEps);
            for (int k = 0; k < 4; ++k) {
                r.rot_logits[k] = out.rot_logits->val.at(i, k, 0, 0);
                r.trans_logits[k] = out.trans_logits->val.at(i, k, 0, 0);
            }
            for (int k = 0; k < 3; ++k) r.scale_logits[k] = out.scale_logits->val.at(i, k, 0, 0);
        }
        return result;
    }

    const std::vector<ad::VarPtr<T>>& params() const { return params_; }
    Direction direction() const { return dir_; }
    const DiscriminatorConfig& config() const { return cfg_; }

    static long long param_count(int depth, int base) {
        long long total = 0;
        long long ci = 1;
        for (int i = 0; i < depth; ++i) {
            const long long co = static_cast<long long>(base) << i;
            total += 9 * ci * co + co;
            ci = co;
        }
        total += ci * 512 + 512; // 1x1 projection
        const long long mlp = [](long long out) { return 512LL * 128 + 128 + 128 * out + out; };
        total += mlp(1) + mlp(4) + mlp(4) + mlp(3);
        return total;
    }

private:
    DiscriminatorConfig cfg_;
    Direction dir_;
    std::vector<ConvLayer<T>> convs_;
    ConvLayer<T> proj_;
    LinearLayer<T> head_d1_, head_d2_, head_r1_, head_r2_, head_t1_, head_t2_, head_s1_, head_s2_;
    std::vector<ad::VarPtr<T>> params_;
};

// --- flat parameter views (FedAvg, DP and checkpointing work on these) ----

template <class T>
std::size_t parameter_count(const std::vector<ad::VarPtr<T>>& params) {
    std::size_t total = 0;
    for (const auto& p : params) total += p->val.size();
    return total;
}

template <class T>
std::vector<T> parameters_as_vector(const std::vector<ad::VarPtr<T>>& params) {
    std::vector<T> flat;
    flat.reserve(parameter_count(params));
    for (const auto& p : params) flat.insert(flat.end(), p->val.data.begin(), p->val.data.end());
    return flat;
}

template <class T>
void vector_to_parameters(std::span<const T> flat, const std::vector<ad::VarPtr<T>>& params) {
    if (flat.size() != parameter_count(params))
        throw std::invalid_argument("vector_to_parameters: expected " +
                                    std::to_string(parameter_count(params)) + " values, got " +
                                    std::to_string(flat.size()));
    std::size_t off = 0;
    for (const auto& p : params) {
        std::copy_n(flat.data() + off, p->val.size(), p->val.data.begin());
        off += p->val.size();
    }
}

template <class T>
std::vector<T> gradients_as_vector(const std::vector<ad::VarPtr<T>>& params) {
    std::vector<T> flat;
    flat.reserve(parameter_count(params));
    for (const auto& p : params) {
        p->ensure_grad();
        flat.insert(flat.end(), p->grad.data.begin(), p->grad.data.end());
    }
    return flat;
}

template <class T>
void zero_gradients(const std::vector<ad::VarPtr<T>>& params) {
    for (const auto& p : params) p->zero_grad();
}

} // namespace fedmed

#endif // FEDMED_NN_HPP
