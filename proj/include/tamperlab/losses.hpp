#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>

#include "tamperlab/error.hpp"
#include "tamperlab/raster.hpp"

namespace tamperlab {

template <typename Scalar>
using Vec = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowMatrix = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Loss value and its gradient w.r.t. the differentiated input, flattened
/// row-major when that input is 2-D.
template <typename Scalar>
struct LossOutput {
    Scalar value = 0;
    Vec<Scalar> gradient;
};

inline constexpr double kProbClamp = 1e-7;
inline constexpr double kDiceEpsilon = 1e-6;

namespace detail {

template <typename Derived>
Vec<typename Derived::Scalar> flatten(const Eigen::DenseBase<Derived>& a)
{
    using Scalar = typename Derived::Scalar;
    RowMatrix<Scalar> m = a;
    return Eigen::Map<const Vec<Scalar>>(m.data(), m.size());
}

// log(1 + exp(x)) without overflow
template <typename Scalar>
Scalar softplus(Scalar x)
{
    return std::max(x, Scalar(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename Scalar>
Scalar sigmoid(Scalar x)
{
    if (x >= 0)
        return Scalar(1) / (Scalar(1) + std::exp(-x));
    const Scalar e = std::exp(x);
    return e / (Scalar(1) + e);
}

} // namespace detail

/// Element-wise logistic function, e.g. logit map S -> probabilities.
template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& logits)
{
    using Scalar = typename Derived::Scalar;
    return logits.unaryExpr([](Scalar v) { return detail::sigmoid(v); }).eval();
}

/// Multi-label sigmoid cross-entropy averaged over classes; gradient w.r.t. logits.
template <typename Scalar>
LossOutput<Scalar> loss_sem(const Vec<Scalar>& logits, const Vec<Scalar>& targets)
{
    if (logits.size() != targets.size() || logits.size() == 0)
        throw Error(Errc::shape_mismatch, "semantic logits and targets differ in length");
    const auto n = static_cast<Scalar>(logits.size());
    // -[y log s(z) + (1-y) log(1-s(z))] = softplus(z) - y z
    Scalar total = 0;
    for (Index i = 0; i < logits.size(); ++i)
        total += detail::softplus(logits(i)) - targets(i) * logits(i);
    return {total / n, (sigmoid(logits) - targets) / n};
}

/// Pixel-mean binary cross-entropy of probabilities against a binary label;
/// gradient w.r.t. the (clamped) probabilities, zero where clamping is active.
template <typename Scalar>
LossOutput<Scalar> loss_bce_pixel(const Plane<Scalar>& prob, const BinaryLabel& label)
{
    if (!same_shape(prob, label) || prob.size() == 0)
        throw Error(Errc::shape_mismatch, "probability map and label differ in size");
    const Scalar lo = Scalar(kProbClamp), hi = Scalar(1) - Scalar(kProbClamp);
    const auto n = static_cast<Scalar>(prob.size());
    const Plane<Scalar> y = label.template cast<Scalar>();
    const Plane<Scalar> p = prob.max(lo).min(hi);
    const Scalar value = -(y * p.log() + (Scalar(1) - y) * (Scalar(1) - p).log()).sum() / n;
    Plane<Scalar> grad = (-y / p + (Scalar(1) - y) / (Scalar(1) - p)) / n;
    grad = (prob < lo || prob > hi).select(Plane<Scalar>::Zero(prob.rows(), prob.cols()), grad);
    return {value, detail::flatten(grad)};
}

/// 1 - (2 sum(p m) + eps) / (sum p + sum m + eps); gradient w.r.t. probabilities.
template <typename Scalar>
LossOutput<Scalar> loss_dice(const Plane<Scalar>& prob, const BinaryLabel& label,
                             Scalar eps = Scalar(kDiceEpsilon))
{
    if (!same_shape(prob, label))
        throw Error(Errc::shape_mismatch, "probability map and label differ in size");
    if (!(eps > 0))
        throw Error(Errc::invalid_argument, "dice epsilon must be positive");
    const Plane<Scalar> m = label.template cast<Scalar>();
    const Scalar inter = (prob * m).sum();
    const Scalar num = Scalar(2) * inter + eps;
    const Scalar den = prob.sum() + m.sum() + eps;
    const Plane<Scalar> grad = -(Scalar(2) * m * den - num) / (den * den);
    return {Scalar(1) - num / den, detail::flatten(grad)};
}

/// Two-way softmax cross-entropy against a one-hot target; gradient w.r.t. logits.
template <typename Scalar>
LossOutput<Scalar> loss_cls(const Vec<Scalar>& logits, const Vec<Scalar>& onehot)
{
    if (logits.size() != 2 || onehot.size() != 2)
        throw Error(Errc::shape_mismatch, "global detection head expects 2 logits");
    if (!((onehot == Scalar(0)) || (onehot == Scalar(1))).all() || onehot.sum() != Scalar(1))
        throw Error(Errc::invalid_argument, "target is not one-hot");
    const Scalar mx = logits.maxCoeff();
    const Scalar lse = mx + std::log((logits - mx).exp().sum());
    const Vec<Scalar> logp = logits - lse;
    return {-(onehot * logp).sum(), logp.exp() - onehot};
}

/// Summed token negative log-likelihood over an L x V logit matrix;
/// gradient w.r.t. the logits, row-major.
template <typename Scalar>
LossOutput<Scalar> loss_text(const RowMatrix<Scalar>& token_logits,
                             std::span<const std::int64_t> target_ids)
{
    if (token_logits.rows() != static_cast<Index>(target_ids.size()))
        throw Error(Errc::shape_mismatch, "one target id per logit row required");
    RowMatrix<Scalar> grad(token_logits.rows(), token_logits.cols());
    Scalar total = 0;
    for (Index i = 0; i < token_logits.rows(); ++i) {
        const auto t = target_ids[static_cast<std::size_t>(i)];
        if (t < 0 || t >= token_logits.cols())
            throw Error(Errc::index_out_of_range,
                        "target id " + std::to_string(t) + " outside vocabulary");
        const auto row = token_logits.row(i);
        const Scalar mx = row.maxCoeff();
        const Scalar lse = mx + std::log((row - mx).exp().sum());
        total += lse - row(t);
        grad.row(i) = (row - lse).exp();
        grad(i, t) -= Scalar(1);
    }
    return {total, detail::flatten(grad)};
}

struct LossWeights {
    double sem = 0.5;
    double bce = 1.0;
    double dice = 1.0;
    double text = 3.0;
    double cls = 1.0;

    void validate() const
    {
        if (!(sem > 0 && bce > 0 && dice > 0 && text > 0 && cls > 0))
            throw Error(Errc::invalid_argument, "loss weights must be strictly positive");
    }
};

struct LossParts {
    double sem = 0;
    double bce = 0;
    double dice = 0;
    double text = 0;
    double cls = 0;
};

inline double loss_total(const LossParts& parts, const LossWeights& w = {})
{
    w.validate();
    return w.sem * parts.sem + w.bce * parts.bce + w.dice * parts.dice + w.text * parts.text
           + w.cls * parts.cls;
}

} // namespace tamperlab
