#include "wastebench/optim.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <set>

#include "wastebench/errors.hpp"

namespace wastebench {

using nlohmann::json;
using nn::Scalar;
using nn::Tensor;

const char* to_string(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::adamw: return "adamw";
        case OptimizerKind::radam: return "radam";
        case OptimizerKind::ranger: return "ranger";
        case OptimizerKind::rprop: return "rprop";
        case OptimizerKind::sgd_warm_restarts: return "sgd_warm_restarts";
    }
    return "unknown";
}

OptimizerKind optimizer_kind_from_string(const std::string& name) {
    if (name == "adamw") return OptimizerKind::adamw;
    if (name == "radam") return OptimizerKind::radam;
    if (name == "ranger") return OptimizerKind::ranger;
    if (name == "rprop") return OptimizerKind::rprop;
    if (name == "sgd_warm_restarts") return OptimizerKind::sgd_warm_restarts;
    fail(ErrorCode::UnknownOptimizer,
         "unknown optimizer '" + name + "' (expected adamw|radam|ranger|rprop|sgd_warm_restarts)");
}

std::vector<OptimizerKind> all_optimizer_kinds() {
    return {OptimizerKind::adamw, OptimizerKind::radam, OptimizerKind::ranger,
            OptimizerKind::rprop, OptimizerKind::sgd_warm_restarts};
}

void Optimizer::zero_grad() {
    for (auto& p : params_)
        if (p.node->grad.defined()) p.node->grad.zero();
}

std::string Optimizer::state_json() const {
    json j;
    j["kind"] = id_;
    j["steps"] = steps_;
    j["lr"] = lr_;
    return j.dump();
}

namespace {

class Hyper {
public:
    Hyper(const OptimizerSpec& spec, std::map<std::string, double> defaults)
        : values_(std::move(defaults)) {
        for (const auto& [key, value] : spec.hyperparams) {
            auto it = values_.find(key);
            if (it == values_.end())
                fail(ErrorCode::InvalidConfig,
                     std::string("optimizer ") + to_string(spec.kind) +
                         " does not take hyperparam '" + key + "'");
            it->second = value;
        }
    }
    double get(const std::string& key) const { return values_.at(key); }
    double require_positive(const std::string& key) const {
        const double v = values_.at(key);
        if (!(v > 0.0))
            fail(ErrorCode::MissingHyperparam, "hyperparam '" + key + "' must be > 0");
        return v;
    }

private:
    std::map<std::string, double> values_;
};

// Per-parameter first/second moment state, lazily sized.
struct Moments {
    std::vector<Tensor> m, v;
    void ensure(const std::vector<nn::ParamInfo>& params) {
        if (!m.empty()) return;
        for (const auto& p : params) {
            m.push_back(Tensor::zeros(p.node->value.shape()));
            v.push_back(Tensor::zeros(p.node->value.shape()));
        }
    }
};

class AdamW : public Optimizer {
public:
    AdamW(std::vector<nn::ParamInfo> params, double lr, const Hyper& h)
        : Optimizer("adamw", std::move(params), lr),
          beta1_(h.get("beta1")),
          beta2_(h.get("beta2")),
          eps_(h.require_positive("eps")),
          weight_decay_(h.get("weight_decay")) {}

    void step() override {
        state_.ensure(params_);
        ++steps_;
        const Scalar bc1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
        const Scalar bc2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            nn::Node& p = *params_[i].node;
            if (!p.requires_grad || !p.grad.defined()) continue;
            Scalar* w = p.value.data();
            const Scalar* g = p.grad.data();
            Scalar* m = state_.m[i].data();
            Scalar* v = state_.v[i].data();
            for (std::int64_t k = 0; k < p.value.size(); ++k) {
                m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
                v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
                w[k] -= lr_ * weight_decay_ * w[k];
                w[k] -= lr_ * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + eps_);
            }
        }
    }

private:
    Scalar beta1_, beta2_, eps_, weight_decay_;
    Moments state_;
};

class RAdam : public Optimizer {
public:
    RAdam(std::string id, std::vector<nn::ParamInfo> params, double lr, const Hyper& h)
        : Optimizer(std::move(id), std::move(params), lr),
          beta1_(h.get("beta1")),
          beta2_(h.get("beta2")),
          eps_(h.require_positive("eps")),
          weight_decay_(h.get("weight_decay")) {}

    void step() override {
        state_.ensure(params_);
        ++steps_;
        const double t = static_cast<double>(steps_);
        const Scalar bc1 = 1.0 - std::pow(beta1_, t);
        const Scalar b2t = std::pow(beta2_, t);
        const Scalar bc2 = 1.0 - b2t;
        const Scalar rho_inf = 2.0 / (1.0 - beta2_) - 1.0;
        const Scalar rho_t = rho_inf - 2.0 * t * b2t / bc2;
        // variance rectification kicks in once enough second-moment
        // evidence has accumulated; before that the update is SGD-with-momentum
        const bool rectified = rho_t > 5.0;
        Scalar rect = 1.0;
        if (rectified)
            rect = std::sqrt(((rho_t - 4.0) * (rho_t - 2.0) * rho_inf) /
                             ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            nn::Node& p = *params_[i].node;
            if (!p.requires_grad || !p.grad.defined()) continue;
            Scalar* w = p.value.data();
            const Scalar* g = p.grad.data();
            Scalar* m = state_.m[i].data();
            Scalar* v = state_.v[i].data();
            for (std::int64_t k = 0; k < p.value.size(); ++k) {
                m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
                v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
                if (weight_decay_ != 0.0) w[k] -= lr_ * weight_decay_ * w[k];
                const Scalar mhat = m[k] / bc1;
                if (rectified)
                    w[k] -= lr_ * rect * mhat / (std::sqrt(v[k] / bc2) + eps_);
                else
                    w[k] -= lr_ * mhat;
            }
        }
    }

private:
    Scalar beta1_, beta2_, eps_, weight_decay_;
    Moments state_;
};

// Ranger: RAdam fast weights + Lookahead slow weights (sync every k steps).
class Ranger : public RAdam {
public:
    Ranger(std::vector<nn::ParamInfo> params, double lr, const Hyper& h)
        : RAdam("ranger", std::move(params), lr, h),
          k_(static_cast<std::int64_t>(h.require_positive("lookahead_k"))),
          alpha_(h.get("lookahead_alpha")) {
        if (!(alpha_ > 0.0 && alpha_ <= 1.0))
            fail(ErrorCode::MissingHyperparam, "lookahead_alpha must lie in (0,1]");
    }

    void step() override {
        if (slow_.empty())
            for (const auto& p : params_) slow_.push_back(p.node->value.clone());
        RAdam::step();
        if (steps_ % k_ != 0) return;
        for (std::size_t i = 0; i < params_.size(); ++i) {
            nn::Node& p = *params_[i].node;
            if (!p.requires_grad) continue;
            Scalar* fast = p.value.data();
            Scalar* slow = slow_[i].data();
            for (std::int64_t k = 0; k < p.value.size(); ++k) {
                slow[k] += alpha_ * (fast[k] - slow[k]);
                fast[k] = slow[k];
            }
        }
    }

private:
    std::int64_t k_;
    Scalar alpha_;
    std::vector<Tensor> slow_;
};

class Rprop : public Optimizer {
public:
    Rprop(std::vector<nn::ParamInfo> params, double lr, const Hyper& h)
        : Optimizer("rprop", std::move(params), lr),
          eta_minus_(h.get("eta_minus")),
          eta_plus_(h.get("eta_plus")),
          step_min_(h.require_positive("step_min")),
          step_max_(h.require_positive("step_max")) {
        if (!(eta_minus_ > 0.0 && eta_minus_ < 1.0 && eta_plus_ > 1.0))
            fail(ErrorCode::MissingHyperparam, "rprop needs 0 < eta_minus < 1 < eta_plus");
    }

    void step() override {
        if (step_sizes_.empty()) {
            for (const auto& p : params_) {
                step_sizes_.push_back(Tensor::full(p.node->value.shape(), lr_));
                prev_grad_.push_back(Tensor::zeros(p.node->value.shape()));
            }
        }
        ++steps_;
        for (std::size_t i = 0; i < params_.size(); ++i) {
            nn::Node& p = *params_[i].node;
            if (!p.requires_grad || !p.grad.defined()) continue;
            Scalar* w = p.value.data();
            const Scalar* g = p.grad.data();
            Scalar* stepv = step_sizes_[i].data();
            Scalar* prev = prev_grad_[i].data();
            for (std::int64_t k = 0; k < p.value.size(); ++k) {
                Scalar gk = g[k];
                const Scalar sign = gk * prev[k];
                if (sign > 0.0)
                    stepv[k] = std::min(stepv[k] * eta_plus_, step_max_);
                else if (sign < 0.0) {
                    stepv[k] = std::max(stepv[k] * eta_minus_, step_min_);
                    gk = 0.0;  // skip the update after a sign change
                }
                w[k] -= (gk > 0.0 ? 1.0 : (gk < 0.0 ? -1.0 : 0.0)) * stepv[k];
                prev[k] = gk;
            }
        }
    }

private:
    Scalar eta_minus_, eta_plus_, step_min_, step_max_;
    std::vector<Tensor> step_sizes_, prev_grad_;
};

// SGD with momentum under a cosine-annealing schedule that restarts at its
// peak every T_i steps, with the period multiplied after each restart.
class SgdWarmRestarts : public Optimizer {
public:
    SgdWarmRestarts(std::vector<nn::ParamInfo> params, double lr, const Hyper& h)
        : Optimizer("sgd_warm_restarts", std::move(params), lr),
          momentum_(h.get("momentum")),
          eta_min_(h.get("eta_min")),
          period_(static_cast<std::int64_t>(h.require_positive("restart_period"))),
          period_mult_(static_cast<std::int64_t>(h.require_positive("period_mult"))) {}

    double current_lr() const override {
        return eta_min_ + 0.5 * (lr_ - eta_min_) *
                              (1.0 + std::cos(M_PI * static_cast<double>(cycle_step_) /
                                              static_cast<double>(period_)));
    }

    void step() override {
        if (velocity_.empty())
            for (const auto& p : params_) velocity_.push_back(Tensor::zeros(p.node->value.shape()));
        const double lr_t = current_lr();
        ++steps_;
        for (std::size_t i = 0; i < params_.size(); ++i) {
            nn::Node& p = *params_[i].node;
            if (!p.requires_grad || !p.grad.defined()) continue;
            Scalar* w = p.value.data();
            const Scalar* g = p.grad.data();
            Scalar* v = velocity_[i].data();
            for (std::int64_t k = 0; k < p.value.size(); ++k) {
                v[k] = momentum_ * v[k] + g[k];
                w[k] -= lr_t * v[k];
            }
        }
        if (++cycle_step_ >= period_) {
            cycle_step_ = 0;
            period_ *= period_mult_;
        }
    }

private:
    Scalar momentum_, eta_min_;
    std::int64_t period_, period_mult_;
    std::int64_t cycle_step_ = 0;
    std::vector<Tensor> velocity_;
};

}  // namespace

std::unique_ptr<Optimizer> build_optimizer(const OptimizerSpec& spec,
                                           const std::vector<nn::ParamInfo>& params,
                                           double learning_rate) {
    if (!(learning_rate > 0.0))
        fail(ErrorCode::MissingHyperparam, "learning_rate must be > 0");
    switch (spec.kind) {
        case OptimizerKind::adamw: {
            Hyper h(spec, {{"beta1", 0.9}, {"beta2", 0.999}, {"eps", 1e-8}, {"weight_decay", 0.01}});
            return std::make_unique<AdamW>(params, learning_rate, h);
        }
        case OptimizerKind::radam: {
            Hyper h(spec, {{"beta1", 0.9}, {"beta2", 0.999}, {"eps", 1e-8}, {"weight_decay", 0.0}});
            return std::make_unique<RAdam>("radam", params, learning_rate, h);
        }
        case OptimizerKind::ranger: {
            Hyper h(spec, {{"beta1", 0.9},
                           {"beta2", 0.999},
                           {"eps", 1e-8},
                           {"weight_decay", 0.0},
                           {"lookahead_k", 6},
                           {"lookahead_alpha", 0.5}});
            return std::make_unique<Ranger>(params, learning_rate, h);
        }
        case OptimizerKind::rprop: {
            Hyper h(spec, {{"eta_minus", 0.5}, {"eta_plus", 1.2}, {"step_min", 1e-6},
                           {"step_max", 50.0}});
            return std::make_unique<Rprop>(params, learning_rate, h);
        }
        case OptimizerKind::sgd_warm_restarts: {
            Hyper h(spec, {{"momentum", 0.9}, {"eta_min", 0.0}, {"restart_period", 10},
                           {"period_mult", 2}});
            return std::make_unique<SgdWarmRestarts>(params, learning_rate, h);
        }
    }
    fail(ErrorCode::UnknownOptimizer, "unhandled optimizer kind");
}

}  // namespace wastebench
