#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "wastebench/nn.hpp"

namespace wastebench {

enum class OptimizerKind { adamw, radam, ranger, rprop, sgd_warm_restarts };

const char* to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);  // UnknownOptimizer
std::vector<OptimizerKind> all_optimizer_kinds();

struct OptimizerSpec {
    OptimizerKind kind = OptimizerKind::adamw;
    // Kind-specific overrides; unset keys take the documented defaults:
    //   adamw:             beta1 0.9, beta2 0.999, eps 1e-8, weight_decay 0.01
    //   radam:             beta1 0.9, beta2 0.999, eps 1e-8, weight_decay 0
    //   ranger:            radam keys + lookahead_k 6, lookahead_alpha 0.5
    //   rprop:             eta_minus 0.5, eta_plus 1.2, step_min 1e-6, step_max 50
    //   sgd_warm_restarts: momentum 0.9, restart_period 10, period_mult 2, eta_min 0
    std::map<std::string, double> hyperparams;
};

// Updates every parameter that still requires grad; frozen parameters are
// skipped, so freezing composes with any optimizer.
class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual void step() = 0;
    void zero_grad();

    // Learning rate the next step() will use (schedules evolve it).
    virtual double current_lr() const { return lr_; }
    virtual std::string state_json() const;
    const std::string& id() const { return id_; }

protected:
    Optimizer(std::string id, std::vector<nn::ParamInfo> params, double lr)
        : id_(std::move(id)), params_(std::move(params)), lr_(lr) {}

    std::string id_;
    std::vector<nn::ParamInfo> params_;
    double lr_;
    std::int64_t steps_ = 0;
};

std::unique_ptr<Optimizer> build_optimizer(const OptimizerSpec& spec,
                                           const std::vector<nn::ParamInfo>& params,
                                           double learning_rate);

}  // namespace wastebench
