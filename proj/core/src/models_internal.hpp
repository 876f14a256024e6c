#pragma once

// Shared between models.cpp (registry/handles) and models_backbones.cpp
// (architecture definitions). Not installed.

#include <memory>

#include "wastebench/models.hpp"
#include "wastebench/nn.hpp"

namespace wastebench::detail {

// A feature trunk: maps [B,3,224,224] to a pooled [B, width] vector.
class Backbone : public nn::Module {
public:
    virtual nn::NodeRef features(const nn::NodeRef& x, nn::ForwardCtx& ctx) = 0;
    virtual int feature_width() const = 0;
    // Stock dropout applied between the pooled features and the head.
    virtual double head_dropout() const { return 0.0; }

    nn::NodeRef forward(const nn::NodeRef& x, nn::ForwardCtx& ctx) override {
        return features(x, ctx);
    }
};

std::shared_ptr<Backbone> build_backbone(Architecture arch, CounterRng& rng);

}  // namespace wastebench::detail
