#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "wastebench/checkpoint.hpp"
#include "wastebench/errors.hpp"
#include "wastebench/models.hpp"
#include "wastebench/optim.hpp"
#include "wastebench/trainer.hpp"

using namespace wastebench;
using testsupport::random_tensor;

TEST_SUITE_BEGIN("models");

namespace {

nn::Tensor random_batch(int b, std::uint64_t seed) {
    CounterRng rng(seed);
    return random_tensor({b, 3, 224, 224}, rng, 1.5);
}

void check_logprob_contract(const nn::Tensor& out, double tol = 1e-5) {
    REQUIRE(out.rank() == 2);
    REQUIRE(out.dim(1) == 2);
    for (std::int64_t r = 0; r < out.dim(0); ++r) {
        double sum = 0;
        for (std::int64_t c = 0; c < 2; ++c) {
            CHECK(out[r * 2 + c] <= 0.0);
            sum += std::exp(out[r * 2 + c]);
        }
        CHECK(std::abs(sum - 1.0) <= tol);
    }
}

nn::NodeRef find_param(const ModelHandle& handle, const std::string& name) {
    for (const auto& p : handle.parameters())
        if (p.name == name) return p.node;
    return nullptr;
}

}  // namespace

TEST_CASE("toy_cnn: shape contract and parameter counts") {
    ModelHandle model = build_model({Architecture::toy_cnn});
    CHECK(model.parameter_count() > 0);
    CHECK(model.trainable_parameter_count() == model.parameter_count());
    CHECK(model.parameterized_layer_count() == 3);  // conv1, conv2, head
    nn::Tensor out = forward_logprobs(model, random_batch(3, 1));
    CHECK(out.shape() == nn::Shape{3, 2});
    check_logprob_contract(out);
}

TEST_CASE("registry: unknown architecture") {
    try {
        architecture_from_string("resnet999");
        FAIL_CHECK("expected UnknownArchitecture");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnknownArchitecture);
    }
}

TEST_CASE("forward_logprobs: batch independence in evaluation mode") {
    ModelHandle model = build_model({Architecture::toy_cnn}, {}, 3);
    nn::Tensor batch = random_batch(8, 2);
    nn::Tensor all = forward_logprobs(model, batch);
    // row 5 alone
    nn::Tensor single({1, 3, 224, 224});
    const std::int64_t stride = 3 * 224 * 224;
    std::copy(batch.data() + 5 * stride, batch.data() + 6 * stride, single.data());
    nn::Tensor one = forward_logprobs(model, single);
    CHECK(std::abs(one[0] - all[5 * 2 + 0]) <= 1e-5);
    CHECK(std::abs(one[1] - all[5 * 2 + 1]) <= 1e-5);
}

TEST_CASE("zero head weights give uniform log-probabilities") {
    ModelHandle model = build_model({Architecture::toy_cnn}, {}, 4);
    find_param(model, "head.weight")->value.zero();
    find_param(model, "head.bias")->value.zero();
    nn::Tensor out = forward_logprobs(model, random_batch(4, 3));
    for (std::int64_t i = 0; i < out.size(); ++i)
        CHECK(out[i] == doctest::Approx(std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("forward_logprobs: shape guard") {
    ModelHandle model = build_model({Architecture::toy_cnn});
    CHECK_THROWS_AS(forward_logprobs(model, nn::Tensor({2, 3, 128, 128})), Error);
}

TEST_CASE("freeze_prefix: counts, identity, bounds") {
    ModelSpec spec{Architecture::mobilenetv2_050};
    spec.frozen_prefix = 10;
    ModelHandle model = build_model(spec, {}, 5);
    CHECK(model.frozen_prefix() == 10);
    CHECK(model.trainable_parameter_count() < model.parameter_count());
    CHECK(model.trainable_parameter_count() > 0);

    freeze_prefix(model, 0);
    CHECK(model.trainable_parameter_count() == model.parameter_count());

    const int layers = model.parameterized_layer_count();
    freeze_prefix(model, layers);
    CHECK(model.trainable_parameter_count() == 0);
    try {
        freeze_prefix(model, layers + 1);
        FAIL_CHECK("expected PrefixOutOfRange");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::PrefixOutOfRange);
    }
    CHECK_THROWS_AS(freeze_prefix(model, -1), Error);
}

TEST_CASE("full freeze: an optimizer step changes nothing") {
    ModelHandle model = build_model({Architecture::toy_cnn}, {}, 6);
    freeze_prefix(model, model.parameterized_layer_count());
    std::vector<nn::Tensor> before;
    for (const auto& p : model.parameters()) before.push_back(p.node->value.clone());

    auto optimizer = build_optimizer({OptimizerKind::adamw, {}}, model.parameters(), 0.1);
    nn::ForwardCtx ctx;
    ctx.training = true;
    CounterRng rng(1);
    ctx.rng = &rng;
    nn::NodeRef out = model.forward(nn::make_constant(random_batch(2, 7)), ctx);
    // frozen everywhere: the graph records no gradients, loss is a constant
    nn::NodeRef loss = nll_loss(out, {0, 1}, Reduction::mean);
    if (loss->requires_grad) nn::backward(loss);
    optimizer->step();

    std::size_t i = 0;
    for (const auto& p : model.parameters()) {
        const nn::Tensor& old = before[i++];
        for (std::int64_t k = 0; k < old.size(); ++k) CHECK(p.node->value[k] == old[k]);
    }
}

TEST_CASE("describe lists every parameterized layer in canonical order") {
    ModelHandle model = build_model({Architecture::toy_cnn});
    const std::string text = describe(model);
    CHECK(text.find("[0] backbone.conv1") != std::string::npos);
    CHECK(text.find("[1] backbone.conv2") != std::string::npos);
    CHECK(text.find("[2] head") != std::string::npos);
}

TEST_CASE("parallel ensemble: fusion width, contract, structure") {
    ParallelEnsembleSpec spec;
    spec.backbone_a = {Architecture::toy_cnn};
    spec.backbone_b = {Architecture::toy_cnn};
    ModelHandle ensemble = build_parallel_ensemble(spec, {}, 8);

    // feature widths 8 + 8 -> fusion input 16
    nn::NodeRef fusion_w = find_param(ensemble, "fusion_fc.weight");
    REQUIRE(fusion_w);
    CHECK(fusion_w->value.shape() == nn::Shape{2, 16});

    nn::Tensor out = forward_logprobs(ensemble, random_batch(3, 9));
    check_logprob_contract(out);

    SUBCASE("zero fusion weights give uniform output") {
        find_param(ensemble, "fusion_fc.weight")->value.zero();
        find_param(ensemble, "fusion_fc.bias")->value.zero();
        nn::Tensor uniform = forward_logprobs(ensemble, random_batch(2, 10));
        for (std::int64_t i = 0; i < uniform.size(); ++i)
            CHECK(uniform[i] == doctest::Approx(std::log(0.5)).epsilon(1e-12));
    }

    SUBCASE("logit_concat width is 2 + 2") {
        ParallelEnsembleSpec ls = spec;
        ls.fusion_mode = FusionMode::logit_concat;
        ModelHandle logit_ensemble = build_parallel_ensemble(ls, {}, 8);
        CHECK(find_param(logit_ensemble, "fusion_fc.weight")->value.shape() == nn::Shape{2, 4});
        check_logprob_contract(forward_logprobs(logit_ensemble, random_batch(2, 11)));
    }
}

TEST_CASE("parallel ensemble: gradients reach both backbones and the fusion layer") {
    ParallelEnsembleSpec spec;
    spec.backbone_a = {Architecture::toy_cnn};
    spec.backbone_b = {Architecture::toy_cnn};
    ModelHandle ensemble = build_parallel_ensemble(spec, {}, 12);

    nn::ForwardCtx ctx;
    ctx.training = true;
    CounterRng rng(2);
    ctx.rng = &rng;
    nn::NodeRef out = ensemble.forward(nn::make_constant(random_batch(4, 13)), ctx);
    nn::NodeRef loss = nll_loss(out, {0, 1, 1, 0}, Reduction::mean);
    nn::backward(loss);

    auto grad_norm_under = [&](const std::string& prefix) {
        double norm = 0;
        for (const auto& p : ensemble.parameters()) {
            if (p.name.rfind(prefix, 0) != 0) continue;
            if (!p.node->grad.defined()) continue;
            for (std::int64_t i = 0; i < p.node->grad.size(); ++i)
                norm += p.node->grad[i] * p.node->grad[i];
        }
        return std::sqrt(norm);
    };
    CHECK(grad_norm_under("a.") > 0.0);
    CHECK(grad_norm_under("b.") > 0.0);
    CHECK(grad_norm_under("fusion_fc.") > 0.0);
}

TEST_CASE("parallel ensemble: fusion-layer gradient matches finite differences") {
    ParallelEnsembleSpec spec;
    spec.backbone_a = {Architecture::toy_cnn};
    spec.backbone_b = {Architecture::toy_cnn};
    ModelHandle ensemble = build_parallel_ensemble(spec, {}, 14);
    const nn::Tensor batch = random_batch(3, 15);
    const std::vector<int> labels{1, 0, 1};

    nn::NodeRef fusion_w = find_param(ensemble, "fusion_fc.weight");
    auto build_loss = [&]() {
        nn::ForwardCtx ctx;  // eval-mode forward: deterministic, no dropout
        return nll_loss(ensemble.forward(nn::make_constant(batch), ctx), labels, Reduction::mean);
    };
    std::vector<std::string> failures;
    testsupport::check_gradients({fusion_w}, build_loss, 1e-3, 10, &failures);
    for (const auto& f : failures) FAIL_CHECK(f.c_str());
    CHECK(failures.empty());
}

TEST_CASE("ensemble output is not the average of standalone heads") {
    // constructed counterexample: standalone heads produce a non-uniform
    // average while a zero-weight fusion layer pins the ensemble at uniform
    ModelHandle a = build_model({Architecture::toy_cnn}, {}, 20);
    ModelHandle b = build_model({Architecture::toy_cnn}, {}, 21);
    ParallelEnsembleSpec spec;
    spec.backbone_a = {Architecture::toy_cnn};
    spec.backbone_b = {Architecture::toy_cnn};
    ModelHandle ensemble = build_parallel_ensemble(spec, {}, 22);
    find_param(ensemble, "fusion_fc.weight")->value.zero();
    find_param(ensemble, "fusion_fc.bias")->value.zero();

    const nn::Tensor batch = random_batch(1, 23);
    const nn::Tensor pa = forward_logprobs(a, batch);
    const nn::Tensor pb = forward_logprobs(b, batch);
    const nn::Tensor pe = forward_logprobs(ensemble, batch);
    const double mean_prob_pos = 0.5 * (std::exp(pa[1]) + std::exp(pb[1]));
    CHECK(std::abs(std::exp(pe[1]) - mean_prob_pos) > 1e-6);
}

TEST_CASE("pretrained weights: registry misses and round trip") {
    SUBCASE("no registry configured") {
        ModelSpec spec{Architecture::toy_cnn};
        spec.pretrained = true;
        try {
            build_model(spec, {}, 1);
            FAIL_CHECK("expected WeightsUnavailable");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::WeightsUnavailable);
        }
    }
    SUBCASE("registry dir without the architecture entry") {
        testsupport::TempDir dir("reg");
        ModelSpec spec{Architecture::toy_cnn};
        spec.pretrained = true;
        try {
            build_model(spec, {dir.path()}, 1);
            FAIL_CHECK("expected WeightsUnavailable");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::WeightsUnavailable);
            CHECK(std::string(e.what()).find("toy_cnn") != std::string::npos);
        }
    }
    SUBCASE("save_weights archives load back into a pretrained build") {
        testsupport::TempDir dir("reg2");
        ModelHandle donor = build_model({Architecture::toy_cnn}, {}, 33);
        save_weights(donor, dir.path() / "toy_cnn.wbw");
        ModelSpec spec{Architecture::toy_cnn};
        spec.pretrained = true;
        ModelHandle loaded = build_model(spec, {dir.path()}, 999);  // different init seed
        nn::NodeRef donor_conv = find_param(donor, "backbone.conv1.weight");
        nn::NodeRef loaded_conv = find_param(loaded, "backbone.conv1.weight");
        for (std::int64_t i = 0; i < donor_conv->value.size(); ++i)
            CHECK(donor_conv->value[i] == loaded_conv->value[i]);
    }
}

TEST_CASE("checkpoint: save/load/restore reproduces the forward pass exactly") {
    testsupport::TempDir dir("ckpt");
    ModelHandle model = build_model({Architecture::toy_cnn}, {}, 44);
    const nn::Tensor batch = random_batch(2, 45);
    const nn::Tensor before = forward_logprobs(model, batch);

    Checkpoint checkpoint = make_checkpoint(model, R"({"note": "unit"})");
    save_checkpoint(checkpoint, dir.path() / "m.wbck");
    Checkpoint loaded = load_checkpoint(dir.path() / "m.wbck");
    CHECK(loaded.model_spec_json == checkpoint.model_spec_json);

    ModelHandle restored = restore_model(loaded);
    const nn::Tensor after = forward_logprobs(restored, batch);
    for (std::int64_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("every registered architecture builds and honors the output contract") {
    // structural pass over the full registry; one tiny batch each
    const Architecture all[] = {
        Architecture::toy_cnn,          Architecture::mobilenetv2_050,
        Architecture::mobilenetv2_100,  Architecture::squeezenet1_0,
        Architecture::googlenet,        Architecture::densenet121,
        Architecture::mobilevit_xs,     Architecture::vit_tiny_r_s16_p8_224,
    };
    const nn::Tensor batch = random_batch(1, 50);
    for (Architecture arch : all) {
        CAPTURE(to_string(arch));
        ModelHandle model = build_model({arch}, {}, 51);
        CHECK(model.parameter_count() > 0);
        CHECK(model.parameterized_layer_count() >= 3);
        nn::Tensor out = forward_logprobs(model, batch);
        check_logprob_contract(out);
    }
}

TEST_CASE("the mobilevit_xs + vit_tiny ensemble builds with the expected fusion width") {
    ParallelEnsembleSpec spec;  // defaults to the published pairing
    ModelHandle ensemble = build_parallel_ensemble(spec, {}, 70);
    // feature widths 384 (mobilevit_xs) + 192 (vit_tiny)
    nn::NodeRef fusion_w = find_param(ensemble, "fusion_fc.weight");
    REQUIRE(fusion_w);
    CHECK(fusion_w->value.shape() == nn::Shape{2, 576});
    CHECK(ensemble.parameter_count() > 5'000'000);
    CHECK(ensemble.name() == "parallel_ensemble_mobilevit_xs_vit_tiny_r_s16_p8_224");
    check_logprob_contract(forward_logprobs(ensemble, random_batch(1, 71)));
}

TEST_CASE("parameter budgets stay near the published scale") {
    // trunk-only sanity bounds (the binary head replaces the 1000-class one):
    // 0.5-width trunk ~0.7M, 1.0-width trunk ~2.2M
    ModelHandle half = build_model({Architecture::mobilenetv2_050}, {}, 60);
    ModelHandle full = build_model({Architecture::mobilenetv2_100}, {}, 60);
    CHECK(half.parameter_count() > 500'000);
    CHECK(half.parameter_count() < 1'200'000);
    CHECK(full.parameter_count() > half.parameter_count());
    CHECK(full.parameter_count() > 1'500'000);
    CHECK(full.parameter_count() < 3'500'000);
}

TEST_SUITE_END();
