#include <doctest.h>

#include <cmath>
#include <fstream>

#include "test_support.hpp"
#include "wastebench/errors.hpp"
#include "wastebench/toydata.hpp"
#include "wastebench/trainer.hpp"

using namespace wastebench;
using testsupport::TempDir;

TEST_SUITE_BEGIN("trainer");

namespace {

// desk-scale training configuration for the synthetic dataset
TrainConfig toy_config(std::uint64_t seed = 7) {
    TrainConfig config;
    config.batch_size = 16;
    config.learning_rate = 1e-2;  // published 1e-4 scaled up for 5-epoch desk runs
    config.max_epochs = 5;
    config.patience = 5;
    config.global_seed = seed;
    config.normalization = {{0.5, 0.5, 0.5}, {0.25, 0.25, 0.25}};
    config.online_augmentation = OnlineAugmentation::off;
    return config;
}

struct ToyWorld {
    TempDir dir{"trainer"};
    ImageFolderDataset train, val;

    explicit ToyWorld(int count = 32, std::uint64_t seed = 3) {
        ToyDatasetOptions options;
        options.count = count;
        options.seed = seed;
        DatasetManifest manifest = make_toy_dataset(dir.path(), options);
        // use the same separable set for train and validation
        std::vector<DatasetItem> items;
        for (const auto& r : manifest.records())
            items.push_back({r.image_id + ".png", r.image_id, dir.path() / r.path, r.label});
        train = ImageFolderDataset(items);
        val = ImageFolderDataset(items);
    }
};

}  // namespace

TEST_CASE("nll_loss: hand-computed values") {
    // single sample, P(correct) = 1
    nn::Tensor certain({1, 2});
    certain[0] = 0.0;                 // log 1
    certain[1] = -50.0;
    nn::NodeRef lp = nn::make_constant(certain);
    CHECK(nll_loss(lp, {0}, Reduction::sum)->value[0] == doctest::Approx(0.0));

    // single sample, logprob of the correct class is -2
    nn::Tensor two({1, 2});
    two[0] = -2.0;
    two[1] = std::log(1.0 - std::exp(-2.0));
    CHECK(nll_loss(nn::make_constant(two), {0}, Reduction::sum)->value[0] ==
          doctest::Approx(2.0).epsilon(1e-12));

    // batch with correct-class probabilities {0.5, 0.25}
    nn::Tensor batch({2, 2});
    batch[0] = std::log(0.5);
    batch[1] = std::log(0.5);
    batch[2] = std::log(0.75);
    batch[3] = std::log(0.25);
    nn::NodeRef node = nn::make_constant(batch);
    CHECK(nll_loss(node, {0, 1}, Reduction::sum)->value[0] ==
          doctest::Approx(2.079442).epsilon(1e-6));
    CHECK(nll_loss(node, {0, 1}, Reduction::mean)->value[0] ==
          doctest::Approx(1.039721).epsilon(1e-6));
}

TEST_CASE("nll_loss: gradient equals (softmax - onehot)/B through log-softmax") {
    CounterRng rng(17);
    nn::Tensor logits_t = testsupport::random_tensor({4, 2}, rng, 2.0);
    nn::NodeRef logits = nn::make_leaf(logits_t, true);
    const std::vector<int> labels{1, 0, 1, 1};

    nn::NodeRef loss = nll_loss(nn::log_softmax_lastdim(logits), labels, Reduction::mean);
    nn::backward(loss);

    for (int i = 0; i < 4; ++i) {
        const double a = logits->value[i * 2], b = logits->value[i * 2 + 1];
        const double m = std::max(a, b);
        const double za = std::exp(a - m), zb = std::exp(b - m);
        const double sa = za / (za + zb), sb = zb / (za + zb);
        const double expected0 = (sa - (labels[i] == 0 ? 1.0 : 0.0)) / 4.0;
        const double expected1 = (sb - (labels[i] == 1 ? 1.0 : 0.0)) / 4.0;
        CHECK(logits->grad[i * 2] == doctest::Approx(expected0).epsilon(1e-9));
        CHECK(logits->grad[i * 2 + 1] == doctest::Approx(expected1).epsilon(1e-9));
    }

    // central finite differences on the same composition
    std::vector<std::string> failures;
    nn::NodeRef fresh = nn::make_leaf(logits_t.clone(), true);
    testsupport::check_gradients(
        {fresh},
        [&]() { return nll_loss(nn::log_softmax_lastdim(fresh), labels, Reduction::mean); },
        1e-4, 8, &failures);
    for (const auto& f : failures) FAIL_CHECK(f.c_str());
}

TEST_CASE("nll_loss: guards") {
    nn::NodeRef lp = nn::make_constant(nn::Tensor::zeros({2, 2}));
    CHECK_THROWS_AS(nll_loss(lp, {0}, Reduction::mean), Error);
    try {
        nll_loss(lp, {0, 2}, Reduction::mean);
        FAIL_CHECK("expected LabelOutOfRange");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::LabelOutOfRange);
    }
}

TEST_CASE("train: separable toy dataset fits within five epochs") {
    ToyWorld world(32);
    ModelHandle model = build_model({Architecture::toy_cnn}, {}, 7);
    TrainResult result = train(model, world.train, world.val, toy_config());
    REQUIRE_FALSE(result.history.empty());
    CHECK(result.history.back().validation_accuracy >= 0.95);
    CHECK(result.best_epoch >= 1);
    // history CSV shape
    const std::string csv = history_to_csv(result.history);
    CHECK(csv.rfind("epoch,train_loss,val_loss,val_accuracy\n", 0) == 0);
}

TEST_CASE("train: determinism across runs and worker counts") {
    ToyWorld world(16);
    auto run = [&](int workers) {
        ModelHandle model = build_model({Architecture::toy_cnn}, {}, 11);
        TrainConfig config = toy_config(11);
        config.max_epochs = 3;
        config.patience = 3;
        config.workers = workers;
        TrainResult result = train(model, world.train, world.val, config);
        return history_to_csv(result.history) +
               predictions_to_csv(predict(model, world.val, config.normalization, {}, 8, workers));
    };
    const std::string a = run(1);
    const std::string b = run(1);
    const std::string c = run(3);
    CHECK(a == b);
    CHECK(a == c);
}

TEST_CASE("train: full freeze pins every parameter bit-identically") {
    ToyWorld world(8);
    ModelHandle model = build_model({Architecture::toy_cnn}, {}, 13);
    freeze_prefix(model, model.parameterized_layer_count());
    std::vector<nn::Tensor> before;
    for (const auto& p : model.parameters()) before.push_back(p.node->value.clone());

    TrainConfig config = toy_config(13);
    config.max_epochs = 2;
    config.patience = 2;
    train(model, world.train, world.val, config);

    std::size_t i = 0;
    for (const auto& p : model.parameters()) {
        const nn::Tensor& old = before[i++];
        for (std::int64_t k = 0; k < old.size(); ++k) CHECK(p.node->value[k] == old[k]);
    }
}

TEST_CASE("train: early stopping halts at best_epoch + patience") {
    ToyWorld world(8);
    // fully frozen model: validation loss is constant, epoch 1 is best
    ModelHandle model = build_model({Architecture::toy_cnn}, {}, 17);
    freeze_prefix(model, model.parameterized_layer_count());
    TrainConfig config = toy_config(17);
    config.max_epochs = 10;
    config.patience = 2;
    TrainResult result = train(model, world.train, world.val, config);
    CHECK(result.best_epoch == 1);
    CHECK(result.epochs_run == 3);  // 1 + patience
    CHECK(result.history.size() == 3);
}

TEST_CASE("train: early stopping bound holds when training improves") {
    ToyWorld world(16);
    ModelHandle model = build_model({Architecture::toy_cnn}, {}, 19);
    TrainConfig config = toy_config(19);
    config.max_epochs = 12;
    config.patience = 2;
    TrainResult result = train(model, world.train, world.val, config);
    CHECK(result.epochs_run <= result.best_epoch + config.patience);
}

TEST_CASE("train: max_epochs = 0 returns the initial model with empty history") {
    ToyWorld world(8);
    ModelHandle model = build_model({Architecture::toy_cnn}, {}, 23);
    CounterRng rng(1);
    const nn::Tensor probe = testsupport::random_tensor({1, 3, 224, 224}, rng);
    const nn::Tensor before = forward_logprobs(model, probe);
    TrainConfig config = toy_config(23);
    config.max_epochs = 0;
    config.patience = 0;
    TrainResult result = train(model, world.train, world.val, config);
    CHECK(result.history.empty());
    CHECK(result.epochs_run == 0);
    CHECK(result.best_epoch == 0);
    const nn::Tensor after = forward_logprobs(model, probe);
    for (std::int64_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("train: empty datasets are rejected") {
    ToyWorld world(8);
    ModelHandle model = build_model({Architecture::toy_cnn}, {}, 29);
    ImageFolderDataset empty;
    CHECK_THROWS_AS(train(model, empty, world.val, toy_config()), Error);
    CHECK_THROWS_AS(train(model, world.train, empty, toy_config()), Error);
}

TEST_CASE("config validation") {
    TrainConfig config = toy_config();
    config.batch_size = 0;
    CHECK_THROWS_AS(config.validate(), Error);
    config = toy_config();
    config.patience = config.max_epochs + 1;
    CHECK_THROWS_AS(config.validate(), Error);
    config = toy_config();
    config.learning_rate = 0.0;
    CHECK_THROWS_AS(config.validate(), Error);
}

TEST_CASE("predict: format, symmetry, determinism, checkpoint round trip") {
    ToyWorld world(8);
    ModelHandle model = build_model({Architecture::toy_cnn}, {}, 31);
    TempDir out("pred");

    SUBCASE("zero-weight head gives 0.5/0.5 rows") {
        for (const auto& p : model.parameters())
            if (p.name.rfind("head.", 0) == 0) p.node->value.zero();
        auto records = predict(model, world.val, toy_config().normalization);
        CHECK(records.size() == world.val.size());
        for (const auto& r : records) {
            CHECK(r.p_negative == doctest::Approx(0.5).epsilon(1e-12));
            CHECK(r.p_positive == doctest::Approx(0.5).epsilon(1e-12));
        }
    }

    SUBCASE("rows normalized, file deterministic, checkpoint round trip") {
        const auto path1 = out.path() / "a.csv";
        const auto path2 = out.path() / "b.csv";
        auto records = predict(model, world.val, toy_config().normalization, path1);
        for (const auto& r : records)
            CHECK(std::abs(r.p_negative + r.p_positive - 1.0) <= 1e-6);
        predict(model, world.val, toy_config().normalization, path2);
        std::ifstream f1(path1), f2(path2);
        std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
        std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
        CHECK(s1 == s2);
        CHECK(s1.rfind("filename,p_negative,p_positive,true_label\n", 0) == 0);

        // save -> load -> predict is byte-identical
        save_checkpoint(make_checkpoint(model, "{}"), out.path() / "m.wbck");
        ModelHandle restored = restore_model(load_checkpoint(out.path() / "m.wbck"));
        predict(restored, world.val, toy_config().normalization, out.path() / "c.csv");
        std::ifstream f3(out.path() / "c.csv");
        std::string s3((std::istreambuf_iterator<char>(f3)), std::istreambuf_iterator<char>());
        CHECK(s3 == s1);
    }
}

TEST_SUITE_END();
