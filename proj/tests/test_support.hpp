#pragma once

// Shared helpers for the test suites: scratch directories, independent
// oracles, and small generators. Oracles here are deliberately naive and
// never call the implementation paths they check.

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "wastebench/autograd.hpp"
#include "wastebench/rng.hpp"

namespace testsupport {

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        auto base = std::filesystem::temp_directory_path();
        static std::atomic<int> counter{0};
        path_ = base / ("wastebench_" + tag + "_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// naive confusion-matrix metric evaluator (independent of metrics.cpp)
struct NaiveMetrics {
    double accuracy, precision, sensitivity, specificity, f1;
    bool accuracy_defined, precision_defined, sensitivity_defined, specificity_defined, f1_defined;
};

inline NaiveMetrics naive_metrics(long tp, long tn, long fp, long fn) {
    NaiveMetrics m{};
    const double TP = tp, TN = tn, FP = fp, FN = fn;
    m.accuracy_defined = (tp + tn + fp + fn) > 0;
    if (m.accuracy_defined) m.accuracy = (TP + TN) / (TP + TN + FP + FN);
    m.specificity_defined = (tn + fp) > 0;
    if (m.specificity_defined) m.specificity = TN / (TN + FP);
    m.sensitivity_defined = (tp + fn) > 0;
    if (m.sensitivity_defined) m.sensitivity = TP / (TP + FN);
    m.precision_defined = (tp + fp) > 0;
    if (m.precision_defined) m.precision = TP / (TP + FP);
    m.f1_defined = m.precision_defined && m.sensitivity_defined &&
                   (m.precision + m.sensitivity) > 0;
    if (m.f1_defined) m.f1 = 2.0 * m.precision * m.sensitivity / (m.precision + m.sensitivity);
    return m;
}

// Mann-Whitney pair-counting AUC oracle, ties count one half.
inline double mann_whitney_auc(const std::vector<double>& positive_scores,
                               const std::vector<double>& negative_scores) {
    double concordant = 0;
    for (double p : positive_scores)
        for (double n : negative_scores) {
            if (p > n) concordant += 1.0;
            else if (p == n) concordant += 0.5;
        }
    return concordant / (static_cast<double>(positive_scores.size()) *
                         static_cast<double>(negative_scores.size()));
}

// Central finite-difference check of d(loss)/d(param) for sampled entries.
// build_loss must rebuild the graph from the params' current values.
inline void check_gradients(const std::vector<wastebench::nn::NodeRef>& params,
                            const std::function<wastebench::nn::NodeRef()>& build_loss,
                            double rel_tol, int samples_per_param,
                            std::vector<std::string>* failures) {
    using namespace wastebench;
    for (const auto& p : params) {
        p->ensure_grad();
        p->grad.zero();
    }
    nn::NodeRef loss = build_loss();
    nn::backward(loss);
    std::vector<nn::Tensor> analytic;
    for (const auto& p : params) analytic.push_back(p->grad.clone());
    CounterRng pick(123456789);
    const double h = 1e-5;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        for (int s = 0; s < samples_per_param; ++s) {
            const std::int64_t k =
                static_cast<std::int64_t>(pick.below(static_cast<std::uint64_t>(p->value.size())));
            const double saved = p->value[k];
            p->value[k] = saved + h;
            const double up = build_loss()->value[0];
            p->value[k] = saved - h;
            const double down = build_loss()->value[0];
            p->value[k] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double an = analytic[pi][k];
            const double denom = std::max({1.0, std::abs(fd), std::abs(an)});
            if (std::abs(fd - an) / denom > rel_tol)
                failures->push_back("param " + std::to_string(pi) + "[" + std::to_string(k) +
                                    "]: analytic " + std::to_string(an) + " vs fd " +
                                    std::to_string(fd));
        }
        // clear grads for any repeated use
        p->grad.zero();
    }
}

inline wastebench::nn::Tensor random_tensor(wastebench::nn::Shape shape, wastebench::CounterRng& rng,
                                            double scale = 1.0) {
    wastebench::nn::Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-scale, scale);
    return t;
}

}  // namespace testsupport
