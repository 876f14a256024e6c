#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "wastebench/manifest.hpp"
#include "wastebench/trainer.hpp"

namespace wastebench {

// Argmax over (p_negative, p_positive); the exact tie breaks toward the
// configured label (default negative: no landfill call on zero evidence).
struct DecisionRule {
    Label tie_break = Label::negative;
};
Label decide(const PredictionRecord& record, const DecisionRule& rule = {});

struct ConfusionCounts {
    std::int64_t tp = 0, tn = 0, fp = 0, fn = 0;
    Label reference = Label::positive;
    std::int64_t total() const { return tp + tn + fp + fn; }
};

struct ClassMetrics {
    double accuracy = 0, precision = 0, sensitivity = 0, specificity = 0, f1 = 0;
    std::int64_t support = 0;  // true count of the reference class
    Label reference_class = Label::positive;
    bool zero_denominator = false;  // some metric used the 0-by-convention rule
};

struct WeightedMetrics {
    double accuracy = 0, precision = 0, sensitivity = 0, specificity = 0, f1 = 0;
    std::int64_t total_support = 0;
};

// Counts relative to `reference` taken as the positive event. Every record
// must carry a true label.
ConfusionCounts confusion(const std::vector<PredictionRecord>& predictions, Label reference,
                          const DecisionRule& rule = {});

// Exact confusion-matrix metric set; zero-denominator cells evaluate to 0
// and set the zero_denominator flag.
ClassMetrics class_metrics(const ConfusionCounts& counts);

// Support-weighted mean of per-class metrics.
WeightedMetrics weighted_average(const std::vector<ClassMetrics>& per_class);

struct RocPoint {
    double fpr = 0, tpr = 0;
};

struct RocCurve {
    std::vector<RocPoint> points;      // staircase from (0,0) to (1,1)
    std::vector<double> thresholds;    // same length; +inf sentinel first
    Label reference = Label::positive;
};

// Threshold sweep over the distinct reference-class scores.
RocCurve roc_points(const std::vector<PredictionRecord>& predictions, Label reference);
// Pools both (sample, class) decisions of every record into one sweep.
RocCurve micro_roc(const std::vector<PredictionRecord>& predictions);
// Pointwise average of the two per-class curves over the merged FPR grid;
// its area equals the mean of the per-class AUCs.
RocCurve macro_roc(const std::vector<PredictionRecord>& predictions);

// Trapezoidal area under the staircase.
double auc(const RocCurve& curve);
double micro_auc(const std::vector<PredictionRecord>& predictions);
// Mean of the two per-class AUCs.
double macro_auc(const std::vector<PredictionRecord>& predictions);

// Three-row per-class report (positive, negative, weighted average).
struct ClassReport {
    ClassMetrics positive;
    ClassMetrics negative;
    WeightedMetrics weighted;
    std::string to_text() const;  // percents, 2 decimals
    std::string to_json() const;
};
ClassReport evaluate_predictions(const std::vector<PredictionRecord>& predictions,
                                 const DecisionRule& rule = {});

// ---- published reference results ----

// Read-only table of reference metric percentages, loaded from the committed
// data file (never hard-coded in code).
class BaselineTable {
public:
    struct Entry {
        std::string group;
        double accuracy = 0, precision = 0, sensitivity = 0, f1 = 0, specificity = 0;  // percent
    };

    static BaselineTable load(const std::filesystem::path& path);

    const Entry* find(const std::string& model_name) const;
    std::vector<std::string> names() const;

private:
    std::map<std::string, Entry> entries_;
};

struct BaselineComparison {
    struct Delta {
        std::string metric;
        double computed_pct = 0, baseline_pct = 0, delta_pp = 0;
        bool pass = false;
    };
    std::string model_name;
    double tolerance_pp = 0;
    std::vector<Delta> deltas;
    bool pass = false;
    std::string to_text() const;
    std::string to_json() const;
};

// Deltas in percentage points against the named baseline row; passes iff
// every metric is within tolerance.
BaselineComparison compare_to_baseline(const WeightedMetrics& computed,
                                       const BaselineTable& baseline,
                                       const std::string& model_name, double tolerance_pp);

// ---- ROC artifacts ----

std::string roc_csv(const RocCurve& curve);

struct NamedCurve {
    std::string name;
    RocCurve curve;
    double auc_value = 0;
};
// Minimal standalone SVG: the curves plus the chance diagonal.
std::string roc_svg(const std::vector<NamedCurve>& curves);

}  // namespace wastebench
