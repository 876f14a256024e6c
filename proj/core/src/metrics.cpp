#include "wastebench/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "wastebench/errors.hpp"

namespace wastebench {

using nlohmann::json;

Label decide(const PredictionRecord& record, const DecisionRule& rule) {
    if (record.p_positive > record.p_negative) return Label::positive;
    if (record.p_positive < record.p_negative) return Label::negative;
    return rule.tie_break;
}

ConfusionCounts confusion(const std::vector<PredictionRecord>& predictions, Label reference,
                          const DecisionRule& rule) {
    ConfusionCounts counts;
    counts.reference = reference;
    for (const auto& r : predictions) {
        if (!r.true_label)
            fail(ErrorCode::MissingLabel, "prediction for '" + r.filename + "' has no true label");
        const bool event_pred = decide(r, rule) == reference;
        const bool event_true = *r.true_label == reference;
        if (event_pred && event_true) ++counts.tp;
        else if (!event_pred && !event_true) ++counts.tn;
        else if (event_pred && !event_true) ++counts.fp;
        else ++counts.fn;
    }
    return counts;
}

ClassMetrics class_metrics(const ConfusionCounts& counts) {
    if (counts.total() == 0)
        fail(ErrorCode::EmptyCounts, "class_metrics needs at least one evaluated sample");
    ClassMetrics m;
    m.reference_class = counts.reference;
    m.support = counts.tp + counts.fn;
    const double tp = static_cast<double>(counts.tp), tn = static_cast<double>(counts.tn);
    const double fp = static_cast<double>(counts.fp), fn = static_cast<double>(counts.fn);
    auto ratio = [&m](double num, double den) {
        if (den == 0.0) {
            m.zero_denominator = true;
            return 0.0;
        }
        return num / den;
    };
    m.accuracy = ratio(tp + tn, tp + tn + fp + fn);
    m.specificity = ratio(tn, tn + fp);
    m.sensitivity = ratio(tp, tp + fn);
    m.precision = ratio(tp, tp + fp);
    m.f1 = ratio(2.0 * m.precision * m.sensitivity, m.precision + m.sensitivity);
    return m;
}

WeightedMetrics weighted_average(const std::vector<ClassMetrics>& per_class) {
    WeightedMetrics w;
    for (const auto& m : per_class) w.total_support += m.support;
    if (w.total_support <= 0)
        fail(ErrorCode::ZeroSupport, "weighted_average needs positive total support");
    for (const auto& m : per_class) {
        const double weight = static_cast<double>(m.support) / static_cast<double>(w.total_support);
        w.accuracy += weight * m.accuracy;
        w.precision += weight * m.precision;
        w.sensitivity += weight * m.sensitivity;
        w.specificity += weight * m.specificity;
        w.f1 += weight * m.f1;
    }
    return w;
}

// ---------------------------------------------------------------------------
// ROC / AUC
// ---------------------------------------------------------------------------

namespace {

struct ScoredEvent {
    double score;
    bool positive;
};

RocCurve sweep(std::vector<ScoredEvent> events, Label reference) {
    std::int64_t positives = 0, negatives = 0;
    for (const auto& e : events) (e.positive ? positives : negatives)++;
    if (positives == 0 || negatives == 0)
        fail(ErrorCode::DegenerateLabels,
             "ROC needs at least one sample of each truth value for the reference event");
    std::sort(events.begin(), events.end(), [](const ScoredEvent& a, const ScoredEvent& b) {
        return a.score > b.score;
    });
    RocCurve curve;
    curve.reference = reference;
    curve.points.push_back({0.0, 0.0});
    curve.thresholds.push_back(std::numeric_limits<double>::infinity());
    std::int64_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < events.size()) {
        const double score = events[i].score;
        while (i < events.size() && events[i].score == score) {
            (events[i].positive ? tp : fp)++;
            ++i;
        }
        curve.points.push_back({static_cast<double>(fp) / static_cast<double>(negatives),
                                static_cast<double>(tp) / static_cast<double>(positives)});
        curve.thresholds.push_back(score);
    }
    return curve;
}

}  // namespace

RocCurve roc_points(const std::vector<PredictionRecord>& predictions, Label reference) {
    std::vector<ScoredEvent> events;
    events.reserve(predictions.size());
    for (const auto& r : predictions) {
        if (!r.true_label)
            fail(ErrorCode::MissingLabel, "prediction for '" + r.filename + "' has no true label");
        const double score = reference == Label::positive ? r.p_positive : r.p_negative;
        events.push_back({score, *r.true_label == reference});
    }
    return sweep(std::move(events), reference);
}

RocCurve micro_roc(const std::vector<PredictionRecord>& predictions) {
    std::vector<ScoredEvent> events;
    events.reserve(predictions.size() * 2);
    for (const auto& r : predictions) {
        if (!r.true_label)
            fail(ErrorCode::MissingLabel, "prediction for '" + r.filename + "' has no true label");
        events.push_back({r.p_positive, *r.true_label == Label::positive});
        events.push_back({r.p_negative, *r.true_label == Label::negative});
    }
    return sweep(std::move(events), Label::positive);
}

RocCurve macro_roc(const std::vector<PredictionRecord>& predictions) {
    const RocCurve pos = roc_points(predictions, Label::positive);
    const RocCurve neg = roc_points(predictions, Label::negative);
    // Each per-class curve is a piecewise-linear path whose vertical risers
    // are duplicated-fpr vertices. Averaging bottom and top values at every
    // grid fpr keeps the risers, so the trapezoidal area of the averaged
    // path equals the mean of the per-class areas exactly.
    auto riser = [](const RocCurve& c, double x) -> std::pair<double, double> {
        double bottom = 0.0, top = 0.0;
        bool seen = false;
        for (std::size_t i = 0; i < c.points.size(); ++i) {
            const auto& p = c.points[i];
            if (p.fpr < x) {
                bottom = top = p.tpr;
                continue;
            }
            if (p.fpr == x) {
                if (!seen) bottom = p.tpr;
                seen = true;
                top = p.tpr;
                continue;
            }
            if (!seen && i > 0) {  // strictly inside a sloped segment
                const auto& a = c.points[i - 1];
                bottom = top = a.tpr + (p.tpr - a.tpr) * (x - a.fpr) / (p.fpr - a.fpr);
            }
            break;
        }
        return {bottom, top};
    };

    std::vector<double> grid;
    for (const auto& p : pos.points) grid.push_back(p.fpr);
    for (const auto& p : neg.points) grid.push_back(p.fpr);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    RocCurve curve;
    curve.reference = Label::positive;
    for (double x : grid) {
        const auto [pb, pt] = riser(pos, x);
        const auto [nb, nt] = riser(neg, x);
        const double bottom = 0.5 * (pb + nb), top = 0.5 * (pt + nt);
        for (double y : {bottom, top}) {
            if (!curve.points.empty() && curve.points.back().fpr == x &&
                curve.points.back().tpr == y)
                continue;
            curve.points.push_back({x, y});
            curve.thresholds.push_back(curve.points.size() == 1
                                           ? std::numeric_limits<double>::infinity()
                                           : x);
        }
    }
    return curve;
}

double auc(const RocCurve& curve) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
    }
    return area;
}

double micro_auc(const std::vector<PredictionRecord>& predictions) {
    return auc(micro_roc(predictions));
}

double macro_auc(const std::vector<PredictionRecord>& predictions) {
    return 0.5 * (auc(roc_points(predictions, Label::positive)) +
                  auc(roc_points(predictions, Label::negative)));
}

// ---------------------------------------------------------------------------
// reports
// ---------------------------------------------------------------------------

namespace {
std::string pct(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
    return buf;
}
json metrics_json(const ClassMetrics& m) {
    return {{"accuracy", m.accuracy},     {"precision", m.precision},
            {"sensitivity", m.sensitivity}, {"f1", m.f1},
            {"specificity", m.specificity}, {"support", m.support},
            {"zero_denominator", m.zero_denominator}};
}
}  // namespace

ClassReport evaluate_predictions(const std::vector<PredictionRecord>& predictions,
                                 const DecisionRule& rule) {
    ClassReport report;
    report.positive = class_metrics(confusion(predictions, Label::positive, rule));
    report.negative = class_metrics(confusion(predictions, Label::negative, rule));
    report.weighted = weighted_average({report.positive, report.negative});
    return report;
}

std::string ClassReport::to_text() const {
    std::ostringstream out;
    auto row = [&](const std::string& name, double a, double p, double s, double f, double sp) {
        out << name;
        for (std::size_t i = name.size(); i < 18; ++i) out << ' ';
        out << pct(a) << "  " << pct(p) << "  " << pct(s) << "  " << pct(f) << "  " << pct(sp)
            << "\n";
    };
    out << "class             acc    prec   sens   f1     spec\n";
    row("positive", positive.accuracy, positive.precision, positive.sensitivity, positive.f1,
        positive.specificity);
    row("negative", negative.accuracy, negative.precision, negative.sensitivity, negative.f1,
        negative.specificity);
    row("weighted_average", weighted.accuracy, weighted.precision, weighted.sensitivity,
        weighted.f1, weighted.specificity);
    return out.str();
}

std::string ClassReport::to_json() const {
    json j;
    j["positive"] = metrics_json(positive);
    j["negative"] = metrics_json(negative);
    j["weighted_average"] = {{"accuracy", weighted.accuracy},
                             {"precision", weighted.precision},
                             {"sensitivity", weighted.sensitivity},
                             {"f1", weighted.f1},
                             {"specificity", weighted.specificity},
                             {"support", weighted.total_support}};
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// baseline comparison
// ---------------------------------------------------------------------------

BaselineComparison compare_to_baseline(const WeightedMetrics& computed,
                                       const BaselineTable& baseline,
                                       const std::string& model_name, double tolerance_pp) {
    const BaselineTable::Entry* entry = baseline.find(model_name);
    if (!entry)
        fail(ErrorCode::UnknownModelName,
             "baseline table has no entry named '" + model_name + "'");
    BaselineComparison cmp;
    cmp.model_name = model_name;
    cmp.tolerance_pp = tolerance_pp;
    cmp.pass = true;
    auto push = [&](const char* metric, double fraction, double baseline_pct) {
        BaselineComparison::Delta d;
        d.metric = metric;
        d.computed_pct = fraction * 100.0;
        d.baseline_pct = baseline_pct;
        d.delta_pp = d.computed_pct - d.baseline_pct;
        d.pass = std::abs(d.delta_pp) <= tolerance_pp;
        cmp.pass = cmp.pass && d.pass;
        cmp.deltas.push_back(d);
    };
    push("accuracy", computed.accuracy, entry->accuracy);
    push("precision", computed.precision, entry->precision);
    push("sensitivity", computed.sensitivity, entry->sensitivity);
    push("f1", computed.f1, entry->f1);
    push("specificity", computed.specificity, entry->specificity);
    return cmp;
}

std::string BaselineComparison::to_text() const {
    std::ostringstream out;
    out << "baseline comparison: " << model_name << " (tolerance " << tolerance_pp << " pp) -> "
        << (pass ? "PASS" : "FAIL") << "\n";
    for (const auto& d : deltas) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "  %-12s computed %6.2f  baseline %6.2f  delta %+6.2f  %s\n",
                      d.metric.c_str(), d.computed_pct, d.baseline_pct, d.delta_pp,
                      d.pass ? "ok" : "out of tolerance");
        out << buf;
    }
    return out.str();
}

std::string BaselineComparison::to_json() const {
    json deltas_json = json::array();
    for (const auto& d : deltas)
        deltas_json.push_back({{"metric", d.metric},
                               {"computed_pct", d.computed_pct},
                               {"baseline_pct", d.baseline_pct},
                               {"delta_pp", d.delta_pp},
                               {"pass", d.pass}});
    json j;
    j["model"] = model_name;
    j["tolerance_pp"] = tolerance_pp;
    j["pass"] = pass;
    j["deltas"] = std::move(deltas_json);
    return j.dump(2) + "\n";
}

}  // namespace wastebench
