#include <cmath>
#include <cstdio>
#include <sstream>

#include "wastebench/metrics.hpp"

namespace wastebench {

std::string roc_csv(const RocCurve& curve) {
    std::string out = "threshold,fpr,tpr\n";
    char buf[96];
    for (std::size_t i = 0; i < curve.points.size(); ++i) {
        if (std::isinf(curve.thresholds[i]))
            std::snprintf(buf, sizeof(buf), "inf,%.6f,%.6f\n", curve.points[i].fpr,
                          curve.points[i].tpr);
        else
            std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f\n", curve.thresholds[i],
                          curve.points[i].fpr, curve.points[i].tpr);
        out += buf;
    }
    return out;
}

// Dependency-light SVG. The CSV points are the canonical artifact; this is a
// convenience rendering with the chance diagonal for reference.
std::string roc_svg(const std::vector<NamedCurve>& curves) {
    constexpr int kSize = 480, kMargin = 50;
    constexpr int kPlot = kSize - 2 * kMargin;
    static const char* kColors[] = {"#c2185b", "#1565c0", "#2e7d32", "#ef6c00", "#6a1b9a"};

    auto px = [&](double fpr) { return kMargin + fpr * kPlot; };
    auto py = [&](double tpr) { return kSize - kMargin - tpr * kPlot; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\""
        << kSize << "\" viewBox=\"0 0 " << kSize << " " << kSize << "\">\n";
    svg << "<rect width=\"" << kSize << "\" height=\"" << kSize << "\" fill=\"white\"/>\n";
    // axes
    svg << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\""
        << py(0) << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(0) << "\" y2=\""
        << py(1) << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 10; t += 2) {
        const double v = t / 10.0;
        svg << "<text x=\"" << px(v) << "\" y=\"" << py(0) + 18
            << "\" font-size=\"10\" text-anchor=\"middle\">" << v << "</text>\n";
        svg << "<text x=\"" << px(0) - 8 << "\" y=\"" << py(v) + 3
            << "\" font-size=\"10\" text-anchor=\"end\">" << v << "</text>\n";
    }
    svg << "<text x=\"" << kSize / 2 << "\" y=\"" << kSize - 8
        << "\" font-size=\"12\" text-anchor=\"middle\">false positive rate</text>\n";
    svg << "<text x=\"14\" y=\"" << kSize / 2
        << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 " << kSize / 2
        << ")\">true positive rate</text>\n";
    // chance diagonal
    svg << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\""
        << py(1) << "\" stroke=\"#888\" stroke-dasharray=\"6,4\"/>\n";

    for (std::size_t c = 0; c < curves.size(); ++c) {
        const char* color = kColors[c % (sizeof(kColors) / sizeof(kColors[0]))];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
        for (const auto& p : curves[c].curve.points) svg << px(p.fpr) << "," << py(p.tpr) << " ";
        svg << "\"/>\n";
        char label[160];
        std::snprintf(label, sizeof(label), "%s (AUC %.4f)", curves[c].name.c_str(),
                      curves[c].auc_value);
        svg << "<text x=\"" << px(0.42) << "\" y=\"" << py(0.06) - 16.0 * static_cast<double>(c)
            << "\" font-size=\"11\" fill=\"" << color << "\">" << label << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace wastebench
