#include "bgsnetd/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace bgsnetd {

namespace {

Metric ratio(double num, double den)
{
    if (den == 0.0) {
        return std::nullopt;
    }
    return num / den;
}

}  // namespace

ConfusionCounts accumulate(const MaskFrame& mask, const GtFrame& gt, const MaskFrame* roi)
{
    require_same_shape(mask, gt, "mask and ground truth");
    if (roi) {
        require_same_shape(*roi, gt, "ROI and ground truth");
    }
    ConfusionCounts c;
    for (std::size_t k = 0; k < gt.size(); ++k) {
        if (roi && roi->data[k] == Mask::BG) {
            continue;
        }
        bool truth_fg = false;
        switch (gt.data[k]) {
            case GtLabel::Unknown:
            case GtLabel::OutsideRoi: continue;
            case GtLabel::Foreground: truth_fg = true; break;
            case GtLabel::Background:
            case GtLabel::Shadow: truth_fg = false; break;
        }
        const bool pred_fg = mask.data[k] == Mask::FG;
        if (pred_fg && truth_fg) {
            ++c.tp;
        } else if (pred_fg) {
            ++c.fp;
        } else if (truth_fg) {
            ++c.fn;
        } else {
            ++c.tn;
        }
    }
    return c;
}

MetricReport compute_metrics(const ConfusionCounts& c)
{
    const auto tp = static_cast<double>(c.tp);
    const auto fp = static_cast<double>(c.fp);
    const auto fn = static_cast<double>(c.fn);
    const auto tn = static_cast<double>(c.tn);
    MetricReport r;
    r.recall = ratio(tp, tp + fn);
    r.specificity = ratio(tn, tn + fp);
    r.fpr = ratio(fp, fp + tn);
    r.fnr = ratio(fn, tp + fn);
    r.pwc = ratio(100.0 * (fn + fp), tp + fn + fp + tn);
    r.precision = ratio(tp, tp + fp);
    if (r.precision && r.recall) {
        r.f_measure = ratio(2.0 * *r.precision * *r.recall, *r.precision + *r.recall);
    }
    for (std::size_t k = 0; k < 7; ++k) {
        r.contributors[k] = r.values()[k] ? 1 : 0;
    }
    return r;
}

MetricReport average_reports(const std::vector<MetricReport>& reports)
{
    if (reports.empty()) {
        throw DataError("cannot average an empty list of reports");
    }
    std::array<double, 7> sum{};
    std::array<std::size_t, 7> count{};
    for (const MetricReport& r : reports) {
        const auto v = r.values();
        for (std::size_t k = 0; k < 7; ++k) {
            if (v[k]) {
                sum[k] += *v[k];
                ++count[k];
            }
        }
    }
    std::array<Metric, 7> mean;
    for (std::size_t k = 0; k < 7; ++k) {
        if (count[k]) {
            mean[k] = sum[k] / static_cast<double>(count[k]);
        }
    }
    MetricReport out{mean[0], mean[1], mean[2], mean[3], mean[4], mean[5], mean[6], count};
    return out;
}

std::string format_metric(const Metric& m)
{
    if (!m) {
        return "NaN";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *m);
    return buf;
}

std::string report_csv(const std::vector<ReportRow>& rows)
{
    std::ostringstream out;
    out << "video";
    for (const char* n : MetricReport::names) {
        out << ',' << n;
    }
    out << '\n';
    for (const ReportRow& row : rows) {
        out << row.name;
        for (const Metric& m : row.report.values()) {
            out << ',' << format_metric(m);
        }
        out << '\n';
    }
    return out.str();
}

std::string report_table(const std::vector<ReportRow>& rows)
{
    std::size_t name_w = 5;
    for (const ReportRow& row : rows) {
        name_w = std::max(name_w, row.name.size());
    }
    std::ostringstream out;
    auto cell = [&](const std::string& s, std::size_t w) {
        out << s;
        for (std::size_t k = s.size(); k < w; ++k) out << ' ';
    };
    cell("Video", name_w + 2);
    for (const char* n : MetricReport::names) {
        cell(n, 13);
    }
    out << '\n';
    for (const ReportRow& row : rows) {
        cell(row.name, name_w + 2);
        for (const Metric& m : row.report.values()) {
            cell(format_metric(m), 13);
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace bgsnetd
