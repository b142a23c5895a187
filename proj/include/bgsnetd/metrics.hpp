#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bgsnetd/grid.hpp"

namespace bgsnetd {

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    ConfusionCounts& operator+=(const ConfusionCounts& o)
    {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
    friend ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) { return a += b; }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
    std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
};

/// A metric value; nullopt marks an undefined (0/0) ratio.
using Metric = std::optional<double>;

/// Seven change-detection metrics in the usual table order.
struct MetricReport {
    Metric recall;
    Metric specificity;
    Metric fpr;
    Metric fnr;
    Metric pwc;  // percent
    Metric precision;
    Metric f_measure;

    /// Number of reports that contributed to each field (1 for a direct report).
    std::array<std::size_t, 7> contributors{1, 1, 1, 1, 1, 1, 1};

    std::array<Metric, 7> values() const { return {recall, specificity, fpr, fnr, pwc, precision, f_measure}; }
    static constexpr std::array<const char*, 7> names{"Recall", "Specificity", "FPR",  "FNR",
                                                      "PWC",    "Precision",   "F-Measure"};
};

/// Skips pixels whose truth is Unknown/OutsideRoi or that lie outside `roi`. Shadow counts as background.
ConfusionCounts accumulate(const MaskFrame& mask, const GtFrame& gt, const MaskFrame* roi = nullptr);

MetricReport compute_metrics(const ConfusionCounts& c);

/// Unweighted mean per metric over the reports where that metric is defined.
MetricReport average_reports(const std::vector<MetricReport>& reports);

struct ReportRow {
    std::string name;
    MetricReport report;
};

/// `name,Recall,...,F-Measure` with undefined values written as NaN.
std::string report_csv(const std::vector<ReportRow>& rows);
/// Fixed-width text table with the same columns.
std::string report_table(const std::vector<ReportRow>& rows);

std::string format_metric(const Metric& m);

}  // namespace bgsnetd
