#include "bayesagg/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace bayesagg::metrics {

double delta_m(const MetricRecord& record) {
    const Index K = record.method_values.size();
    if (K == 0) throw EmptyInputError("delta_m: no tasks");
    if (record.stl_values.size() != K || static_cast<Index>(record.higher_is_better.size()) != K) {
        throw DimensionError("delta_m: record lengths differ");
    }
    double acc = 0.0;
    for (Index k = 0; k < K; ++k) {
        const double ms = record.stl_values(k);
        if (ms == 0.0) throw DivisionByZeroError("delta_m: STL reference value is zero");
        const double sign = record.higher_is_better[k] ? -1.0 : 1.0;
        acc += sign * (record.method_values(k) - ms) / ms;
    }
    return 100.0 * acc / static_cast<double>(K);
}

double ece(const Vector& confidences, const std::vector<bool>& correct, int bins) {
    const Index n = confidences.size();
    if (n == 0) throw EmptyInputError("ece: no predictions");
    if (static_cast<Index>(correct.size()) != n) throw DimensionError("ece: length mismatch");
    std::vector<double> conf_sum(bins, 0.0), acc_sum(bins, 0.0);
    std::vector<Index> count(bins, 0);
    for (Index i = 0; i < n; ++i) {
        const double c = confidences(i);
        if (c < 0.0 || c > 1.0) throw InvalidProbabilityError("ece: confidence outside [0,1]");
        int b = std::min(static_cast<int>(c * bins), bins - 1);  // c == 1 joins the top bin
        conf_sum[b] += c;
        acc_sum[b] += correct[i] ? 1.0 : 0.0;
        ++count[b];
    }
    double out = 0.0;
    for (int b = 0; b < bins; ++b) {
        if (count[b] == 0) continue;
        const double w = static_cast<double>(count[b]) / static_cast<double>(n);
        out += w * std::abs(acc_sum[b] / count[b] - conf_sum[b] / count[b]);
    }
    return out;
}

double brier(const Matrix& probs, const std::vector<int>& labels) {
    const Index n = probs.cols();
    if (n == 0) throw EmptyInputError("brier: no predictions");
    if (static_cast<Index>(labels.size()) != n) throw DimensionError("brier: length mismatch");
    const Index classes = probs.rows();
    double acc = 0.0;
    for (Index i = 0; i < n; ++i) {
        const int y = labels[i];
        if (y < 0 || y >= classes) throw LabelOutOfRangeError("brier: label out of range");
        for (Index c = 0; c < classes; ++c) {
            const double diff = probs(c, i) - (c == y ? 1.0 : 0.0);
            acc += diff * diff;
        }
    }
    return acc / static_cast<double>(n);
}

double mae(const Vector& predictions, const Vector& targets, double denorm_std) {
    if (predictions.size() != targets.size()) throw DimensionError("mae: length mismatch");
    if (predictions.size() == 0) throw EmptyInputError("mae: no predictions");
    // Both sides live on the normalized scale; the shared mean shift cancels,
    // the std rescales the error back to the raw units.
    return denorm_std * (predictions - targets).cwiseAbs().mean();
}

double task_criteria(const Matrix& predictions, const Matrix& labels, TaskKind kind,
                     std::span<const NormStats> norm) {
    if (predictions.cols() != labels.cols()) throw DimensionError("task_criteria: length mismatch");
    if (kind == TaskKind::kRegression) {
        if (predictions.rows() != labels.rows()) {
            throw DimensionError("task_criteria: output arity mismatch");
        }
        double acc = 0.0;
        for (Index o = 0; o < predictions.rows(); ++o) {
            const double sd = o < static_cast<Index>(norm.size()) ? norm[o].std : 1.0;
            acc += mae(predictions.row(o).transpose(), labels.row(o).transpose(), sd);
        }
        return acc / static_cast<double>(predictions.rows());
    }
    std::vector<int> y(labels.cols());
    for (Index i = 0; i < labels.cols(); ++i) y[i] = static_cast<int>(labels(0, i));
    return accuracy(predictions, y, kind == TaskKind::kBinary);
}

double accuracy(const Matrix& probs, const std::vector<int>& labels, bool binary) {
    const Index n = probs.cols();
    if (n == 0) throw EmptyInputError("accuracy: no predictions");
    if (static_cast<Index>(labels.size()) != n) throw DimensionError("accuracy: length mismatch");
    Index hits = 0;
    for (Index i = 0; i < n; ++i) {
        int pred;
        if (binary) {
            pred = probs(0, i) > 0.5 ? 1 : 0;
        } else {
            Index arg = 0;
            probs.col(i).maxCoeff(&arg);
            pred = static_cast<int>(arg);
        }
        if (pred == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace bayesagg::metrics
