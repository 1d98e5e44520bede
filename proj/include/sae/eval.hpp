#pragma once

/// @file eval.hpp Confusion matrix, per-class precision/recall, overall
/// accuracy, and the two report renderings (fixed-width table + key=value).

#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "sae/common.hpp"
#include "sae/nn.hpp"

namespace sae {

/** Evaluation surface for one prediction run.
 *
 * confusion[p][t] counts samples of true class t predicted as p (rows are
 * predictions). precision[p] = confusion[p][p] / row-sum, recall[t] =
 * confusion[t][t] / column-sum; an empty row or column yields nullopt rather
 * than a NaN.
 */
struct EvalReport {
    std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> confusion{};
    std::array<std::optional<double>, kNumClasses> precision{};
    std::array<std::optional<double>, kNumClasses> recall{};
    double accuracy = 0.0;
    std::uint64_t total = 0;
};

inline EvalReport evaluate(const std::vector<int> &pred, const std::vector<int> &truth) {
    if (pred.size() != truth.size())
        throw ShapeError("evaluate: " + std::to_string(pred.size()) + " predictions vs " +
                         std::to_string(truth.size()) + " labels");
    EvalReport r;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] < 0 || pred[i] >= kNumClasses)
            throw ConfigError("evaluate: prediction out of range 0..9: " + std::to_string(pred[i]));
        if (truth[i] < 0 || truth[i] >= kNumClasses)
            throw ConfigError("evaluate: label out of range 0..9: " + std::to_string(truth[i]));
        r.confusion[pred[i]][truth[i]]++;
    }
    r.total = pred.size();

    std::uint64_t trace = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        std::uint64_t row_sum = 0, col_sum = 0;
        for (int k = 0; k < kNumClasses; ++k) {
            row_sum += r.confusion[c][k];
            col_sum += r.confusion[k][c];
        }
        if (row_sum > 0)
            r.precision[c] = static_cast<double>(r.confusion[c][c]) / static_cast<double>(row_sum);
        if (col_sum > 0)
            r.recall[c] = static_cast<double>(r.confusion[c][c]) / static_cast<double>(col_sum);
        trace += r.confusion[c][c];
    }
    r.accuracy = r.total > 0 ? static_cast<double>(trace) / static_cast<double>(r.total) : 0.0;
    return r;
}

namespace detail {

/// Percentage of num/den in tenths, rounded half up, in exact integer
/// arithmetic (0.9847 -> 985 tenths -> "98.5%").
inline std::uint64_t pct_tenths(std::uint64_t num, std::uint64_t den) {
    return (2000 * num + den) / (2 * den);
}

inline std::string pct_str(std::uint64_t num, std::uint64_t den) {
    if (den == 0) return "n/a";
    const std::uint64_t t = pct_tenths(num, den);
    return std::to_string(t / 10) + "." + std::to_string(t % 10) + "%";
}

inline std::string pad_left(const std::string &s, std::size_t width) {
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

/// Shortest decimal form that round-trips to the same double.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace detail

/** Fixed-width table: one block of two lines per predicted digit (counts,
 * then percent-of-total), right margin precision, bottom margins recall and
 * error rate, overall accuracy in the bottom-right cell. Percentages round
 * half up to one decimal.
 */
inline std::string render_text(const EvalReport &r) {
    constexpr std::size_t w = 8;
    std::array<std::uint64_t, kNumClasses> row_sum{}, col_sum{};
    std::uint64_t trace = 0;
    for (int p = 0; p < kNumClasses; ++p)
        for (int t = 0; t < kNumClasses; ++t) {
            row_sum[p] += r.confusion[p][t];
            col_sum[t] += r.confusion[p][t];
            if (p == t) trace += r.confusion[p][t];
        }

    std::string out = "Confusion matrix (rows: predicted digit, columns: true digit)\n\n";
    out += detail::pad_left("", 6);
    for (int t = 0; t < kNumClasses; ++t) out += detail::pad_left(std::to_string(t), w);
    out += detail::pad_left("precision", 12);
    out += "\n";
    for (int p = 0; p < kNumClasses; ++p) {
        out += detail::pad_left(std::to_string(p), 6);
        for (int t = 0; t < kNumClasses; ++t)
            out += detail::pad_left(std::to_string(r.confusion[p][t]), w);
        out += detail::pad_left(detail::pct_str(r.confusion[p][p], row_sum[p]), 12);
        out += "\n";
        out += detail::pad_left("", 6);
        for (int t = 0; t < kNumClasses; ++t)
            out += detail::pad_left(detail::pct_str(r.confusion[p][t], r.total), w);
        out += "\n";
    }
    out += detail::pad_left("recall", 6);
    for (int t = 0; t < kNumClasses; ++t)
        out += detail::pad_left(detail::pct_str(r.confusion[t][t], col_sum[t]), w);
    out += detail::pad_left(detail::pct_str(trace, r.total), 12);
    out += "\n";
    out += detail::pad_left("error", 6);
    for (int t = 0; t < kNumClasses; ++t)
        out += detail::pad_left(detail::pct_str(col_sum[t] - r.confusion[t][t], col_sum[t]), w);
    out += detail::pad_left(detail::pct_str(r.total - trace, r.total), 12);
    out += "\n";
    return out;
}

/// Machine-readable twin of the table: every number as a key=value line.
inline std::string render_metrics(const EvalReport &r) {
    std::string out;
    out += "total=" + std::to_string(r.total) + "\n";
    out += "accuracy=" + detail::format_double(r.accuracy) + "\n";
    for (int c = 0; c < kNumClasses; ++c)
        out += "precision_" + std::to_string(c) + "=" +
               (r.precision[c] ? detail::format_double(*r.precision[c]) : "undefined") + "\n";
    for (int c = 0; c < kNumClasses; ++c)
        out += "recall_" + std::to_string(c) + "=" +
               (r.recall[c] ? detail::format_double(*r.recall[c]) : "undefined") + "\n";
    for (int p = 0; p < kNumClasses; ++p)
        for (int t = 0; t < kNumClasses; ++t)
            out += "cell_" + std::to_string(p) + "_" + std::to_string(t) + "=" +
                   std::to_string(r.confusion[p][t]) + "\n";
    return out;
}

inline void write_file(const std::string &path, const std::string &content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("short write to " + path);
}

} // namespace sae
