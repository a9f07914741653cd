// Copyright (C) 2026 HistoSelect contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace histoselect {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

inline double norm2(std::span<const double> a) {
    return std::sqrt(dot(a, a));
}

// Numerically stable logistic sigmoid.
inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// log softmax with max subtraction, written into `out`.
inline void log_softmax(std::span<const double> logits, std::span<double> out) {
    const double peak = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) {
        sum += std::exp(v - peak);
    }
    const double log_z = peak + std::log(sum);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = logits[i] - log_z;
    }
}

inline std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.size());
    log_softmax(logits, p);
    for (double& v : p) {
        v = std::exp(v);
    }
    return p;
}

inline bool all_finite(std::span<const double> values) {
    return std::all_of(values.begin(), values.end(),
                       [](double v) { return std::isfinite(v); });
}

}  // namespace histoselect
