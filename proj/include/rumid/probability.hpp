#pragma once

#include <rumid/errors.hpp>

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace rumid {

/// Choice probabilities over the J+1 alternatives at one offer vector.
class ProbVector {
public:
    ProbVector() = default;

    /// Validates entries in [0,1] and sum within `sum_tol` of one.
    explicit ProbVector(std::vector<double> p, double sum_tol = 1e-9) : p_(std::move(p)) {
        if (p_.empty()) throw InputError("probability vector is empty");
        double s = 0.0;
        for (double x : p_) {
            if (!std::isfinite(x) || x < -sum_tol || x > 1.0 + sum_tol)
                throw InputError("probability entry out of [0,1]: " + std::to_string(x));
            s += x;
        }
        if (std::abs(s - 1.0) > sum_tol)
            throw InputError("probabilities sum to " + std::to_string(s) + ", not 1");
    }

    std::size_t size() const { return p_.size(); }
    double operator[](std::size_t j) const { return p_[j]; }
    std::span<const double> values() const { return p_; }
    auto begin() const { return p_.begin(); }
    auto end() const { return p_.end(); }

    double sum() const { return std::accumulate(p_.begin(), p_.end(), 0.0); }

    double max_abs_diff(const ProbVector& o) const {
        double m = 0.0;
        for (std::size_t j = 0; j < p_.size() && j < o.p_.size(); ++j) m = std::max(m, std::abs(p_[j] - o.p_[j]));
        return m;
    }

private:
    std::vector<double> p_;
};

} // namespace rumid
