#pragma once

#include <rumid/errors.hpp>
#include <rumid/model.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace rumid {

/// Axis-aligned rectangle in (a_j, a_m).
struct Rect {
    double j_lo = 0.0, j_hi = 1.0;
    double m_lo = 0.0, m_hi = 1.0;

    bool contains(double aj, double am) const { return aj >= j_lo && aj <= j_hi && am >= m_lo && am <= m_hi; }
};

enum class SieveBasis { polynomial, log_polynomial };

inline std::string to_string(SieveBasis b) { return b == SieveBasis::polynomial ? "polynomial" : "log_polynomial"; }

inline SieveBasis sieve_basis_from_string(const std::string& s) {
    if (s == "polynomial") return SieveBasis::polynomial;
    if (s == "log_polynomial") return SieveBasis::log_polynomial;
    throw InputError("unknown sieve basis '" + s + "' (expected polynomial or log_polynomial)");
}

/// Exponent pairs (p, q) of x^p y^q up to total degree, graded:
/// 1, x, y, x^2, xy, y^2, ...
inline std::vector<std::pair<int, int>> basis_exponents(int degree) {
    std::vector<std::pair<int, int>> out;
    for (int d = 0; d <= degree; ++d)
        for (int p = d; p >= 0; --p) out.emplace_back(p, d - p);
    return out;
}

inline std::string basis_term_name(SieveBasis basis, std::pair<int, int> e) {
    const std::string x = basis == SieveBasis::log_polynomial ? "ln(a_j)" : "a_j";
    const std::string y = basis == SieveBasis::log_polynomial ? "ln(a_m)" : "a_m";
    if (e.first == 0 && e.second == 0) return "1";
    std::string s;
    auto term = [&](const std::string& v, int p) {
        if (p == 0) return;
        if (!s.empty()) s += "*";
        s += v;
        if (p > 1) s += "^" + std::to_string(p);
    };
    term(x, e.first);
    term(y, e.second);
    return s;
}

struct SieveFit {
    SieveBasis basis = SieveBasis::log_polynomial;
    int degree = 1;
    std::vector<double> coefficients;
    /// Residuals are in the fitted scale (log of the ratio for log_polynomial).
    double residual_rms = 0.0;
    double max_residual = 0.0;
    std::size_t samples = 0;
    std::size_t excluded = 0;
};

struct AnalyticRatio {
    std::function<double(double, double)> fn;
    std::string description;
};

/// The cross-partial ratio t_jm(a_j, a_m) = (dq_j/da_m) / (dq_m/da_j).
class RatioFunction {
public:
    RatioFunction(std::size_t j, std::size_t pivot, Rect domain, std::variant<AnalyticRatio, SieveFit> form)
        : j_(j), pivot_(pivot), domain_(domain), form_(std::move(form)) {
        if (j_ == pivot_) throw InputError("ratio function needs j != pivot");
        if (const auto* s = std::get_if<SieveFit>(&form_)) {
            exponents_ = basis_exponents(s->degree);
            if (s->coefficients.size() != exponents_.size())
                throw InputError("sieve coefficient count does not match degree " + std::to_string(s->degree));
        }
    }

    std::size_t j() const { return j_; }
    std::size_t pivot() const { return pivot_; }
    const Rect& domain() const { return domain_; }
    bool is_sieve() const { return std::holds_alternative<SieveFit>(form_); }
    const SieveFit& sieve() const { return std::get<SieveFit>(form_); }
    const std::variant<AnalyticRatio, SieveFit>& form() const { return form_; }

    /// True when evaluation requires a_j > 0 and a_m > 0.
    bool requires_positive() const { return is_sieve() && sieve().basis == SieveBasis::log_polynomial; }

    double operator()(double aj, double am) const {
        if (const auto* a = std::get_if<AnalyticRatio>(&form_)) return a->fn(aj, am);
        const auto& s = std::get<SieveFit>(form_);
        double x = aj, y = am;
        if (s.basis == SieveBasis::log_polynomial) {
            if (!(aj > 0.0) || !(am > 0.0)) throw DomainError("log-polynomial ratio needs positive coordinates");
            x = std::log(aj);
            y = std::log(am);
        }
        double acc = 0.0;
        for (std::size_t i = 0; i < exponents_.size(); ++i)
            acc += s.coefficients[i] * ipow(x, exponents_[i].first) * ipow(y, exponents_[i].second);
        return s.basis == SieveBasis::log_polynomial ? std::exp(acc) : std::max(acc, 0.0);
    }

private:
    static double ipow(double x, int p) {
        double r = 1.0;
        for (int i = 0; i < p; ++i) r *= x;
        return r;
    }

    std::size_t j_;
    std::size_t pivot_;
    Rect domain_;
    std::variant<AnalyticRatio, SieveFit> form_;
    std::vector<std::pair<int, int>> exponents_;
};

/// t_jm = h_m'(a_m) / h_j'(a_j), the ratio implied by an additive-noise model.
inline RatioFunction analytic_ratio(const ChoiceModelSpec& model, std::size_t j, std::size_t m) {
    const auto& dj = model.domain().at(j);
    const auto& dm = model.domain().at(m);
    const UtilityPrimitive uj = model.utility(j);
    const UtilityPrimitive um = model.utility(m);
    return RatioFunction(j, m, Rect{dj.first, dj.second, dm.first, dm.second},
                         AnalyticRatio{[uj, um](double aj, double am) { return um.derivative(am) / uj.derivative(aj); },
                                       "h_" + std::to_string(m) + "'(a_m)/h_" + std::to_string(j) + "'(a_j)"});
}

inline RatioFunction constant_ratio(double c, std::size_t j, std::size_t m, Rect domain) {
    return RatioFunction(j, m, domain, AnalyticRatio{[c](double, double) { return c; }, "constant " + std::to_string(c)});
}

inline nlohmann::json to_json(const RatioFunction& t) {
    nlohmann::json doc;
    doc["j"] = t.j();
    doc["pivot"] = t.pivot();
    doc["domain"] = {{"a_j", {t.domain().j_lo, t.domain().j_hi}}, {"a_m", {t.domain().m_lo, t.domain().m_hi}}};
    if (t.is_sieve()) {
        const auto& s = t.sieve();
        doc["form"] = "sieve";
        doc["basis"] = to_string(s.basis);
        doc["degree"] = s.degree;
        doc["coefficients"] = s.coefficients;
        std::vector<std::string> terms;
        for (auto e : basis_exponents(s.degree)) terms.push_back(basis_term_name(s.basis, e));
        doc["terms"] = terms;
        doc["residual_rms"] = s.residual_rms;
        doc["max_residual"] = s.max_residual;
        doc["samples"] = s.samples;
        doc["excluded"] = s.excluded;
    } else {
        doc["form"] = "analytic";
        doc["description"] = std::get<AnalyticRatio>(t.form()).description;
    }
    return doc;
}

/// Reloads a sieve-fitted ratio; analytic ratios are not serializable.
inline RatioFunction ratio_from_json(const nlohmann::json& doc) {
    try {
        if (doc.at("form").get<std::string>() != "sieve")
            throw InputError("only sieve-fitted ratio functions can be reloaded");
        SieveFit s;
        s.basis = sieve_basis_from_string(doc.at("basis").get<std::string>());
        s.degree = doc.at("degree").get<int>();
        s.coefficients = doc.at("coefficients").get<std::vector<double>>();
        s.residual_rms = doc.value("residual_rms", 0.0);
        s.max_residual = doc.value("max_residual", 0.0);
        s.samples = doc.value("samples", std::size_t{0});
        s.excluded = doc.value("excluded", std::size_t{0});
        const auto dj = doc.at("domain").at("a_j").get<std::vector<double>>();
        const auto dm = doc.at("domain").at("a_m").get<std::vector<double>>();
        if (dj.size() != 2 || dm.size() != 2) throw InputError("ratio domain must be two [lo, hi] pairs");
        return RatioFunction(doc.at("j").get<std::size_t>(), doc.at("pivot").get<std::size_t>(),
                             Rect{dj[0], dj[1], dm[0], dm[1]}, s);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("ratio document: ") + e.what());
    }
}

} // namespace rumid
