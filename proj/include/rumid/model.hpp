#pragma once

#include <rumid/errors.hpp>
#include <rumid/field.hpp>
#include <rumid/grid.hpp>
#include <rumid/probability.hpp>

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace rumid {

// ---------------------------------------------------------------------------
// Utility primitives h_j(a)

enum class UtilityKind { linear, log, power, polynomial };

inline std::string to_string(UtilityKind k) {
    switch (k) {
    case UtilityKind::linear: return "linear";
    case UtilityKind::log: return "log";
    case UtilityKind::power: return "power";
    case UtilityKind::polynomial: return "polynomial";
    }
    return "?";
}

/// A strictly increasing sub-utility of the numeraire.
///
///   linear:     h(a) = b0 + b1 a                params [b0, b1], b1 > 0
///   log:        h(a) = alpha ln a (+ c)         params [alpha] or [alpha, c], alpha > 0
///   power:      h(a) = c a^e                    params [c, e], c > 0, e > 0
///   polynomial: h(a) = sum_k c_k a^k            params [c_0, c_1, ...]
struct UtilityPrimitive {
    UtilityKind kind = UtilityKind::linear;
    std::vector<double> params{0.0, 1.0};

    static UtilityPrimitive linear(double b0, double b1) { return {UtilityKind::linear, {b0, b1}}; }
    static UtilityPrimitive log(double alpha) { return {UtilityKind::log, {alpha}}; }
    static UtilityPrimitive power(double c, double e) { return {UtilityKind::power, {c, e}}; }
    static UtilityPrimitive polynomial(std::vector<double> c) { return {UtilityKind::polynomial, std::move(c)}; }

    /// Natural domain of the primitive itself (independent of any model domain).
    bool requires_positive() const { return kind == UtilityKind::log || kind == UtilityKind::power; }

    void validate() const {
        switch (kind) {
        case UtilityKind::linear:
            if (params.size() != 2) throw InputError("linear utility needs params [b0, b1]");
            if (!(params[1] > 0.0)) throw InputError("linear utility needs b1 > 0");
            break;
        case UtilityKind::log:
            if (params.empty() || params.size() > 2) throw InputError("log utility needs params [alpha] or [alpha, c]");
            if (!(params[0] > 0.0)) throw InputError("log utility needs alpha > 0");
            break;
        case UtilityKind::power:
            if (params.size() != 2) throw InputError("power utility needs params [c, e]");
            if (!(params[0] > 0.0) || !(params[1] > 0.0)) throw InputError("power utility needs c > 0 and e > 0");
            break;
        case UtilityKind::polynomial:
            if (params.size() < 2) throw InputError("polynomial utility needs at least [c0, c1]");
            break;
        }
        for (double p : params)
            if (!std::isfinite(p)) throw InputError("utility parameters must be finite");
    }

    double value(double a) const {
        switch (kind) {
        case UtilityKind::linear: return params[0] + params[1] * a;
        case UtilityKind::log:
            if (!(a > 0.0)) throw DomainError("log utility requires a > 0, got " + std::to_string(a));
            return params[0] * std::log(a) + (params.size() > 1 ? params[1] : 0.0);
        case UtilityKind::power:
            if (!(a > 0.0)) throw DomainError("power utility requires a > 0, got " + std::to_string(a));
            return params[0] * std::pow(a, params[1]);
        case UtilityKind::polynomial: {
            double acc = 0.0;
            for (std::size_t k = params.size(); k-- > 0;) acc = acc * a + params[k];
            return acc;
        }
        }
        return 0.0;
    }

    double derivative(double a) const {
        switch (kind) {
        case UtilityKind::linear: return params[1];
        case UtilityKind::log:
            if (!(a > 0.0)) throw DomainError("log utility requires a > 0");
            return params[0] / a;
        case UtilityKind::power:
            if (!(a > 0.0)) throw DomainError("power utility requires a > 0");
            return params[0] * params[1] * std::pow(a, params[1] - 1.0);
        case UtilityKind::polynomial: {
            double acc = 0.0;
            for (std::size_t k = params.size(); k-- > 1;) acc = acc * a + static_cast<double>(k) * params[k];
            return acc;
        }
        }
        return 0.0;
    }
};

// ---------------------------------------------------------------------------
// Noise

enum class NoiseKind { gumbel_iid, gaussian_iid, gaussian_correlated };

inline std::string to_string(NoiseKind k) {
    switch (k) {
    case NoiseKind::gumbel_iid: return "gumbel_iid";
    case NoiseKind::gaussian_iid: return "gaussian_iid";
    case NoiseKind::gaussian_correlated: return "gaussian_correlated";
    }
    return "?";
}

struct NoiseSpec {
    NoiseKind kind = NoiseKind::gumbel_iid;
    double scale = 1.0;
    /// Only for gaussian_correlated: (J+1)x(J+1) correlation matrix.
    std::vector<std::vector<double>> correlation;
};

// ---------------------------------------------------------------------------
// Model

/// Additive random utility model max_j [h_j(a_j) + eps_j].
class ChoiceModelSpec {
public:
    ChoiceModelSpec(std::vector<UtilityPrimitive> utilities, NoiseSpec noise,
                    std::vector<std::pair<double, double>> domain)
        : utilities_(std::move(utilities)), noise_(std::move(noise)), domain_(std::move(domain)) {
        validate();
    }

    std::size_t alternatives() const { return utilities_.size(); }
    std::size_t J() const { return utilities_.size() - 1; }
    const UtilityPrimitive& utility(std::size_t j) const { return utilities_.at(j); }
    const std::vector<UtilityPrimitive>& utilities() const { return utilities_; }
    const NoiseSpec& noise() const { return noise_; }
    const std::vector<std::pair<double, double>>& domain() const { return domain_; }

    /// Lower Cholesky factor of the correlation matrix (identity for iid noise).
    const Eigen::MatrixXd& cholesky() const { return chol_; }

    bool in_domain(std::size_t j, double a) const {
        return a >= domain_[j].first && a <= domain_[j].second;
    }

private:
    void validate() {
        if (utilities_.size() < 2) throw InputError("a choice model needs at least two alternatives (J >= 1)");
        if (domain_.size() != utilities_.size())
            throw InputError("domain must have one interval per alternative");
        for (std::size_t j = 0; j < utilities_.size(); ++j) {
            const auto& u = utilities_[j];
            u.validate();
            const auto [lo, hi] = domain_[j];
            if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi))
                throw InputError("domain interval " + std::to_string(j) + " must be finite with lo < hi");
            if (u.requires_positive() && !(lo > 0.0))
                throw InputError("alternative " + std::to_string(j) + ": " + to_string(u.kind) +
                                 " utility requires a domain with a > 0");
            constexpr int samples = 512;
            for (int i = 0; i < samples; ++i) {
                const double x0 = lo + (hi - lo) * i / samples;
                const double x1 = lo + (hi - lo) * (i + 1) / samples;
                if (!(u.value(x1) > u.value(x0)))
                    throw InputError("utility of alternative " + std::to_string(j) +
                                     " is not strictly increasing near a = " + std::to_string(x0));
            }
        }
        if (!(noise_.scale > 0.0)) throw InputError("noise scale must be > 0");
        const auto n = static_cast<Eigen::Index>(utilities_.size());
        chol_ = Eigen::MatrixXd::Identity(n, n);
        if (noise_.kind == NoiseKind::gaussian_correlated) {
            const auto& c = noise_.correlation;
            if (c.size() != utilities_.size()) throw InputError("correlation matrix must be (J+1)x(J+1)");
            Eigen::MatrixXd m(n, n);
            for (Eigen::Index r = 0; r < n; ++r) {
                if (c[static_cast<std::size_t>(r)].size() != utilities_.size())
                    throw InputError("correlation matrix must be (J+1)x(J+1)");
                for (Eigen::Index s = 0; s < n; ++s) m(r, s) = c[static_cast<std::size_t>(r)][static_cast<std::size_t>(s)];
            }
            if (!m.isApprox(m.transpose(), 1e-12)) throw InputError("correlation matrix must be symmetric");
            Eigen::LLT<Eigen::MatrixXd> llt(m);
            if (llt.info() != Eigen::Success) throw InputError("correlation matrix must be positive definite");
            chol_ = llt.matrixL();
        }
    }

    std::vector<UtilityPrimitive> utilities_;
    NoiseSpec noise_;
    std::vector<std::pair<double, double>> domain_;
    Eigen::MatrixXd chol_;
};

/// h_j(a), checking the model's declared domain for alternative j.
inline double utility_value(const ChoiceModelSpec& model, std::size_t j, double a) {
    if (j >= model.alternatives()) throw InputError("alternative index out of range");
    if (!model.in_domain(j, a))
        throw DomainError("a = " + std::to_string(a) + " outside the domain of alternative " + std::to_string(j));
    return model.utility(j).value(a);
}

namespace detail {

inline void check_offer(const ChoiceModelSpec& model, std::span<const double> a) {
    if (a.size() != model.alternatives())
        throw InputError("offer vector has " + std::to_string(a.size()) + " entries, model has " +
                         std::to_string(model.alternatives()) + " alternatives");
    for (std::size_t j = 0; j < a.size(); ++j)
        if (!model.in_domain(j, a[j]))
            throw DomainError("a_" + std::to_string(j) + " = " + std::to_string(a[j]) + " outside the model domain");
}

} // namespace detail

/// Logit closed form q_j = exp(h_j/s) / sum_k exp(h_k/s); gumbel_iid only.
inline ProbVector choice_prob_closed_form(const ChoiceModelSpec& model, std::span<const double> a) {
    if (model.noise().kind != NoiseKind::gumbel_iid)
        throw InputError("no closed form for " + to_string(model.noise().kind) +
                         " noise; use choice_prob_monte_carlo");
    detail::check_offer(model, a);
    std::vector<double> u(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) u[j] = model.utility(j).value(a[j]) / model.noise().scale;
    const double m = *std::max_element(u.begin(), u.end());
    double z = 0.0;
    for (double& x : u) {
        x = std::exp(x - m);
        z += x;
    }
    for (double& x : u) x /= z;
    return ProbVector(std::move(u), 1e-12);
}

// ---------------------------------------------------------------------------
// Monte Carlo

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Per-stream seed derived from (seed, counter): streams do not depend on evaluation order.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t counter) {
    return splitmix64(splitmix64(seed) ^ splitmix64(counter + 0x632BE59BD9B4E019ULL));
}

inline double open_uniform(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

} // namespace detail

/// Frequencies of argmax_j [h_j(a_j) + eps_j] over n draws; ties go to the lowest index.
inline ProbVector choice_prob_monte_carlo(const ChoiceModelSpec& model, std::span<const double> a, std::size_t n,
                                          std::uint64_t seed) {
    if (n == 0) throw InputError("Monte Carlo draw count must be >= 1");
    detail::check_offer(model, a);
    const std::size_t d = model.alternatives();
    std::vector<double> h(d);
    for (std::size_t j = 0; j < d; ++j) h[j] = model.utility(j).value(a[j]);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    const double scale = model.noise().scale;
    const auto& L = model.cholesky();
    std::vector<std::size_t> counts(d, 0);
    std::vector<double> z(d), eps(d);
    for (std::size_t i = 0; i < n; ++i) {
        switch (model.noise().kind) {
        case NoiseKind::gumbel_iid:
            for (std::size_t j = 0; j < d; ++j) eps[j] = -scale * std::log(-std::log(detail::open_uniform(rng)));
            break;
        case NoiseKind::gaussian_iid:
            for (std::size_t j = 0; j < d; ++j) eps[j] = scale * normal(rng);
            break;
        case NoiseKind::gaussian_correlated:
            for (std::size_t j = 0; j < d; ++j) z[j] = normal(rng);
            for (std::size_t r = 0; r < d; ++r) {
                double acc = 0.0;
                for (std::size_t c = 0; c <= r; ++c)
                    acc += L(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * z[c];
                eps[r] = scale * acc;
            }
            break;
        }
        std::size_t best = 0;
        double best_u = h[0] + eps[0];
        for (std::size_t j = 1; j < d; ++j) {
            const double u = h[j] + eps[j];
            if (u > best_u) {
                best_u = u;
                best = j;
            }
        }
        ++counts[best];
    }
    std::vector<double> q(d);
    for (std::size_t j = 0; j < d; ++j) q[j] = static_cast<double>(counts[j]) / static_cast<double>(n);
    return ProbVector(std::move(q));
}

struct ClosedForm {};
struct MonteCarlo {
    std::size_t draws = 100000;
    std::uint64_t seed = 0;
};

/// Tabulates q at every node of `grid`. Monte Carlo node f uses stream (seed, f).
inline ProbabilityField tabulate(const ChoiceModelSpec& model, const GridSpec& grid,
                                 const std::variant<ClosedForm, MonteCarlo>& method) {
    if (grid.dims() != model.alternatives())
        throw InputError("grid has " + std::to_string(grid.dims()) + " axes, model has " +
                         std::to_string(model.alternatives()) + " alternatives");
    for (std::size_t k = 0; k < grid.dims(); ++k) {
        const auto& ax = grid.axis(k);
        if (!model.in_domain(k, ax.lo) || !model.in_domain(k, ax.hi))
            throw InputError("grid axis " + std::to_string(k) + " [" + std::to_string(ax.lo) + ", " +
                             std::to_string(ax.hi) + "] is not inside the model domain");
    }
    std::string provenance = "model:" + std::to_string(model.alternatives()) + "alt";
    const MonteCarlo* mc = std::get_if<MonteCarlo>(&method);
    provenance += mc ? ":monte_carlo:" + std::to_string(mc->draws) + ":" + std::to_string(mc->seed) : ":closed_form";
    std::size_t counter = 0;
    return ProbabilityField::from_function(
        grid,
        [&](std::span<const double> a) {
            const std::size_t f = counter++;
            const auto q = mc ? choice_prob_monte_carlo(model, a, mc->draws, detail::stream_seed(mc->seed, f))
                              : choice_prob_closed_form(model, a);
            return std::vector<double>(q.begin(), q.end());
        },
        provenance);
}

// ---------------------------------------------------------------------------
// JSON

inline UtilityKind utility_kind_from_string(const std::string& s) {
    if (s == "linear") return UtilityKind::linear;
    if (s == "log") return UtilityKind::log;
    if (s == "power") return UtilityKind::power;
    if (s == "polynomial") return UtilityKind::polynomial;
    throw InputError("unknown utility kind '" + s + "'");
}

inline NoiseKind noise_kind_from_string(const std::string& s) {
    if (s == "gumbel_iid") return NoiseKind::gumbel_iid;
    if (s == "gaussian_iid") return NoiseKind::gaussian_iid;
    if (s == "gaussian_correlated") return NoiseKind::gaussian_correlated;
    throw InputError("unknown noise kind '" + s + "'");
}

/// Parses {"alternatives": n, "utilities": [...], "noise": {...}, "domain": [[lo,hi], ...]}.
inline ChoiceModelSpec model_from_json(const nlohmann::json& doc) {
    try {
        if (!doc.is_object()) throw InputError("model document must be a JSON object");
        for (const char* key : {"alternatives", "utilities", "noise", "domain"})
            if (!doc.contains(key)) throw InputError(std::string("model document: missing field '") + key + "'");
        const auto n = doc.at("alternatives").get<long>();
        const auto& us = doc.at("utilities");
        if (!us.is_array()) throw InputError("model document: 'utilities' must be an array");
        if (n < 2) throw InputError("model document: 'alternatives' must be >= 2");
        if (us.size() != static_cast<std::size_t>(n))
            throw InputError("model document: 'utilities' has " + std::to_string(us.size()) +
                             " entries but 'alternatives' is " + std::to_string(n));
        std::vector<UtilityPrimitive> utilities;
        for (std::size_t j = 0; j < us.size(); ++j) {
            const auto& u = us[j];
            if (!u.contains("kind") || !u.contains("params"))
                throw InputError("model document: utilities[" + std::to_string(j) + "] needs 'kind' and 'params'");
            utilities.push_back({utility_kind_from_string(u.at("kind").get<std::string>()),
                                 u.at("params").get<std::vector<double>>()});
        }
        NoiseSpec noise;
        const auto& nz = doc.at("noise");
        noise.kind = noise_kind_from_string(nz.at("kind").get<std::string>());
        if (nz.contains("scale")) noise.scale = nz.at("scale").get<double>();
        if (nz.contains("correlation")) noise.correlation = nz.at("correlation").get<std::vector<std::vector<double>>>();
        std::vector<std::pair<double, double>> domain;
        for (const auto& d : doc.at("domain")) {
            if (!d.is_array() || d.size() != 2) throw InputError("model document: each domain entry must be [lo, hi]");
            domain.emplace_back(d[0].get<double>(), d[1].get<double>());
        }
        return ChoiceModelSpec(std::move(utilities), std::move(noise), std::move(domain));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("model document: ") + e.what());
    }
}

inline nlohmann::json to_json(const ChoiceModelSpec& m) {
    nlohmann::json doc;
    doc["alternatives"] = m.alternatives();
    for (const auto& u : m.utilities()) doc["utilities"].push_back({{"kind", to_string(u.kind)}, {"params", u.params}});
    doc["noise"] = {{"kind", to_string(m.noise().kind)}, {"scale", m.noise().scale}};
    if (!m.noise().correlation.empty()) doc["noise"]["correlation"] = m.noise().correlation;
    for (const auto& [lo, hi] : m.domain()) doc["domain"].push_back({lo, hi});
    return doc;
}

} // namespace rumid
