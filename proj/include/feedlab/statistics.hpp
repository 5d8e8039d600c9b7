#pragma once

// Small statistics toolkit: Student t and F tail probabilities, Welch's two-sample t-test and one-way ANOVA.

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace feedlab::stats {

template <std::floating_point T>
T mean(std::span<const T> values) {
    if (values.empty()) throw std::invalid_argument("mean of an empty sample");
    return std::accumulate(values.begin(), values.end(), T(0)) / static_cast<T>(values.size());
}

/// Unbiased sample variance (n - 1 denominator); zero for a single value.
template <std::floating_point T>
T sample_variance(std::span<const T> values) {
    if (values.size() < 2) return T(0);
    const T m = mean(values);
    T ss = 0;
    for (const T v : values) ss += (v - m) * (v - m);
    return ss / static_cast<T>(values.size() - 1);
}

/// P(|T| >= |t|) for Student's t with `df` degrees of freedom (df may be fractional).
template <std::floating_point T>
T student_t_two_sided_p(T t, T df) {
    if (!(df > 0)) throw std::domain_error("t distribution needs df > 0");
    if (std::isinf(t)) return T(0);
    return 2 * boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<T>(df), std::abs(t)));
}

/// P(F' >= f) for the F distribution with (d1, d2) degrees of freedom.
template <std::floating_point T>
T f_distribution_sf(T f, T d1, T d2) {
    if (!(d1 > 0) || !(d2 > 0)) throw std::domain_error("F distribution needs positive degrees of freedom");
    if (f <= 0) return T(1);
    if (std::isinf(f)) return T(0);
    return boost::math::cdf(boost::math::complement(boost::math::fisher_f_distribution<T>(d1, d2), f));
}

template <std::floating_point T>
struct WelchResult {
    T t = 0;
    T df = 0;
    std::optional<T> p_value;  ///< empty when either sample has a single value
};

/// Welch's unequal-variance two-sample t-test, two-sided.
template <std::floating_point T>
WelchResult<T> welch_t_test(std::span<const T> a, std::span<const T> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("Welch test needs two nonempty samples");
    WelchResult<T> out;
    const T diff = mean(a) - mean(b);
    if (a.size() < 2 || b.size() < 2) return out;

    const T va = sample_variance(a) / static_cast<T>(a.size());
    const T vb = sample_variance(b) / static_cast<T>(b.size());
    const T se2 = va + vb;
    if (se2 == 0) {
        out.t = diff == 0 ? T(0) : std::copysign(std::numeric_limits<T>::infinity(), diff);
        out.df = static_cast<T>(a.size() + b.size() - 2);
        out.p_value = diff == 0 ? T(1) : T(0);
        return out;
    }
    out.t = diff / std::sqrt(se2);
    const T na1 = static_cast<T>(a.size() - 1);
    const T nb1 = static_cast<T>(b.size() - 1);
    out.df = se2 * se2 / (va * va / na1 + vb * vb / nb1);
    out.p_value = student_t_two_sided_p(out.t, out.df);
    return out;
}

template <std::floating_point T>
struct AnovaResult {
    T f_statistic = 0;
    T df_between = 0;
    T df_within = 0;
    T p_value = 1;
    std::vector<T> group_means;
};

/// One-way ANOVA across groups. All-identical values give F = 0, p = 1.
template <std::floating_point T>
AnovaResult<T> one_way_anova(std::span<const std::vector<T>> groups) {
    if (groups.size() < 2) throw std::invalid_argument("ANOVA needs at least two groups");
    std::size_t total = 0;
    T grand = 0;
    AnovaResult<T> out;
    for (const auto& g : groups) {
        if (g.empty()) throw std::invalid_argument("ANOVA group is empty");
        total += g.size();
        grand += std::accumulate(g.begin(), g.end(), T(0));
        out.group_means.push_back(mean(std::span<const T>(g)));
    }
    grand /= static_cast<T>(total);
    if (total <= groups.size()) throw std::invalid_argument("ANOVA needs more observations than groups");

    T ss_between = 0;
    T ss_within = 0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        const T m = out.group_means[i];
        ss_between += static_cast<T>(groups[i].size()) * (m - grand) * (m - grand);
        for (const T v : groups[i]) ss_within += (v - m) * (v - m);
    }
    out.df_between = static_cast<T>(groups.size() - 1);
    out.df_within = static_cast<T>(total - groups.size());

    // Rounding noise below this scale is treated as exact equality.
    const T scale = std::max(T(1), std::abs(grand));
    const T negligible = T(64) * std::numeric_limits<T>::epsilon() * scale * scale * static_cast<T>(total);
    if (ss_between <= negligible) {
        out.f_statistic = 0;
        out.p_value = 1;
        return out;
    }
    if (ss_within <= negligible) {
        out.f_statistic = std::numeric_limits<T>::infinity();
        out.p_value = 0;
        return out;
    }
    out.f_statistic = (ss_between / out.df_between) / (ss_within / out.df_within);
    out.p_value = f_distribution_sf(out.f_statistic, out.df_between, out.df_within);
    return out;
}

}  // namespace feedlab::stats
