#pragma once

// Derivative-free minimization (Nelder-Mead simplex).

#include <Eigen/Core>

#include <algorithm>
#include <vector>

namespace feedlab {

template <typename Scalar, int Dim>
struct NelderMeadResult {
    Eigen::Matrix<Scalar, Dim, 1> x;
    Scalar value{};
    int iterations = 0;
    bool converged = false;
};

/// Minimizes `f` from `start` with an axis-aligned initial simplex of edge `step`. Stops when every
/// vertex lies within `tolerance` of the best one, or after `max_iterations`.
template <typename Scalar, int Dim, typename Function>
NelderMeadResult<Scalar, Dim> nelder_mead(Function&& f, const Eigen::Matrix<Scalar, Dim, 1>& start, Scalar step,
                                          Scalar tolerance = Scalar(1e-8), int max_iterations = 10000) {
    using Vector = Eigen::Matrix<Scalar, Dim, 1>;
    const auto n = start.size();
    std::vector<Vector> simplex(static_cast<std::size_t>(n + 1), start);
    std::vector<Scalar> values(static_cast<std::size_t>(n + 1));
    for (Eigen::Index i = 0; i < n; ++i) simplex[static_cast<std::size_t>(i + 1)](i) += step;
    for (std::size_t i = 0; i < simplex.size(); ++i) values[i] = f(simplex[i]);

    std::vector<std::size_t> order(simplex.size());
    NelderMeadResult<Scalar, Dim> out;
    for (out.iterations = 0; out.iterations < max_iterations; ++out.iterations) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[order.size() - 2];

        Scalar diameter = 0;
        for (std::size_t i = 0; i < simplex.size(); ++i)
            diameter = std::max(diameter, (simplex[i] - simplex[best]).cwiseAbs().maxCoeff());
        if (diameter < tolerance) {
            out.converged = true;
            break;
        }

        Vector centroid = Vector::Zero(n);
        for (std::size_t i = 0; i < simplex.size(); ++i) {
            if (i != worst) centroid += simplex[i];
        }
        centroid /= static_cast<Scalar>(n);

        const Vector reflected = centroid + (centroid - simplex[worst]);
        const Scalar fr = f(reflected);
        if (fr < values[best]) {
            const Vector expanded = centroid + Scalar(2) * (centroid - simplex[worst]);
            const Scalar fe = f(expanded);
            if (fe < fr) {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
            continue;
        }
        if (fr < values[second]) {
            simplex[worst] = reflected;
            values[worst] = fr;
            continue;
        }
        const bool outside = fr < values[worst];
        const Vector contracted = outside ? Vector(centroid + Scalar(0.5) * (reflected - centroid))
                                          : Vector(centroid + Scalar(0.5) * (simplex[worst] - centroid));
        const Scalar fc = f(contracted);
        if (fc < (outside ? fr : values[worst])) {
            simplex[worst] = contracted;
            values[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i < simplex.size(); ++i) {
            if (i == best) continue;
            simplex[i] = simplex[best] + Scalar(0.5) * (simplex[i] - simplex[best]);
            values[i] = f(simplex[i]);
        }
    }
    const auto best = static_cast<std::size_t>(std::ranges::min_element(values) - values.begin());
    out.x = simplex[best];
    out.value = values[best];
    return out;
}

}  // namespace feedlab
