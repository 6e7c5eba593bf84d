#pragma once

#include <sstream>
#include <string>
#include <type_traits>
#include <utility>

#include "errors.hpp"

namespace qtgeom {

/// Finite-difference scheme for derivatives with respect to intensive parameters.
/// Order 4 is the Richardson extrapolation of two central differences, i.e. the
/// five-point stencil.
struct FDScheme {
    double step = 1e-5;
    int order = 4;

    void validate() const {
        if (!(step >= 1e-8 && step <= 1e-2)) {
            std::ostringstream os;
            os << "finite-difference step " << step << " outside [1e-8, 1e-2]";
            throw ConfigError(os.str());
        }
        if (order != 2 && order != 4) {
            throw ConfigError("finite-difference order must be 2 or 4, got " + std::to_string(order));
        }
    }
};

/// d f / dx at x. Works for any value type closed under subtraction and scaling
/// (doubles, Eigen matrices).
template <typename F>
auto central_difference(F&& f, double x, double h, int order) {
    using R = std::decay_t<decltype(f(x))>;
    if (order == 2) {
        R d = (f(x + h) - f(x - h)) / (2.0 * h);
        return d;
    }
    R d = (8.0 * (f(x + h) - f(x - h)) - (f(x + 2.0 * h) - f(x - 2.0 * h))) / (12.0 * h);
    return d;
}

template <typename F>
auto central_difference(F&& f, double x, const FDScheme& scheme) {
    return central_difference(std::forward<F>(f), x, scheme.step, scheme.order);
}

}  // namespace qtgeom
