#ifndef GBMOPT_KINETICS_HPP
#define GBMOPT_KINETICS_HPP

// Bounded growth and proton-production terms
//   f1(u1, u2) = u1 (1 - u1) (1 - u2) / (1 + u1^2 + u2^2)^2
//   f2(u1, u2) = u1 u2 / (1 + u1^2 + u2^2)^2
// with closed-form first partials.

namespace gbm::kinetics {

struct Partials {
    double du1;
    double du2;
};

struct KineticsEval {
    double f1;
    double f2;
    double d1f1;
    double d2f1;
    double d1f2;
    double d2f2;
};

inline double eval_f1(double u1, double u2) noexcept {
    const double d = 1.0 + u1 * u1 + u2 * u2;
    return u1 * (1.0 - u1) * (1.0 - u2) / (d * d);
}

inline double eval_f2(double u1, double u2) noexcept {
    const double d = 1.0 + u1 * u1 + u2 * u2;
    return u1 * u2 / (d * d);
}

// For f = N / D^2 with D = 1 + u1^2 + u2^2: df = dN / D^2 - 4 N u / D^3.
inline Partials partials_f1(double u1, double u2) noexcept {
    const double d = 1.0 + u1 * u1 + u2 * u2;
    const double d2 = d * d;
    const double d3 = d2 * d;
    const double num = u1 * (1.0 - u1) * (1.0 - u2);
    return {(1.0 - 2.0 * u1) * (1.0 - u2) / d2 - 4.0 * num * u1 / d3,
            -u1 * (1.0 - u1) / d2 - 4.0 * num * u2 / d3};
}

inline Partials partials_f2(double u1, double u2) noexcept {
    const double d = 1.0 + u1 * u1 + u2 * u2;
    const double d2 = d * d;
    const double d3 = d2 * d;
    const double num = u1 * u2;
    return {u2 / d2 - 4.0 * num * u1 / d3, u1 / d2 - 4.0 * num * u2 / d3};
}

inline KineticsEval evaluate(double u1, double u2) noexcept {
    const auto p1 = partials_f1(u1, u2);
    const auto p2 = partials_f2(u1, u2);
    return {eval_f1(u1, u2), eval_f2(u1, u2), p1.du1, p1.du2, p2.du1, p2.du2};
}

}  // namespace gbm::kinetics

#endif
