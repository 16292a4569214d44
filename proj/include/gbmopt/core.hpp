#ifndef GBMOPT_CORE_HPP
#define GBMOPT_CORE_HPP

// Cell-centred uniform grids, scalar fields and the zero-flux discrete calculus
// shared by the state, adjoint and gradient code.
//
// Layout: cell (i, j) with i along x1 and j along x2 lives at index j * nx + i
// and has its centre at ((i + 1/2) hx, (j + 1/2) hy). Gradients live on cell
// faces; the faces on the domain boundary carry zero normal flux, so
// div(grad f) is the 5-point Neumann Laplacian and sums telescope exactly.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gbm {

enum class ErrorKind { config, io, shape, instability, stall, invalid_argument };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Instability raised by a time stepper; carries the index of the failing step.
class InstabilityError : public Error {
public:
    InstabilityError(std::size_t step, const std::string& what)
        : Error(ErrorKind::instability, what + " (step " + std::to_string(step) + ")"), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

struct Grid2D {
    std::size_t nx = 3;
    std::size_t ny = 3;
    double hx = 0.1;
    double hy = 0.1;

    std::size_t size() const noexcept { return nx * ny; }
    double cell_measure() const noexcept { return hx * hy; }
    double area() const noexcept { return static_cast<double>(size()) * cell_measure(); }
    std::size_t index(std::size_t i, std::size_t j) const noexcept { return j * nx + i; }
    double x(std::size_t i) const noexcept { return (static_cast<double>(i) + 0.5) * hx; }
    double y(std::size_t j) const noexcept { return (static_cast<double>(j) + 0.5) * hy; }

    void validate() const {
        if (nx < 3 || ny < 3)
            throw Error(ErrorKind::config, "grid needs at least 3 cells per direction");
        if (!(hx > 0.0) || !(hy > 0.0) || !std::isfinite(hx) || !std::isfinite(hy))
            throw Error(ErrorKind::config, "grid spacing must be positive");
    }

    friend bool operator==(const Grid2D&, const Grid2D&) = default;
};

class TimeGrid {
public:
    TimeGrid() = default;
    TimeGrid(std::size_t nt, double tau) : nt_(nt), tau_(tau) {
        if (!(tau > 0.0) || !std::isfinite(tau))
            throw Error(ErrorKind::config, "time step must be positive");
    }
    static TimeGrid from_final_time(double final_time, std::size_t nt) {
        if (nt == 0) throw Error(ErrorKind::config, "cannot split a time interval into 0 steps");
        return TimeGrid(nt, final_time / static_cast<double>(nt));
    }

    std::size_t steps() const noexcept { return nt_; }
    double tau() const noexcept { return tau_; }
    double final_time() const noexcept { return tau_ * static_cast<double>(nt_); }
    double time(std::size_t n) const noexcept { return tau_ * static_cast<double>(n); }

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
    std::size_t nt_ = 100;
    double tau_ = 0.1;
};

inline void require_same_grid(const Grid2D& a, const Grid2D& b, const char* what) {
    if (!(a == b)) throw Error(ErrorKind::shape, std::string("grid mismatch in ") + what);
}

class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(const Grid2D& grid, double value = 0.0) : grid_(grid), values_(grid.size(), value) {}
    ScalarField(const Grid2D& grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
        if (values_.size() != grid_.size())
            throw Error(ErrorKind::shape, "field value count does not match grid");
    }

    /// Samples f at the cell centres.
    static ScalarField from_function(const Grid2D& grid, const std::function<double(double, double)>& f) {
        ScalarField out(grid);
        for (std::size_t j = 0; j < grid.ny; ++j)
            for (std::size_t i = 0; i < grid.nx; ++i) out(i, j) = f(grid.x(i), grid.y(j));
        return out;
    }

    const Grid2D& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }
    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    const std::vector<double>& data() const noexcept { return values_; }

    double& operator[](std::size_t k) noexcept { return values_[k]; }
    double operator[](std::size_t k) const noexcept { return values_[k]; }
    double& operator()(std::size_t i, std::size_t j) noexcept { return values_[grid_.index(i, j)]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return values_[grid_.index(i, j)]; }

    bool all_finite() const noexcept {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }
    double min() const noexcept { return *std::min_element(values_.begin(), values_.end()); }
    double max() const noexcept { return *std::max_element(values_.begin(), values_.end()); }

    ScalarField& operator+=(const ScalarField& o) {
        require_same_grid(grid_, o.grid_, "field +=");
        for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
        return *this;
    }
    ScalarField& operator-=(const ScalarField& o) {
        require_same_grid(grid_, o.grid_, "field -=");
        for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
        return *this;
    }
    ScalarField& operator*=(double a) noexcept {
        for (double& v : values_) v *= a;
        return *this;
    }
    /// this += a * x
    ScalarField& axpy(double a, const ScalarField& x) {
        require_same_grid(grid_, x.grid_, "field axpy");
        for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += a * x.values_[k];
        return *this;
    }

    friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
    friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
    friend ScalarField operator*(double s, ScalarField a) { return a *= s; }

    friend bool operator==(const ScalarField&, const ScalarField&) = default;

private:
    Grid2D grid_;
    std::vector<double> values_;
};

/// Time-indexed sequence of fields, slice n at t_n.
using FieldSeries = std::vector<ScalarField>;

inline FieldSeries constant_series(const Grid2D& grid, std::size_t slices, double value) {
    return FieldSeries(slices, ScalarField(grid, value));
}

/// Face-centred vector field. fx holds the (nx + 1) x ny faces normal to x1
/// (face i sits between cells i - 1 and i); fy holds the nx x (ny + 1) faces
/// normal to x2. Boundary faces are the first and last of each line.
struct FaceField {
    Grid2D grid;
    std::vector<double> fx;
    std::vector<double> fy;

    FaceField() = default;
    explicit FaceField(const Grid2D& g, double value = 0.0)
        : grid(g), fx((g.nx + 1) * g.ny, value), fy(g.nx * (g.ny + 1), value) {}

    double& x_face(std::size_t i, std::size_t j) noexcept { return fx[j * (grid.nx + 1) + i]; }
    double x_face(std::size_t i, std::size_t j) const noexcept { return fx[j * (grid.nx + 1) + i]; }
    double& y_face(std::size_t i, std::size_t j) noexcept { return fy[j * grid.nx + i]; }
    double y_face(std::size_t i, std::size_t j) const noexcept { return fy[j * grid.nx + i]; }

    /// Zeroes the normal component on the domain boundary.
    void clear_boundary() noexcept {
        for (std::size_t j = 0; j < grid.ny; ++j) x_face(0, j) = x_face(grid.nx, j) = 0.0;
        for (std::size_t i = 0; i < grid.nx; ++i) y_face(i, 0) = y_face(i, grid.ny) = 0.0;
    }
};

/// Face gradient; boundary faces are zero (homogeneous Neumann).
inline FaceField grad(const ScalarField& f) {
    const Grid2D& g = f.grid();
    FaceField out(g);
    for (std::size_t j = 0; j < g.ny; ++j)
        for (std::size_t i = 1; i < g.nx; ++i) out.x_face(i, j) = (f(i, j) - f(i - 1, j)) / g.hx;
    for (std::size_t j = 1; j < g.ny; ++j)
        for (std::size_t i = 0; i < g.nx; ++i) out.y_face(i, j) = (f(i, j) - f(i, j - 1)) / g.hy;
    return out;
}

/// Cell divergence of a face field. Conservative: the sum over cells reduces
/// to the boundary faces, so it vanishes when the normal flux does.
inline ScalarField div(const FaceField& v) {
    const Grid2D& g = v.grid;
    if (v.fx.size() != (g.nx + 1) * g.ny || v.fy.size() != g.nx * (g.ny + 1))
        throw Error(ErrorKind::shape, "face field does not match its grid");
    ScalarField out(g);
    for (std::size_t j = 0; j < g.ny; ++j)
        for (std::size_t i = 0; i < g.nx; ++i)
            out(i, j) = (v.x_face(i + 1, j) - v.x_face(i, j)) / g.hx + (v.y_face(i, j + 1) - v.y_face(i, j)) / g.hy;
    return out;
}

/// 5-point Laplacian with mirrored ghost cells; identical to div(grad(f)).
inline ScalarField laplace_neumann(const ScalarField& f) {
    const Grid2D& g = f.grid();
    ScalarField out(g);
    const double ax = 1.0 / (g.hx * g.hx);
    const double ay = 1.0 / (g.hy * g.hy);
    for (std::size_t j = 0; j < g.ny; ++j) {
        for (std::size_t i = 0; i < g.nx; ++i) {
            const double c = f(i, j);
            double s = 0.0;
            if (i > 0) s += ax * (f(i - 1, j) - c);
            if (i + 1 < g.nx) s += ax * (f(i + 1, j) - c);
            if (j > 0) s += ay * (f(i, j - 1) - c);
            if (j + 1 < g.ny) s += ay * (f(i, j + 1) - c);
            out(i, j) = s;
        }
    }
    return out;
}

inline double inner(const ScalarField& f, const ScalarField& g) {
    require_same_grid(f.grid(), g.grid(), "inner");
    double s = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) s += f[k] * g[k];
    return s * f.grid().cell_measure();
}

/// Inner product of face fields with the same cell-measure weighting.
inline double inner(const FaceField& a, const FaceField& b) {
    require_same_grid(a.grid, b.grid, "face inner");
    double s = 0.0;
    for (std::size_t k = 0; k < a.fx.size(); ++k) s += a.fx[k] * b.fx[k];
    for (std::size_t k = 0; k < a.fy.size(); ++k) s += a.fy[k] * b.fy[k];
    return s * a.grid.cell_measure();
}

inline double integral(const ScalarField& f) {
    double s = 0.0;
    for (double v : f.values()) s += v;
    return s * f.grid().cell_measure();
}

inline double norm_l2(const ScalarField& f) { return std::sqrt(inner(f, f)); }

inline double norm_linf(const ScalarField& f) {
    double m = 0.0;
    for (double v : f.values()) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace gbm

#endif
