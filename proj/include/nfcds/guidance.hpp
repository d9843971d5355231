#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nfcds/degradation.hpp"
#include "nfcds/error.hpp"
#include "nfcds/fft.hpp"
#include "nfcds/image.hpp"
#include "nfcds/schedule.hpp"

namespace nfcds {

enum class GuidanceKind { DDNRLG, LeastSquares, Proximal };
enum class SolverKind { Auto, Dense, FFTDiagonal, ConjugateGradient };

/// How the guidance scale varies across timesteps.
enum class MuSchedule {
    Constant,  // mu_t = mu
    /// mu_t = mu * (1 - ab_t) / sqrt(ab_t). With mu = 1 the DD-NRLG step becomes
    /// the Tweedie correction x0|t + (1-ab)/ab A^T(...)^-1 (y - A x0|t).
    Tweedie,
    Table,  // mu_t = mu * table(t), step function over timestep breakpoints
};

struct GuidanceSpec {
    GuidanceKind kind = GuidanceKind::DDNRLG;
    double mu = 1.0;
    MuSchedule mu_schedule = MuSchedule::Tweedie;
    std::vector<std::pair<int, double>> mu_table;
    SolverKind solver = SolverKind::Auto;
    int cg_max_iter = 500;
    double cg_tol = 1e-10;

    void validate() const {
        detail::check<ConfigError>(std::isfinite(mu) && mu >= 0, "guidance.mu must be >= 0");
        detail::check<ConfigError>(cg_max_iter >= 1, "guidance.cg_max_iter must be >= 1");
        detail::check<ConfigError>(cg_tol > 0, "guidance.cg_tol must be > 0");
        if (mu_schedule == MuSchedule::Table)
            detail::check<ConfigError>(!mu_table.empty(), "guidance.mu_table is empty");
    }

    [[nodiscard]] double mu_at(int t, const NoiseSchedule& sched) const {
        switch (mu_schedule) {
            case MuSchedule::Constant: return mu;
            case MuSchedule::Tweedie: {
                const double ab = sched.alpha_bar_at(t);
                return mu * (1.0 - ab) / std::sqrt(ab);
            }
            case MuSchedule::Table: {
                double w = mu_table.front().second;
                for (const auto& [step, v] : mu_table) {
                    if (step <= t) w = v;
                    else break;
                }
                return mu * w;
            }
        }
        return mu;
    }
};

/// Solver diagnostics of one guidance evaluation.
struct SolveInfo {
    SolverKind used = SolverKind::Auto;
    bool regularized = false;  // 1e-12 floor was added to a singular system
    int iterations = 0;
    double relative_residual = 0.0;
};

inline constexpr double kSingularFloor = 1e-12;

namespace detail {

inline SolverKind resolve_solver(SolverKind requested, const DegradationModel& model) {
    if (requested != SolverKind::Auto) return requested;
    return model.is_downsample() ? SolverKind::ConjugateGradient : SolverKind::FFTDiagonal;
}

/// Solve (scale * A A^T + shift I) u = r on measurement space.
inline ImageTensor solve_measurement_system(const DegradationModel& model, const Shape& signal, double scale, double shift,
                                            const ImageTensor& r, SolverKind solver, int max_iter, double tol,
                                            SolveInfo& info) {
    info.used = solver;
    switch (solver) {
        case SolverKind::FFTDiagonal: {
            auto tf = transfer_function(model, signal.height, signal.width);
            check<ConfigError>(tf.has_value(), "FFT-diagonal solver requires a circulant operator (identity or blur)");
            std::vector<double> den(tf->size());
            double dmax = 0, dmin = INFINITY;
            for (std::size_t k = 0; k < den.size(); ++k) {
                den[k] = scale * std::norm((*tf)[k]) + shift;
                dmax = std::max(dmax, den[k]);
                dmin = std::min(dmin, den[k]);
            }
            if (!(dmin > 1e-14 * dmax) || dmax == 0) {
                info.regularized = true;
                for (auto& d : den) d += kSingularFloor;
            }
            fft::Plan2d plan(r.height(), r.width());
            ImageTensor u(r.shape());
            for (std::size_t c = 0; c < r.channels(); ++c) {
                const auto pl = r.plane(c);
                std::vector<std::complex<double>> buf(pl.begin(), pl.end());
                plan.forward(buf);
                for (std::size_t k = 0; k < buf.size(); ++k) buf[k] /= den[k];
                plan.inverse(buf);
                std::vector<double> re(buf.size());
                for (std::size_t k = 0; k < buf.size(); ++k) re[k] = buf[k].real();
                u.set_plane(c, re);
            }
            return u;
        }
        case SolverKind::Dense: {
            const Eigen::MatrixXd m = materialize_dense(model, signal.height, signal.width, 1);
            Eigen::MatrixXd s = scale * (m * m.transpose());
            s.diagonal().array() += shift;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
            if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-14)) {
                info.regularized = true;
                s.diagonal().array() += kSingularFloor;
                ldlt.compute(s);
            }
            ImageTensor u(r.shape());
            for (std::size_t c = 0; c < r.channels(); ++c) {
                const auto pl = r.plane(c);
                const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(pl.data(), static_cast<Eigen::Index>(pl.size()));
                const Eigen::VectorXd x = ldlt.solve(b);
                u.set_plane(c, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
            }
            return u;
        }
        case SolverKind::ConjugateGradient:
        case SolverKind::Auto: {
            const auto op = [&](const ImageTensor& v) {
                return axpby(scale, apply(model, adjoint(model, v, signal)), shift, v);
            };
            ImageTensor u(r.shape());
            const double bnorm = norm(r);
            if (bnorm == 0) return u;
            ImageTensor res = r;
            ImageTensor p = res;
            double rr = squared_norm(res);
            for (int it = 1; it <= max_iter; ++it) {
                const auto ap = op(p);
                const double pap = dot(p, ap);
                if (!(pap > 0)) {
                    // Singular direction: regularize once and restart from the current iterate.
                    if (info.regularized)
                        throw NumericalError("conjugate gradient breakdown (p^T S p = " + std::to_string(pap) + ")");
                    info.regularized = true;
                    shift += kSingularFloor;
                    res = r - op(u);
                    p = res;
                    rr = squared_norm(res);
                    continue;
                }
                const double a = rr / pap;
                u = axpby(1.0, u, a, p);
                res = axpby(1.0, res, -a, ap);
                const double rr_new = squared_norm(res);
                info.iterations = it;
                info.relative_residual = std::sqrt(rr_new) / bnorm;
                if (info.relative_residual < tol) return u;
                p = axpby(1.0, res, rr_new / rr, p);
                rr = rr_new;
            }
            throw NumericalError("conjugate gradient did not converge in " + std::to_string(max_iter) +
                                 " iterations (relative residual " + std::to_string(info.relative_residual) + ")");
        }
    }
    return r;
}

}  // namespace detail

/// grad = -(1/sqrt(ab)) A^T ((1-ab)/ab A A^T + sigma_y^2 I)^-1 (y - A x0t)
inline ImageTensor ddnrlg_gradient(const ImageTensor& x0t, const ImageTensor& y, const DegradationModel& model,
                                   const NoiseSchedule& sched, int t, const GuidanceSpec& spec = {},
                                   SolveInfo* info = nullptr) {
    detail::check<ShapeError>(model.measurement_shape(x0t.shape()) == y.shape(),
                              "measurement shape " + to_string(y.shape()) + " incompatible with estimate " +
                                  to_string(x0t.shape()));
    const double ab = sched.alpha_bar_at(t);
    const double c = (1.0 - ab) / ab;
    const auto r = y - apply(model, x0t);
    SolveInfo local;
    const auto u = detail::solve_measurement_system(model, x0t.shape(), c, model.sigma_y * model.sigma_y, r,
                                                    detail::resolve_solver(spec.solver, model), spec.cg_max_iter,
                                                    spec.cg_tol, info ? *info : local);
    return adjoint(model, u, x0t.shape()) * (-1.0 / std::sqrt(ab));
}

/// grad of 0.5 ||A x - y||^2
inline ImageTensor least_squares_gradient(const ImageTensor& x0t, const ImageTensor& y, const DegradationModel& model) {
    return adjoint(model, apply(model, x0t) - y, x0t.shape());
}

/// prox of 0.5 mu ||A z - y||^2 at x: (I + mu A^T A)^-1 (x + mu A^T y).
/// Computed through the measurement-space identity
///   z = x + mu A^T (I + mu A A^T)^-1 (y - A x).
inline ImageTensor proximal_step(const ImageTensor& x, const ImageTensor& y, const DegradationModel& model, double mu,
                                 const GuidanceSpec& spec = {}, SolveInfo* info = nullptr) {
    const auto r = y - apply(model, x);
    SolveInfo local;
    const auto u = detail::solve_measurement_system(model, x.shape(), mu, 1.0, r, detail::resolve_solver(spec.solver, model),
                                                    spec.cg_max_iter, spec.cg_tol, info ? *info : local);
    return axpby(1.0, x, mu, adjoint(model, u, x.shape()));
}

/// x_hat = x0t - mu_t * grad (or the exact proximal point for Proximal).
inline ImageTensor apply_guidance(const ImageTensor& x0t, const ImageTensor& y, const GuidanceSpec& spec,
                                  const DegradationModel& model, const NoiseSchedule& sched, int t,
                                  SolveInfo* info = nullptr) {
    spec.validate();
    const double mu = spec.mu_at(t, sched);
    if (mu == 0.0) return x0t;
    switch (spec.kind) {
        case GuidanceKind::DDNRLG:
            return axpby(1.0, x0t, -mu, ddnrlg_gradient(x0t, y, model, sched, t, spec, info));
        case GuidanceKind::LeastSquares:
            return axpby(1.0, x0t, -mu, least_squares_gradient(x0t, y, model));
        case GuidanceKind::Proximal:
            return proximal_step(x0t, y, model, mu, spec, info);
    }
    return x0t;
}

}  // namespace nfcds
