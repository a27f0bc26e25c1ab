#include "dmatch/objective.hpp"

#include "dmatch/kde_kernels.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace dmatch {

namespace {

void fill_summary(ObjectiveEvaluation& ev, const QuadratureGrid& grid)
{
    const auto w = grid.weights();
    double tt = 0.0;
    double qq = 0.0;
    double tq = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        tt += w[i] * ev.target_trace[i] * ev.target_trace[i];
        qq += w[i] * ev.response_trace[i] * ev.response_trace[i];
        tq += w[i] * ev.target_trace[i] * ev.response_trace[i];
    }
    ev.value = distance_hat(ev.target_trace, ev.response_trace, grid);
    ev.normalized = ev.value / grid.length();
    ev.overlap = (tt > 0.0 && qq > 0.0) ? tq / std::sqrt(tt * qq) : 0.0;
}

// c_i = 2 w_i (t_i - q_i), the node weights of d d_hat / d q_i up to sign.
std::vector<double> residual_weights(const ObjectiveEvaluation& ev, const QuadratureGrid& grid)
{
    std::vector<double> c(grid.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        c[i] = 2.0 * grid.weight(i) * (ev.target_trace[i] - ev.response_trace[i]);
    }
    return c;
}

} // namespace

double distance_hat(std::span<const double> target, std::span<const double> response, const QuadratureGrid& grid)
{
    if (target.size() != grid.size() || response.size() != grid.size()) {
        throw std::invalid_argument(fmt::format("distance_hat: traces of length {} and {} on a {}-point grid",
                                                target.size(), response.size(), grid.size()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double d = target[i] - response[i];
        sum += d * d * grid.weight(i);
    }
    return sum;
}

std::vector<double> gradient_hat(std::span<const double> target, const KernelMatrices& mats,
                                 const QuadratureGrid& grid, const SensitivityMatrix& sens)
{
    const auto n_nodes = static_cast<Eigen::Index>(grid.size());
    if (static_cast<Eigen::Index>(target.size()) != n_nodes || mats.K.rows() != n_nodes
        || mats.Kprime.rows() != n_nodes) {
        throw std::invalid_argument("gradient_hat: node dimension mismatch");
    }
    if (mats.K.cols() != sens.fprime.rows() || mats.Kprime.cols() != sens.fprime.rows()) {
        throw std::invalid_argument(fmt::format("gradient_hat: {} kernel columns but {} sensitivity rows",
                                                mats.K.cols(), sens.fprime.rows()));
    }
    const Eigen::Map<const Eigen::VectorXd> t(target.data(), n_nodes);
    const Eigen::Map<const Eigen::VectorXd> w(grid.weights().data(), n_nodes);
    const Eigen::VectorXd weighted = 2.0 * w.cwiseProduct(t - mats.estimate());
    const Eigen::RowVectorXd g = (weighted.transpose() * mats.Kprime) * sens.fprime;
    return {g.data(), g.data() + g.size()};
}

SensitivityMatrix design_sensitivities(const ResponseModel& model, std::span<const double> s,
                                       std::span<const double> omegas)
{
    model.check_design(s);
    for (double w : omegas) {
        model.check_omega(w);
    }
    return {model.evaluate_batch(s, omegas, true).sensitivity};
}

BandwidthPolicy BandwidthPolicy::fixed(double h)
{
    if (!(h > 0.0)) {
        throw std::invalid_argument(fmt::format("bandwidth must be positive (got {})", h));
    }
    return {Mode::fixed, h};
}

// --- kernel density path ---------------------------------------------------

DensityObjective::DensityObjective(std::shared_ptr<const ResponseModel> model, const Distribution& target,
                                   QuadratureGrid grid, std::vector<double> omegas, BandwidthPolicy bandwidth,
                                   KernelBackend backend)
    : model_(std::move(model)), grid_(std::move(grid)), omegas_(std::move(omegas)), bandwidth_(bandwidth),
      backend_(backend)
{
    if (omegas_.empty()) {
        throw std::invalid_argument("density objective needs at least one uncertainty sample");
    }
    for (double w : omegas_) {
        model_->check_omega(w);
    }
    target_ = tabulate(grid_, [&](double x) { return target.pdf(x); });
}

void DensityObjective::set_bandwidth(BandwidthPolicy policy)
{
    bandwidth_ = policy;
}

double DensityObjective::bandwidth_at(std::span<const double> s) const
{
    if (bandwidth_.mode == BandwidthPolicy::Mode::fixed) {
        return bandwidth_.value;
    }
    model_->check_design(s);
    const auto batch = model_->evaluate_batch(s, omegas_, false);
    return scott_bandwidth(batch.values);
}

ObjectiveEvaluation DensityObjective::evaluate(std::span<const double> s, bool with_gradient) const
{
    model_->check_design(s);
    const ResponseBatch batch = model_->evaluate_batch(s, omegas_, with_gradient);
    const auto& f = batch.values;
    const std::size_t m = f.size();

    ObjectiveEvaluation ev;
    double sigma = 0.0;
    if (bandwidth_.mode == BandwidthPolicy::Mode::fixed) {
        ev.bandwidth = bandwidth_.value;
    } else {
        sigma = sample_std(f);
        if (!(sigma > 0.0)) {
            throw std::domain_error("Scott bandwidth undefined: responses have zero variance at this design");
        }
        ev.bandwidth = scott_bandwidth(m, sigma);
    }
    const double h = ev.bandwidth;

    ev.target_trace = target_;
    ev.response_trace.resize(grid_.size());
    if (backend_ == KernelBackend::parallel) {
        kernels::density_parallel(f, h, grid_, ev.response_trace);
    } else {
        kernels::density_reference(f, h, grid_, ev.response_trace);
    }
    fill_summary(ev, grid_);
    if (!with_gradient) {
        return ev;
    }

    const auto coeff = residual_weights(ev, grid_);
    Eigen::VectorXd per_sample(static_cast<Eigen::Index>(m));
    std::span<double> ps(per_sample.data(), m);
    const double dq_dh = backend_ == KernelBackend::parallel ? kernels::contract_parallel(f, h, grid_, coeff, ps)
                                                              : kernels::contract_reference(f, h, grid_, coeff, ps);
    if (bandwidth_.mode == BandwidthPolicy::Mode::scott && m > 1) {
        // d d_hat/dh = -dq_dh and dh/df_j = h (f_j - mean) / ((M - 1) sigma^2).
        double mean = 0.0;
        for (double v : f) {
            mean += v;
        }
        mean /= static_cast<double>(m);
        const double scale = -dq_dh * h / (static_cast<double>(m - 1) * sigma * sigma);
        for (std::size_t j = 0; j < m; ++j) {
            per_sample[static_cast<Eigen::Index>(j)] += scale * (f[j] - mean);
        }
    }
    const Eigen::VectorXd g = batch.sensitivity.transpose() * per_sample;
    ev.gradient.assign(g.data(), g.data() + g.size());
    return ev;
}

// --- closed-form path ------------------------------------------------------

AnalyticObjective::AnalyticObjective(std::shared_ptr<const ResponseModel> model, const Distribution& target,
                                     QuadratureGrid grid)
    : model_(std::move(model)), grid_(std::move(grid))
{
    if (!model_->has_analytic_density()) {
        throw std::invalid_argument(model_->name() + " has no closed-form response density");
    }
    target_ = tabulate(grid_, [&](double x) { return target.pdf(x); });
}

ObjectiveEvaluation AnalyticObjective::evaluate(std::span<const double> s, bool with_gradient) const
{
    model_->check_design(s);
    const std::size_t n = model_->dimension();
    const std::size_t nodes = grid_.size();
    ObjectiveEvaluation ev;
    ev.target_trace = target_;
    ev.response_trace.resize(nodes);
    Eigen::MatrixXd dq(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(n));
    std::vector<double> row(n);
    for (std::size_t i = 0; i < nodes; ++i) {
        ev.response_trace[i] = model_->analytic_density(s, grid_.node(i), row);
        for (std::size_t k = 0; k < n; ++k) {
            dq(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k];
        }
    }
    fill_summary(ev, grid_);
    if (with_gradient) {
        const auto coeff = residual_weights(ev, grid_);
        const Eigen::Map<const Eigen::VectorXd> c(coeff.data(), static_cast<Eigen::Index>(nodes));
        const Eigen::VectorXd g = -(dq.transpose() * c);
        ev.gradient.assign(g.data(), g.data() + g.size());
    }
    return ev;
}

} // namespace dmatch
