// Unknown-domain scoring: pretrain the VAE on labeled data only, score
// unlabeled reconstruction errors, fit a two-component 1-D Gaussian mixture by
// EM, and read the posterior of the high-error component as w_d. Also the
// weighted domain BCE that trains the non-adversarial discriminator.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "ussl/autograd.hpp"
#include "ussl/matrix.hpp"
#include "ussl/models.hpp"

namespace ussl {

struct VaePretrainResult {
    std::vector<double> loss_trace;  // per-epoch mean of recon + kl_weight * kl
};

// Mini-batch SGD on the VAE objective over labeled inputs only.
inline VaePretrainResult pretrain_vae(Vae& vae, const Matrix& labeled_inputs, std::size_t epochs,
                                      double lr, std::mt19937_64& rng,
                                      std::size_t batch_size = 32) {
    if (labeled_inputs.rows == 0)
        throw std::invalid_argument("pretrain_vae: no labeled inputs");
    VaePretrainResult result;
    const std::size_t n = labeled_inputs.rows;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < n; start += batch_size) {
            const std::size_t stop = std::min(n, start + batch_size);
            Matrix xb(stop - start, labeled_inputs.cols);
            for (std::size_t i = start; i < stop; ++i)
                for (std::size_t j = 0; j < labeled_inputs.cols; ++j)
                    xb(i - start, j) = labeled_inputs(order[i], j);
            Matrix eps(xb.rows, vae.spec.latent_dim);
            for (double& v : eps.data) v = gauss(rng);
            Tape t;
            VaeGraph g = vae_graph(t, vae, xb, &eps);
            epoch_loss += t.value(g.loss)(0, 0);
            ++steps;
            t.backward(g.loss);
            sgd_step(vae.store, lr);
        }
        result.loss_trace.push_back(epoch_loss / static_cast<double>(steps));
    }
    return result;
}

// Scoring mode (z = mu): deterministic per-sample squared reconstruction error.
inline std::vector<double> recon_errors(const Vae& vae, const Matrix& xs) {
    return vae_forward(vae, xs, nullptr).recon_sq;
}

struct GmmFit {
    double weight[2] = {0.5, 0.5};
    double mean[2] = {0.0, 0.0};
    double variance[2] = {1.0, 1.0};
    std::vector<double> log_likelihood;  // one entry per EM iteration
    int ukd_component = 0;               // component with the larger mean
};

namespace detail {

inline double log_normal_pdf(double x, double mean, double var) {
    const double d = x - mean;
    return -0.5 * (std::log(2.0 * M_PI * var) + d * d / var);
}

}  // namespace detail

// 1-D EM with deterministic initialization: component means at the 25th/75th
// percentiles, pooled variance, equal weights. Variances are floored at 1e-6.
inline GmmFit fit_gmm2(const std::vector<double>& errors, std::size_t max_iters, double tol,
                       std::uint64_t seed) {
    (void)seed;  // initialization is deterministic; kept for interface stability
    if (errors.size() < 4) throw std::invalid_argument("fit_gmm2: need at least 4 points");
    if (max_iters < 1) throw std::invalid_argument("fit_gmm2: max_iters must be >= 1");
    if (tol <= 0.0) throw std::invalid_argument("fit_gmm2: tol must be positive");
    const std::size_t n = errors.size();

    std::vector<double> sorted = errors;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.back() - sorted.front() < 1e-12)
        throw std::invalid_argument("fit_gmm2: degenerate input (all values identical)");

    GmmFit fit;
    fit.mean[0] = sorted[n / 4];
    fit.mean[1] = sorted[(3 * n) / 4];
    double pooled_mean = 0.0;
    for (double v : errors) pooled_mean += v;
    pooled_mean /= static_cast<double>(n);
    double pooled_var = 0.0;
    for (double v : errors) pooled_var += (v - pooled_mean) * (v - pooled_mean);
    pooled_var = std::max(1e-6, pooled_var / static_cast<double>(n));
    fit.variance[0] = fit.variance[1] = pooled_var;

    std::vector<double> resp(n);  // responsibility of component 1
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double l0 = std::log(fit.weight[0]) +
                              detail::log_normal_pdf(errors[i], fit.mean[0], fit.variance[0]);
            const double l1 = std::log(fit.weight[1]) +
                              detail::log_normal_pdf(errors[i], fit.mean[1], fit.variance[1]);
            const double mx = std::max(l0, l1);
            const double lse = mx + std::log(std::exp(l0 - mx) + std::exp(l1 - mx));
            resp[i] = std::exp(l1 - lse);
            ll += lse;
        }
        fit.log_likelihood.push_back(ll);
        if (fit.log_likelihood.size() >= 2 &&
            ll - fit.log_likelihood[fit.log_likelihood.size() - 2] < tol)
            break;

        double n1 = 0.0;
        for (double r : resp) n1 += r;
        const double n0 = static_cast<double>(n) - n1;
        if (n0 <= 0.0 || n1 <= 0.0)
            throw std::invalid_argument("fit_gmm2: component collapsed to zero weight");
        double m0 = 0.0, m1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            m0 += (1.0 - resp[i]) * errors[i];
            m1 += resp[i] * errors[i];
        }
        m0 /= n0;
        m1 /= n1;
        double v0 = 0.0, v1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            v0 += (1.0 - resp[i]) * (errors[i] - m0) * (errors[i] - m0);
            v1 += resp[i] * (errors[i] - m1) * (errors[i] - m1);
        }
        fit.weight[0] = n0 / static_cast<double>(n);
        fit.weight[1] = n1 / static_cast<double>(n);
        fit.mean[0] = m0;
        fit.mean[1] = m1;
        fit.variance[0] = std::max(1e-6, v0 / n0);
        fit.variance[1] = std::max(1e-6, v1 / n1);
    }
    fit.ukd_component = fit.mean[1] >= fit.mean[0] ? 1 : 0;
    return fit;
}

// Posterior probability that l_re came from the high-error component.
inline double posterior_ukd(const GmmFit& fit, double l_re) {
    const int u = fit.ukd_component;
    const int o = 1 - u;
    const double lu = std::log(fit.weight[u]) +
                      detail::log_normal_pdf(l_re, fit.mean[u], fit.variance[u]);
    const double lo = std::log(fit.weight[o]) +
                      detail::log_normal_pdf(l_re, fit.mean[o], fit.variance[o]);
    return 1.0 / (1.0 + std::exp(lo - lu));
}

struct UkdScores {
    std::vector<double> l_re;
    std::vector<double> w_d;
};

inline UkdScores score_unlabeled_domain(const Vae& vae, const GmmFit& fit, const Matrix& xs) {
    UkdScores out;
    out.l_re = recon_errors(vae, xs);
    out.w_d.resize(out.l_re.size());
    for (std::size_t i = 0; i < out.l_re.size(); ++i)
        out.w_d[i] = posterior_ukd(fit, out.l_re[i]);
    return out;
}

// BCE with hard target 0 for labeled outputs (known domain) and soft target
// w_d for unlabeled outputs. Either side may be empty.
inline Tape::Var domain_loss(Tape& t, Tape::Var yhat_l, Tape::Var yhat_u, const Matrix& w_d) {
    const std::size_t nl = t.value(yhat_l).rows;
    const std::size_t nu = t.value(yhat_u).rows;
    if (t.value(yhat_u).data.size() != w_d.data.size())
        shape_error("domain_loss weights", t.value(yhat_u), w_d);
    Tape::Var loss{};
    bool have = false;
    if (nl > 0) {
        loss = t.bce(yhat_l, Matrix(nl, 1, 0.0), Matrix(nl, 1, 1.0));
        have = true;
    }
    if (nu > 0) {
        Matrix targets(nu, 1);
        targets.data = w_d.data;
        Tape::Var term = t.bce(yhat_u, targets, Matrix(nu, 1, 1.0));
        loss = have ? t.add(loss, term) : term;
        have = true;
    }
    if (!have) throw std::invalid_argument("domain_loss: both sides empty");
    return loss;
}

inline double domain_loss(const Matrix& yhat_l, const Matrix& yhat_u, const Matrix& w_d) {
    Tape t;
    return t.value(domain_loss(t, t.constant(yhat_l), t.constant(yhat_u), w_d))(0, 0);
}

}  // namespace ussl
