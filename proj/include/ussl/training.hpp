// The unified optimization: cross-entropy warm-up, then consistency
// regularization weighted by w_uc plus adversarial domain adaptation weighted
// by w_ud * w_uc through gradient reversal, with the non-adversarial
// discriminator trained on detached features throughout.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ussl/autograd.hpp"
#include "ussl/domain_sep.hpp"
#include "ussl/matrix.hpp"
#include "ussl/models.hpp"
#include "ussl/outlier_score.hpp"
#include "ussl/rng.hpp"
#include "ussl/synthdata.hpp"

namespace ussl {

struct TrainConfig {
    std::size_t total_epochs = 200;
    std::size_t warmup_epochs = 80;
    double lr = 3e-4;
    std::size_t batch_size = 32;
    double alpha_max = 0.1;  // adversarial coefficient, applied as reversal strength
    double beta_max = 1.0;   // consistency coefficient
    AugmentConfig aug{0.3, 0.05};
    std::uint64_t seed = 1;

    void validate() const {
        if (warmup_epochs > total_epochs)
            throw std::invalid_argument("TrainConfig: warmup_epochs > total_epochs");
        if (lr <= 0.0) throw std::invalid_argument("TrainConfig: lr must be positive");
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
        if (alpha_max < 0.0 || beta_max < 0.0)
            throw std::invalid_argument("TrainConfig: negative coefficient");
        aug.validate();
    }
};

struct EpochStats {
    double l_ce = 0.0;
    double l_ssl = 0.0;
    double l_adv = 0.0;
    double l_dom = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double mean_w_uc = 0.0;
    double mean_w_d = 0.0;
};

using LossBreakdown = std::vector<EpochStats>;

// exp(-5 (1 - t)^2) with t = min(epoch / warmup, 1); reaches 1 at the warm-up
// boundary and stays there.
inline double rampup(std::size_t epoch, std::size_t warmup_epochs) {
    if (warmup_epochs == 0) return 1.0;
    const double t = std::min(1.0, static_cast<double>(epoch) / static_cast<double>(warmup_epochs));
    return std::exp(-5.0 * (1.0 - t) * (1.0 - t));
}

// Pi-model consistency: two fresh augmented views per sample, squared L2
// between the two prediction rows, weighted per sample by w_uc.
inline Tape::Var consistency_loss(Tape& t, ModelBundle& bundle, const Matrix& x_u,
                                  const Matrix& w_uc, const AugmentConfig& aug,
                                  std::mt19937_64& rng) {
    const std::size_t n = x_u.rows;
    Matrix view1(n, x_u.cols), view2(n, x_u.cols);
    std::vector<double> xi(x_u.cols);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < x_u.cols; ++j) xi[j] = x_u(i, j);
        const std::vector<double> v1 = augment(xi, aug, rng);
        const std::vector<double> v2 = augment(xi, aug, rng);
        for (std::size_t j = 0; j < x_u.cols; ++j) {
            view1(i, j) = v1[j];
            view2(i, j) = v2[j];
        }
    }
    Tape::Var p1 = classify(t, bundle, extract(t, bundle, t.constant(view1)));
    Tape::Var p2 = classify(t, bundle, extract(t, bundle, t.constant(view2)));
    return t.weighted_sq_rows(p1, p2, w_uc);
}

// Discriminator loss with gradient reversal feeding the feature extractor:
//   -mean_l log(1 - D(F(x_l))) - mean_u w_ud*w_uc * log D(F(x_u))
// The discriminator minimizes this at full strength; the features receive the
// negated gradient scaled by lambda. The per-sample weights are constants.
inline Tape::Var adversarial_loss(Tape& t, ModelBundle& bundle, const Matrix& x_l,
                                  const Matrix& x_u, const Matrix& w_ud, const Matrix& w_uc,
                                  double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("adversarial_loss: negative lambda");
    Matrix w = hadamard(w_ud, w_uc);
    Tape::Var feats_l = t.grad_reverse(extract(t, bundle, t.constant(x_l)), lambda);
    Tape::Var feats_u = t.grad_reverse(extract(t, bundle, t.constant(x_u)), lambda);
    Tape::Var y_l = discriminate_adv(t, bundle, feats_l);
    Tape::Var y_u = discriminate_adv(t, bundle, feats_u);
    Tape::Var loss_l = t.bce(y_l, Matrix(x_l.rows, 1, 0.0), Matrix(x_l.rows, 1, 1.0));
    Tape::Var loss_u = t.bce(y_u, Matrix(x_u.rows, 1, 1.0), w);
    return t.add(loss_l, loss_u);
}

struct TrainResult {
    LossBreakdown history;
    std::vector<UkcScore> final_ukc;  // scored once more after the last epoch
    std::vector<double> w_d;          // frozen mixture posteriors per unlabeled sample
};

namespace detail {

inline Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& order,
                          std::size_t start, std::size_t stop) {
    Matrix out(stop - start, src.cols);
    for (std::size_t i = start; i < stop; ++i) {
        const std::size_t r = order[i];
        for (std::size_t j = 0; j < src.cols; ++j) out(i - start, j) = src(r, j);
    }
    return out;
}

}  // namespace detail

// Phase A (epoch < warmup): cross-entropy only. Phase B: per epoch, refresh
// prototypes and w_uc, read w_ud from the domain discriminator as constants,
// then take one SGD step per mini-batch on CE + beta * consistency + the
// reversed adversarial term. Both phases end each epoch with one domain-BCE
// step for the non-adversarial discriminator on detached features.
inline TrainResult train(const Scenario& scenario, ModelBundle& bundle, const Vae& vae,
                         const GmmFit& gmm, const TrainConfig& config) {
    config.validate();
    const std::size_t n_l = scenario.labeled.size();
    const std::size_t n_u = scenario.unlabeled.size();
    if (n_l == 0) throw std::invalid_argument("train: no labeled samples");

    const Matrix x_l_all = Scenario::features(scenario.labeled, scenario.input_dim);
    const Matrix y_l_all = scenario.one_hot(scenario.labeled);
    const std::vector<int> labels = Scenario::labels(scenario.labeled);
    const Matrix x_u_all = Scenario::features(scenario.unlabeled, scenario.input_dim);

    TrainResult result;
    result.w_d.assign(n_u, 0.0);
    if (n_u > 0) result.w_d = score_unlabeled_domain(vae, gmm, x_u_all).w_d;
    Matrix w_d_col = Matrix::column_vector(result.w_d);
    double mean_w_d = 0.0;
    for (double v : result.w_d) mean_w_d += v;
    if (n_u > 0) mean_w_d /= static_cast<double>(n_u);

    auto rng_shuffle_l = make_rng(config.seed, Stream::train_shuffle_labeled);
    auto rng_shuffle_u = make_rng(config.seed, Stream::train_shuffle_unlabeled);
    auto rng_aug = make_rng(config.seed, Stream::train_augment);
    auto rng_score = make_rng(config.seed, Stream::outlier_score);

    std::vector<std::size_t> order_l(n_l), order_u(n_u);
    for (std::size_t i = 0; i < n_l; ++i) order_l[i] = i;
    for (std::size_t i = 0; i < n_u; ++i) order_u[i] = i;

    const std::size_t batches_l = (n_l + config.batch_size - 1) / config.batch_size;
    const std::size_t batches_u = n_u ? (n_u + config.batch_size - 1) / config.batch_size : 0;

    auto score_pool = [&](std::mt19937_64& rng) {
        const Matrix feats_l = extract(bundle, x_l_all);
        const PrototypeSet protos = compute_prototypes(feats_l, labels, scenario.k_known);
        return score_unlabeled(bundle, protos, scenario.unlabeled, config.aug, rng);
    };

    for (std::size_t epoch = 0; epoch < config.total_epochs; ++epoch) {
        const double r = rampup(epoch, config.warmup_epochs);
        const bool phase_b = epoch >= config.warmup_epochs;
        EpochStats stats;
        stats.alpha = config.alpha_max * r;
        stats.beta = config.beta_max * r;
        stats.mean_w_d = mean_w_d;

        std::vector<UkcScore> ukc;
        Matrix w_uc_col, w_ud_col;
        if (phase_b && n_u > 0) {
            ukc = score_pool(rng_score);
            w_uc_col = Matrix(n_u, 1);
            for (std::size_t i = 0; i < n_u; ++i) {
                w_uc_col(i, 0) = ukc[i].w_uc;
                stats.mean_w_uc += ukc[i].w_uc;
            }
            stats.mean_w_uc /= static_cast<double>(n_u);
            w_ud_col = discriminate_dom(bundle, extract(bundle, x_u_all));
        }

        std::shuffle(order_l.begin(), order_l.end(), rng_shuffle_l);
        std::shuffle(order_u.begin(), order_u.end(), rng_shuffle_u);

        const bool use_unlabeled = phase_b && n_u > 0;
        const std::size_t steps = use_unlabeled ? std::max(batches_l, batches_u) : batches_l;
        for (std::size_t step = 0; step < steps; ++step) {
            Tape t;
            const std::size_t l_lo = (step % batches_l) * config.batch_size;
            const std::size_t l_hi = std::min(n_l, l_lo + config.batch_size);
            Matrix xb = detail::gather_rows(x_l_all, order_l, l_lo, l_hi);
            Matrix yb = detail::gather_rows(y_l_all, order_l, l_lo, l_hi);
            Tape::Var ce = t.cross_entropy(classify(t, bundle, extract(t, bundle, t.constant(xb))),
                                           yb);
            stats.l_ce += t.value(ce)(0, 0);
            Tape::Var loss = ce;

            if (use_unlabeled) {
                const std::size_t u_lo = step % batches_u * config.batch_size;
                const std::size_t u_hi = std::min(n_u, u_lo + config.batch_size);
                Matrix xu(u_hi - u_lo, x_u_all.cols);
                Matrix wuc(u_hi - u_lo, 1), wud(u_hi - u_lo, 1);
                for (std::size_t i = u_lo; i < u_hi; ++i) {
                    const std::size_t r_u = order_u[i];
                    for (std::size_t j = 0; j < x_u_all.cols; ++j)
                        xu(i - u_lo, j) = x_u_all(r_u, j);
                    wuc(i - u_lo, 0) = w_uc_col(r_u, 0);
                    wud(i - u_lo, 0) = w_ud_col(r_u, 0);
                }
                if (config.beta_max > 0.0) {
                    Tape::Var ssl = consistency_loss(t, bundle, xu, wuc, config.aug, rng_aug);
                    stats.l_ssl += t.value(ssl)(0, 0);
                    loss = t.add(loss, t.scale(ssl, stats.beta));
                }
                Tape::Var adv = adversarial_loss(t, bundle, xb, xu, wud, wuc, stats.alpha);
                stats.l_adv += t.value(adv)(0, 0);
                loss = t.add(loss, adv);
            }

            const double loss_value = t.value(loss)(0, 0);
            if (!std::isfinite(loss_value))
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch) + " batch " + std::to_string(step));
            t.backward(loss);
            sgd_step(bundle.store, config.lr);
        }
        stats.l_ce /= static_cast<double>(steps);
        if (use_unlabeled) {
            stats.l_ssl /= static_cast<double>(steps);
            stats.l_adv /= static_cast<double>(steps);
        }

        // Non-adversarial discriminator: one step on the full pool, detached
        // features, frozen mixture targets.
        {
            Tape t;
            Tape::Var y_l = bundle.disc_dom.forward(
                t, bundle.store, t.constant(extract(bundle, x_l_all)));
            Tape::Var loss_dom;
            if (n_u > 0) {
                Tape::Var y_u = bundle.disc_dom.forward(
                    t, bundle.store, t.constant(extract(bundle, x_u_all)));
                loss_dom = domain_loss(t, y_l, y_u, w_d_col);
            } else {
                loss_dom = domain_loss(t, y_l, t.constant(Matrix(0, 1)), Matrix(0, 1));
            }
            stats.l_dom = t.value(loss_dom)(0, 0);
            if (!std::isfinite(stats.l_dom))
                throw std::runtime_error("train: non-finite domain loss at epoch " +
                                         std::to_string(epoch));
            t.backward(loss_dom);
            sgd_step(bundle.store, config.lr);
        }

        result.history.push_back(stats);
    }

    if (n_u > 0) result.final_ukc = score_pool(rng_score);
    return result;
}

}  // namespace ussl
