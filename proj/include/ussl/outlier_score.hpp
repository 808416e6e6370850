// Unknown-class scoring for unlabeled samples: prototype distances in feature
// space combined with prediction disagreement between two augmented views,
// pool-normalized into the inlier weight w_uc.
#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "ussl/matrix.hpp"
#include "ussl/models.hpp"
#include "ussl/synthdata.hpp"

namespace ussl {

struct PrototypeSet {
    Matrix prototypes;                 // k_known x feat_dim, one row per class
    std::vector<std::size_t> counts;   // contributing samples per class

    std::size_t k_known() const { return prototypes.rows; }
};

inline PrototypeSet compute_prototypes(const Matrix& features, const std::vector<int>& labels,
                                       std::size_t k_known) {
    if (features.rows != labels.size())
        throw std::invalid_argument("compute_prototypes: features/labels length mismatch");
    PrototypeSet out;
    out.prototypes = Matrix(k_known, features.cols);
    out.counts.assign(k_known, 0);
    for (std::size_t i = 0; i < features.rows; ++i) {
        const int c = labels[i];
        if (c < 0 || static_cast<std::size_t>(c) >= k_known)
            throw std::invalid_argument("compute_prototypes: label " + std::to_string(c) +
                                        " outside [0," + std::to_string(k_known) + ")");
        ++out.counts[c];
        for (std::size_t j = 0; j < features.cols; ++j)
            out.prototypes(c, j) += features(i, j);
    }
    for (std::size_t c = 0; c < k_known; ++c) {
        if (out.counts[c] == 0)
            throw std::invalid_argument("compute_prototypes: class " + std::to_string(c) +
                                        " has no samples");
        for (std::size_t j = 0; j < features.cols; ++j)
            out.prototypes(c, j) /= static_cast<double>(out.counts[c]);
    }
    return out;
}

struct DistanceProfile {
    std::vector<double> d;  // L2 distance to each known-class prototype
    double d_avg = 0.0;
};

inline DistanceProfile distance_profile(const Matrix& v, const PrototypeSet& protos) {
    if (v.rows != 1 || v.cols != protos.prototypes.cols)
        shape_error("distance_profile", v, protos.prototypes);
    DistanceProfile out;
    out.d.resize(protos.k_known());
    for (std::size_t c = 0; c < protos.k_known(); ++c) {
        double s = 0.0;
        for (std::size_t j = 0; j < v.cols; ++j) {
            const double diff = v(0, j) - protos.prototypes(c, j);
            s += diff * diff;
        }
        out.d[c] = std::sqrt(s);
        out.d_avg += out.d[c];
    }
    out.d_avg /= static_cast<double>(protos.k_known());
    return out;
}

// |max(p1) - max(p2)| over two probability rows.
inline double prediction_disagreement(const Matrix& p1, const Matrix& p2) {
    if (!p1.same_shape(p2)) shape_error("prediction_disagreement", p1, p2);
    double m1 = 0.0, m2 = 0.0;
    for (double v : p1.data) m1 = std::max(m1, v);
    for (double v : p2.data) m2 = std::max(m2, v);
    return std::fabs(m1 - m2);
}

// Min-max map of the raw score pool into [1e-6, 1]; a (numerically) constant
// pool maps every sample to 0.5.
inline std::vector<double> normalize_pool(const std::vector<double>& z) {
    constexpr double eps = 1e-6;
    if (z.empty()) throw std::invalid_argument("normalize_pool: empty pool");
    double lo = z.front(), hi = z.front();
    for (double v : z) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    std::vector<double> out(z.size());
    if (hi - lo < 1e-12) {
        std::fill(out.begin(), out.end(), 0.5);
        return out;
    }
    for (std::size_t i = 0; i < z.size(); ++i)
        out[i] = std::min(1.0, std::max(eps, (z[i] - lo) / (hi - lo)));
    return out;
}

struct UkcScore {
    std::vector<double> d;
    double d_avg = 0.0;
    double p_ood = 0.0;
    double w_uc = 0.0;  // inlier weight, 1 - normalized(d_avg * p_ood)
};

// Two independent augmented views feed the classifier; the clean sample feeds
// the prototype distances. Draws two augmentations per sample, in pool order.
inline std::vector<UkcScore> score_unlabeled(const ModelBundle& bundle,
                                             const PrototypeSet& protos,
                                             const std::vector<Sample>& unlabeled,
                                             const AugmentConfig& aug, std::mt19937_64& rng) {
    const std::size_t n = unlabeled.size();
    std::vector<UkcScore> scores(n);
    if (n == 0) return scores;
    const std::size_t dim = unlabeled.front().x.size();
    Matrix clean(n, dim), view1(n, dim), view2(n, dim);
    for (std::size_t i = 0; i < n; ++i) {
        const std::vector<double> v1 = augment(unlabeled[i].x, aug, rng);
        const std::vector<double> v2 = augment(unlabeled[i].x, aug, rng);
        for (std::size_t j = 0; j < dim; ++j) {
            clean(i, j) = unlabeled[i].x[j];
            view1(i, j) = v1[j];
            view2(i, j) = v2[j];
        }
    }
    const Matrix feats = extract(bundle, clean);
    const Matrix p1 = classify(bundle, extract(bundle, view1));
    const Matrix p2 = classify(bundle, extract(bundle, view2));
    std::vector<double> raw(n);
    for (std::size_t i = 0; i < n; ++i) {
        DistanceProfile prof = distance_profile(feats.row(i), protos);
        scores[i].d = std::move(prof.d);
        scores[i].d_avg = prof.d_avg;
        scores[i].p_ood = prediction_disagreement(p1.row(i), p2.row(i));
        raw[i] = scores[i].d_avg * scores[i].p_ood;
    }
    const std::vector<double> sigma = normalize_pool(raw);
    for (std::size_t i = 0; i < n; ++i) scores[i].w_uc = 1.0 - sigma[i];
    return scores;
}

}  // namespace ussl
