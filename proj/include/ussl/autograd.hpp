// Reverse-mode differentiation over Matrix values.
//
// A Tape records one forward computation; backward() walks the recording in
// reverse and accumulates gradients into the ParameterStore entries that were
// bound via param(). Gradients accumulate across backward calls until the
// store zeroes them (sgd_step does).
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "ussl/matrix.hpp"

namespace ussl {

class ParameterStore {
public:
    struct Entry {
        Matrix value;
        Matrix grad;
    };

    Matrix& add(const std::string& name, Matrix init) {
        if (entries_.count(name))
            throw std::invalid_argument("ParameterStore: duplicate name " + name);
        Entry e;
        e.grad = Matrix(init.rows, init.cols);
        e.value = std::move(init);
        names_.push_back(name);
        return entries_.emplace(name, std::move(e)).first->second.value;
    }

    bool has(const std::string& name) const { return entries_.count(name) != 0; }

    Entry& entry(const std::string& name) {
        auto it = entries_.find(name);
        if (it == entries_.end())
            throw std::invalid_argument("ParameterStore: unknown name " + name);
        return it->second;
    }
    const Entry& entry(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end())
            throw std::invalid_argument("ParameterStore: unknown name " + name);
        return it->second;
    }

    Matrix& value(const std::string& name) { return entry(name).value; }
    const Matrix& value(const std::string& name) const { return entry(name).value; }
    Matrix& grad(const std::string& name) { return entry(name).grad; }
    const Matrix& grad(const std::string& name) const { return entry(name).grad; }

    // Insertion order; every iteration in the repo uses this for determinism.
    const std::vector<std::string>& names() const { return names_; }

    void zero_grads() {
        for (auto& [k, e] : entries_) std::fill(e.grad.data.begin(), e.grad.data.end(), 0.0);
    }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, Entry> entries_;
};

class Tape {
public:
    struct Var {
        std::size_t id = static_cast<std::size_t>(-1);
    };

    Var constant(Matrix v) { return push(std::move(v)); }

    // Leaf whose gradient flows into the named store entry after backward().
    Var param(ParameterStore& store, const std::string& name) {
        auto& e = store.entry(name);
        Var v = push(e.value);
        nodes_[v.id].sink = &e.grad;
        return v;
    }

    const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
    const Matrix& grad(Var v) const { return nodes_.at(v.id).grad; }
    std::size_t size() const { return nodes_.size(); }

    Var matmul(Var a, Var b) {
        Var out = push(ussl::matmul(val(a), val(b)));
        nodes_[out.id].back = [a, b](Tape& t, std::size_t self) {
            const Matrix& g = t.nodes_[self].grad;
            t.accum(a, ussl::matmul(g, transpose(t.val(b))));
            t.accum(b, ussl::matmul(transpose(t.val(a)), g));
        };
        return out;
    }

    Var affine(Var x, Var w, Var b) {
        Var out = push(ussl::affine(val(x), val(w), val(b)));
        nodes_[out.id].back = [x, w, b](Tape& t, std::size_t self) {
            const Matrix& g = t.nodes_[self].grad;
            t.accum(x, ussl::matmul(g, transpose(t.val(w))));
            t.accum(w, ussl::matmul(transpose(t.val(x)), g));
            Matrix gb(1, g.cols);
            for (std::size_t i = 0; i < g.rows; ++i)
                for (std::size_t j = 0; j < g.cols; ++j) gb(0, j) += g(i, j);
            t.accum(b, gb);
        };
        return out;
    }

    Var add(Var a, Var b) {
        Var out = push(ussl::add(val(a), val(b)));
        nodes_[out.id].back = [a, b](Tape& t, std::size_t self) {
            t.accum(a, t.nodes_[self].grad);
            t.accum(b, t.nodes_[self].grad);
        };
        return out;
    }

    Var sub(Var a, Var b) {
        Var out = push(ussl::sub(val(a), val(b)));
        nodes_[out.id].back = [a, b](Tape& t, std::size_t self) {
            t.accum(a, t.nodes_[self].grad);
            t.accum(b, ussl::scale(t.nodes_[self].grad, -1.0));
        };
        return out;
    }

    Var mul(Var a, Var b) {
        Var out = push(hadamard(val(a), val(b)));
        nodes_[out.id].back = [a, b](Tape& t, std::size_t self) {
            const Matrix& g = t.nodes_[self].grad;
            t.accum(a, hadamard(g, t.val(b)));
            t.accum(b, hadamard(g, t.val(a)));
        };
        return out;
    }

    Var scale(Var a, double c) {
        Var out = push(ussl::scale(val(a), c));
        nodes_[out.id].back = [a, c](Tape& t, std::size_t self) {
            t.accum(a, ussl::scale(t.nodes_[self].grad, c));
        };
        return out;
    }

    Var exp(Var a) {
        Matrix v = val(a);
        for (double& x : v.data) x = std::exp(x);
        Var out = push(std::move(v));
        nodes_[out.id].back = [a](Tape& t, std::size_t self) {
            t.accum(a, hadamard(t.nodes_[self].grad, t.nodes_[self].value));
        };
        return out;
    }

    Var relu(Var a) {
        Var out = push(ussl::relu(val(a)));
        nodes_[out.id].back = [a](Tape& t, std::size_t self) {
            const Matrix& x = t.val(a);
            Matrix g = t.nodes_[self].grad;
            for (std::size_t i = 0; i < g.data.size(); ++i)
                if (x.data[i] <= 0.0) g.data[i] = 0.0;
            t.accum(a, g);
        };
        return out;
    }

    Var sigmoid(Var a) {
        Var out = push(ussl::sigmoid(val(a)));
        nodes_[out.id].back = [a](Tape& t, std::size_t self) {
            const Matrix& s = t.nodes_[self].value;
            Matrix g = t.nodes_[self].grad;
            for (std::size_t i = 0; i < g.data.size(); ++i)
                g.data[i] *= s.data[i] * (1.0 - s.data[i]);
            t.accum(a, g);
        };
        return out;
    }

    Var softmax_rows(Var a) {
        Var out = push(ussl::softmax_rows(val(a)));
        nodes_[out.id].back = [a](Tape& t, std::size_t self) {
            const Matrix& s = t.nodes_[self].value;
            const Matrix& g = t.nodes_[self].grad;
            Matrix gx(s.rows, s.cols);
            for (std::size_t i = 0; i < s.rows; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < s.cols; ++j) dot += g(i, j) * s(i, j);
                for (std::size_t j = 0; j < s.cols; ++j)
                    gx(i, j) = s(i, j) * (g(i, j) - dot);
            }
            t.accum(a, gx);
        };
        return out;
    }

    // Columns [begin, end) of every row.
    Var slice_cols(Var a, std::size_t begin, std::size_t end) {
        const Matrix& x = val(a);
        if (begin > end || end > x.cols)
            throw std::invalid_argument("slice_cols: bad range on " + x.shape_str());
        Matrix v(x.rows, end - begin);
        for (std::size_t i = 0; i < x.rows; ++i)
            for (std::size_t j = begin; j < end; ++j) v(i, j - begin) = x(i, j);
        Var out = push(std::move(v));
        nodes_[out.id].back = [a, begin](Tape& t, std::size_t self) {
            const Matrix& g = t.nodes_[self].grad;
            Matrix gx(t.val(a).rows, t.val(a).cols);
            for (std::size_t i = 0; i < g.rows; ++i)
                for (std::size_t j = 0; j < g.cols; ++j) gx(i, begin + j) = g(i, j);
            t.accum(a, gx);
        };
        return out;
    }

    Var sum(Var a) {
        double acc = 0.0;
        for (double v : val(a).data) acc += v;
        Var out = push(Matrix(1, 1, acc));
        nodes_[out.id].back = [a](Tape& t, std::size_t self) {
            const double g = t.nodes_[self].grad(0, 0);
            t.accum(a, Matrix(t.val(a).rows, t.val(a).cols, g));
        };
        return out;
    }

    // -(1/rows) sum_ij targets * log(clamp(probs)); clamped entries get zero gradient.
    Var cross_entropy(Var probs, const Matrix& targets) {
        const Matrix& p = val(probs);
        Var out = push(Matrix(1, 1, ussl::cross_entropy(p, targets)));
        nodes_[out.id].back = [probs, targets](Tape& t, std::size_t self) {
            const double g = t.nodes_[self].grad(0, 0);
            const Matrix& p = t.val(probs);
            const double inv_n = 1.0 / static_cast<double>(p.rows);
            Matrix gp(p.rows, p.cols);
            for (std::size_t i = 0; i < p.data.size(); ++i) {
                const double pv = p.data[i];
                if (targets.data[i] != 0.0 && pv > kProbEps && pv < 1.0 - kProbEps)
                    gp.data[i] = -g * inv_n * targets.data[i] / pv;
            }
            t.accum(probs, gp);
        };
        return out;
    }

    // (1/rows) sum_i w_i * ||a_i - b_i||^2. Weights are a rows x 1 constant.
    Var weighted_sq_rows(Var a, Var b, const Matrix& w) {
        const Matrix& av = val(a);
        const Matrix& bv = val(b);
        if (!av.same_shape(bv)) shape_error("weighted_sq_rows", av, bv);
        if (w.rows != av.rows || w.cols != 1) shape_error("weighted_sq_rows weights", w, av);
        double acc = 0.0;
        for (std::size_t i = 0; i < av.rows; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < av.cols; ++j) {
                const double d = av(i, j) - bv(i, j);
                s += d * d;
            }
            acc += w(i, 0) * s;
        }
        const double inv_n = av.rows ? 1.0 / static_cast<double>(av.rows) : 0.0;
        Var out = push(Matrix(1, 1, acc * inv_n));
        nodes_[out.id].back = [a, b, w, inv_n](Tape& t, std::size_t self) {
            const double g = t.nodes_[self].grad(0, 0);
            const Matrix& av = t.val(a);
            const Matrix& bv = t.val(b);
            Matrix ga(av.rows, av.cols);
            for (std::size_t i = 0; i < av.rows; ++i) {
                const double c = g * inv_n * 2.0 * w(i, 0);
                for (std::size_t j = 0; j < av.cols; ++j)
                    ga(i, j) = c * (av(i, j) - bv(i, j));
            }
            t.accum(a, ga);
            t.accum(b, ussl::scale(ga, -1.0));
        };
        return out;
    }

    Var mse(Var a, Var b) {
        return weighted_sq_rows(a, b, Matrix(val(a).rows, 1, 1.0));
    }

    // Weighted binary cross-entropy over a column vector; clamped entries get
    // zero gradient. Targets and weights are constants.
    Var bce(Var yhat, const Matrix& targets, const Matrix& weights) {
        const Matrix& p = val(yhat);
        Var out = push(Matrix(1, 1, ussl::bce(p, targets, weights)));
        nodes_[out.id].back = [yhat, targets, weights](Tape& t, std::size_t self) {
            const double g = t.nodes_[self].grad(0, 0);
            const Matrix& p = t.val(yhat);
            const double inv_n = 1.0 / static_cast<double>(p.data.size());
            Matrix gp(p.rows, p.cols);
            for (std::size_t i = 0; i < p.data.size(); ++i) {
                const double pv = p.data[i];
                if (pv <= kProbEps || pv >= 1.0 - kProbEps) continue;
                gp.data[i] = -g * inv_n * weights.data[i] *
                             (targets.data[i] / pv - (1.0 - targets.data[i]) / (1.0 - pv));
            }
            t.accum(yhat, gp);
        };
        return out;
    }

    // KL(N(mu, exp(logvar)) || N(0, I)) averaged over rows.
    Var gaussian_kl(Var mu, Var logvar) {
        const Matrix& m = val(mu);
        const Matrix& lv = val(logvar);
        if (!m.same_shape(lv)) shape_error("gaussian_kl", m, lv);
        const double inv_n = m.rows ? 1.0 / static_cast<double>(m.rows) : 0.0;
        double acc = 0.0;
        for (std::size_t i = 0; i < m.data.size(); ++i)
            acc += 1.0 + lv.data[i] - m.data[i] * m.data[i] - std::exp(lv.data[i]);
        Var out = push(Matrix(1, 1, -0.5 * inv_n * acc));
        nodes_[out.id].back = [mu, logvar, inv_n](Tape& t, std::size_t self) {
            const double g = t.nodes_[self].grad(0, 0);
            const Matrix& m = t.val(mu);
            const Matrix& lv = t.val(logvar);
            Matrix gm(m.rows, m.cols), glv(m.rows, m.cols);
            for (std::size_t i = 0; i < m.data.size(); ++i) {
                gm.data[i] = g * inv_n * m.data[i];
                glv.data[i] = g * (-0.5) * inv_n * (1.0 - std::exp(lv.data[i]));
            }
            t.accum(mu, gm);
            t.accum(logvar, glv);
        };
        return out;
    }

    // Identity forward; backward multiplies the incoming gradient by -lambda.
    Var grad_reverse(Var a, double lambda) {
        Var out = push(val(a));
        nodes_[out.id].back = [a, lambda](Tape& t, std::size_t self) {
            t.accum(a, ussl::scale(t.nodes_[self].grad, -lambda));
        };
        return out;
    }

    // Seeds d(loss)/d(loss) = 1, walks the recording in reverse, then adds
    // each bound leaf's gradient into its store entry.
    void backward(Var loss) {
        Node& l = nodes_.at(loss.id);
        if (l.value.rows != 1 || l.value.cols != 1)
            throw std::invalid_argument("backward: loss must be 1x1, got " + l.value.shape_str());
        l.grad(0, 0) += 1.0;
        for (std::size_t i = loss.id + 1; i-- > 0;)
            if (nodes_[i].back) nodes_[i].back(*this, i);
        for (Node& n : nodes_)
            if (n.sink)
                for (std::size_t i = 0; i < n.grad.data.size(); ++i)
                    n.sink->data[i] += n.grad.data[i];
    }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        std::function<void(Tape&, std::size_t)> back;
        Matrix* sink = nullptr;
    };

    const Matrix& val(Var v) const { return nodes_[v.id].value; }

    void accum(Var v, const Matrix& g) {
        Matrix& dst = nodes_[v.id].grad;
        for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += g.data[i];
    }

    Var push(Matrix value) {
        Node n;
        n.grad = Matrix(value.rows, value.cols);
        n.value = std::move(value);
        nodes_.push_back(std::move(n));
        return Var{nodes_.size() - 1};
    }

    std::vector<Node> nodes_;
};

// value <- value - lr * grad for every entry, then grads are zeroed.
inline void sgd_step(ParameterStore& store, double lr) {
    if (lr <= 0.0) throw std::invalid_argument("sgd_step: lr must be positive");
    for (const std::string& name : store.names()) {
        auto& e = store.entry(name);
        for (std::size_t i = 0; i < e.value.data.size(); ++i)
            e.value.data[i] -= lr * e.grad.data[i];
        std::fill(e.grad.data.begin(), e.grad.data.end(), 0.0);
    }
}

using LossBuilder = std::function<Tape::Var(Tape&, ParameterStore&)>;

// Central-difference check of the tape gradients for an arbitrary scalar loss.
// Returns the max relative error over every parameter entry, with denominator
// max(|analytic|, |numeric|, 1e-8).
inline double fd_check(const LossBuilder& build, ParameterStore& store, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("fd_check: eps must be positive");
    store.zero_grads();
    {
        Tape t;
        t.backward(build(t, store));
    }
    auto eval = [&]() {
        Tape t;
        return t.value(build(t, store))(0, 0);
    };
    double max_rel = 0.0;
    for (const std::string& name : store.names()) {
        auto& e = store.entry(name);
        for (std::size_t i = 0; i < e.value.data.size(); ++i) {
            const double orig = e.value.data[i];
            e.value.data[i] = orig + eps;
            const double fp = eval();
            e.value.data[i] = orig - eps;
            const double fm = eval();
            e.value.data[i] = orig;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double analytic = e.grad.data[i];
            const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
            max_rel = std::max(max_rel, std::fabs(analytic - numeric) / denom);
        }
    }
    return max_rel;
}

}  // namespace ussl
