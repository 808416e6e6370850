// The four networks (feature extractor, classifier, adversarial and
// non-adversarial discriminators) plus the VAE, all as small MLPs over one
// ParameterStore.
#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ussl/autograd.hpp"
#include "ussl/matrix.hpp"
#include "ussl/rng.hpp"

namespace ussl {

enum class OutputHead { linear, softmax, sigmoid };

struct MlpSpec {
    std::vector<std::size_t> layer_sizes;  // input -> hidden... -> output
    OutputHead head = OutputHead::linear;

    void validate() const {
        if (layer_sizes.size() < 2)
            throw std::invalid_argument("MlpSpec: need at least input and output sizes");
        for (std::size_t s : layer_sizes)
            if (s < 1) throw std::invalid_argument("MlpSpec: zero layer size");
    }
};

// Hidden layers use relu; weights are Glorot-uniform, biases zero.
class Mlp {
public:
    Mlp() = default;
    Mlp(MlpSpec spec, std::string prefix) : spec_(std::move(spec)), prefix_(std::move(prefix)) {
        spec_.validate();
    }

    void init_params(ParameterStore& store, std::mt19937_64& rng) const {
        for (std::size_t l = 0; l + 1 < spec_.layer_sizes.size(); ++l) {
            const std::size_t fan_in = spec_.layer_sizes[l];
            const std::size_t fan_out = spec_.layer_sizes[l + 1];
            const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
            std::uniform_real_distribution<double> dist(-limit, limit);
            Matrix w(fan_in, fan_out);
            for (double& v : w.data) v = dist(rng);
            store.add(weight_name(l), std::move(w));
            store.add(bias_name(l), Matrix(1, fan_out));
        }
    }

    Tape::Var forward(Tape& t, ParameterStore& store, Tape::Var x) const {
        return run(t, x, [&](const std::string& n) { return t.param(store, n); });
    }

    // Pure read-only pass; parameters enter the tape as constants.
    Matrix forward_eval(const ParameterStore& store, const Matrix& x) const {
        Tape t;
        Tape::Var out =
            run(t, t.constant(x), [&](const std::string& n) { return t.constant(store.value(n)); });
        return t.value(out);
    }

    std::size_t input_dim() const { return spec_.layer_sizes.front(); }
    std::size_t output_dim() const { return spec_.layer_sizes.back(); }
    const MlpSpec& spec() const { return spec_; }
    const std::string& prefix() const { return prefix_; }

    std::string weight_name(std::size_t layer) const {
        return prefix_ + "/W" + std::to_string(layer);
    }
    std::string bias_name(std::size_t layer) const {
        return prefix_ + "/b" + std::to_string(layer);
    }

private:
    template <typename Fetch>
    Tape::Var run(Tape& t, Tape::Var x, Fetch fetch) const {
        if (t.value(x).cols != input_dim())
            throw std::invalid_argument(prefix_ + ": input width " +
                                        std::to_string(t.value(x).cols) + " != " +
                                        std::to_string(input_dim()));
        const std::size_t layers = spec_.layer_sizes.size() - 1;
        for (std::size_t l = 0; l < layers; ++l) {
            x = t.affine(x, fetch(weight_name(l)), fetch(bias_name(l)));
            if (l + 1 < layers) x = t.relu(x);
        }
        switch (spec_.head) {
            case OutputHead::linear: return x;
            case OutputHead::softmax: return t.softmax_rows(x);
            case OutputHead::sigmoid: return t.sigmoid(x);
        }
        throw std::logic_error("unreachable");
    }

    MlpSpec spec_;
    std::string prefix_;
};

// ---- classifier bundle ----

struct BundleSpec {
    std::size_t input_dim = 8;
    std::size_t feat_dim = 32;
    std::size_t k_known = 4;
    std::vector<std::size_t> extractor_hidden = {64};
    std::vector<std::size_t> head_hidden = {16};

    void validate() const {
        if (k_known < 2) throw std::invalid_argument("BundleSpec: k_known must be >= 2");
        if (input_dim < 1 || feat_dim < 1) throw std::invalid_argument("BundleSpec: zero dim");
    }
};

struct ModelBundle {
    BundleSpec spec;
    Mlp extractor;   // input_dim -> feat_dim, linear head
    Mlp classifier;  // feat_dim -> k_known, softmax head
    Mlp disc_adv;    // feat_dim -> 1, sigmoid head
    Mlp disc_dom;    // feat_dim -> 1, sigmoid head
    ParameterStore store;

    static ModelBundle create(const BundleSpec& spec, std::uint64_t seed) {
        spec.validate();
        ModelBundle b;
        b.spec = spec;
        auto stack = [](std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
            std::vector<std::size_t> sizes{in};
            sizes.insert(sizes.end(), hidden.begin(), hidden.end());
            sizes.push_back(out);
            return sizes;
        };
        b.extractor = Mlp({stack(spec.input_dim, spec.extractor_hidden, spec.feat_dim),
                           OutputHead::linear},
                          "F");
        b.classifier = Mlp({stack(spec.feat_dim, spec.head_hidden, spec.k_known),
                            OutputHead::softmax},
                           "C");
        b.disc_adv = Mlp({stack(spec.feat_dim, spec.head_hidden, 1), OutputHead::sigmoid}, "Dadv");
        b.disc_dom = Mlp({stack(spec.feat_dim, spec.head_hidden, 1), OutputHead::sigmoid}, "Ddom");
        auto rng = make_rng(seed, Stream::model_init);
        b.extractor.init_params(b.store, rng);
        b.classifier.init_params(b.store, rng);
        b.disc_adv.init_params(b.store, rng);
        b.disc_dom.init_params(b.store, rng);
        return b;
    }
};

inline Tape::Var extract(Tape& t, ModelBundle& b, Tape::Var x) {
    return b.extractor.forward(t, b.store, x);
}
inline Tape::Var classify(Tape& t, ModelBundle& b, Tape::Var features) {
    return b.classifier.forward(t, b.store, features);
}
inline Tape::Var discriminate_adv(Tape& t, ModelBundle& b, Tape::Var features) {
    return b.disc_adv.forward(t, b.store, features);
}
inline Tape::Var discriminate_dom(Tape& t, ModelBundle& b, Tape::Var features) {
    return b.disc_dom.forward(t, b.store, features);
}

inline Matrix extract(const ModelBundle& b, const Matrix& x) {
    return b.extractor.forward_eval(b.store, x);
}
inline Matrix classify(const ModelBundle& b, const Matrix& features) {
    return b.classifier.forward_eval(b.store, features);
}
inline Matrix discriminate_adv(const ModelBundle& b, const Matrix& features) {
    return b.disc_adv.forward_eval(b.store, features);
}
inline Matrix discriminate_dom(const ModelBundle& b, const Matrix& features) {
    return b.disc_dom.forward_eval(b.store, features);
}

// ---- VAE ----

struct VaeSpec {
    std::size_t input_dim = 8;
    std::size_t latent_dim = 4;
    std::vector<std::size_t> encoder_hidden = {};  // affine maps by default
    std::vector<std::size_t> decoder_hidden = {};
    double kl_weight = 1e-3;

    void validate() const {
        if (latent_dim >= input_dim)
            throw std::invalid_argument("VaeSpec: latent_dim must be < input_dim");
        if (kl_weight < 0.0) throw std::invalid_argument("VaeSpec: negative kl_weight");
    }
};

struct Vae {
    VaeSpec spec;
    Mlp encoder;  // input_dim -> 2*latent_dim (mu | logvar), linear head
    Mlp decoder;  // latent_dim -> input_dim, linear head
    ParameterStore store;

    static Vae create(const VaeSpec& spec, std::uint64_t seed) {
        spec.validate();
        Vae v;
        v.spec = spec;
        std::vector<std::size_t> enc{spec.input_dim};
        enc.insert(enc.end(), spec.encoder_hidden.begin(), spec.encoder_hidden.end());
        enc.push_back(2 * spec.latent_dim);
        std::vector<std::size_t> dec{spec.latent_dim};
        dec.insert(dec.end(), spec.decoder_hidden.begin(), spec.decoder_hidden.end());
        dec.push_back(spec.input_dim);
        v.encoder = Mlp({std::move(enc), OutputHead::linear}, "enc");
        v.decoder = Mlp({std::move(dec), OutputHead::linear}, "dec");
        auto rng = make_rng(seed, Stream::model_init);
        v.encoder.init_params(v.store, rng);
        v.decoder.init_params(v.store, rng);
        // Start the logvar head at zero so sigma begins at 1 regardless of the
        // input scale; otherwise exp(logvar) can overflow on the first pass.
        const std::size_t last = v.encoder.spec().layer_sizes.size() - 2;
        Matrix& w_out = v.store.value(v.encoder.weight_name(last));
        for (std::size_t i = 0; i < w_out.rows; ++i)
            for (std::size_t j = spec.latent_dim; j < 2 * spec.latent_dim; ++j)
                w_out(i, j) = 0.0;
        return v;
    }
};

struct VaeGraph {
    Tape::Var xhat;
    Tape::Var mu;
    Tape::Var logvar;
    Tape::Var recon;  // mean over rows of ||x - xhat||^2
    Tape::Var kl;     // mean Gaussian KL to the standard normal
    Tape::Var loss;   // recon + kl_weight * kl
};

// Builds the VAE objective on a tape. Training mode draws eps ~ N(0,1) and
// uses z = mu + sigma .* eps; with eps == nullptr the pass scores with z = mu.
inline VaeGraph vae_graph(Tape& t, Vae& vae, const Matrix& x, const Matrix* eps) {
    const std::size_t latent = vae.spec.latent_dim;
    Tape::Var enc = vae.encoder.forward(t, vae.store, t.constant(x));
    VaeGraph g;
    g.mu = t.slice_cols(enc, 0, latent);
    g.logvar = t.slice_cols(enc, latent, 2 * latent);
    Tape::Var z = g.mu;
    if (eps) {
        Tape::Var sigma = t.exp(t.scale(g.logvar, 0.5));
        z = t.add(g.mu, t.mul(sigma, t.constant(*eps)));
    }
    g.xhat = vae.decoder.forward(t, vae.store, z);
    g.recon = t.mse(g.xhat, t.constant(x));
    g.kl = t.gaussian_kl(g.mu, g.logvar);
    g.loss = t.add(g.recon, t.scale(g.kl, vae.spec.kl_weight));
    return g;
}

struct VaeForward {
    Matrix xhat;
    std::vector<double> recon_sq;  // per-sample ||x_i - xhat_i||^2
    double kl = 0.0;
};

// rng == nullptr selects scoring mode (deterministic, z = mu).
inline VaeForward vae_forward(const Vae& vae, const Matrix& x, std::mt19937_64* rng) {
    const std::size_t latent = vae.spec.latent_dim;
    const Matrix enc = vae.encoder.forward_eval(vae.store, x);
    Matrix mu(x.rows, latent), logvar(x.rows, latent);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < latent; ++j) {
            mu(i, j) = enc(i, j);
            logvar(i, j) = enc(i, latent + j);
        }
    Matrix z = mu;
    if (rng) {
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (std::size_t i = 0; i < z.data.size(); ++i)
            z.data[i] += std::exp(0.5 * logvar.data[i]) * gauss(*rng);
    }
    VaeForward out;
    out.xhat = vae.decoder.forward_eval(vae.store, z);
    double kl_acc = 0.0;
    for (std::size_t i = 0; i < mu.data.size(); ++i)
        kl_acc += 1.0 + logvar.data[i] - mu.data[i] * mu.data[i] - std::exp(logvar.data[i]);
    out.kl = x.rows ? -0.5 * kl_acc / static_cast<double>(x.rows) : 0.0;
    out.recon_sq.resize(x.rows, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) {
            const double d = x(i, j) - out.xhat(i, j);
            s += d * d;
        }
        out.recon_sq[i] = s;
    }
    return out;
}

// ---- parameter files ----
//
// Text format, bit-exact round trip:
//   ussl-params 1
//   <entry count>
//   <name> <rows> <cols>
//   <rows lines of cols values, printed with 17 significant digits>

inline void save_parameters(const ParameterStore& store, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_parameters: cannot open " + path);
    out << "ussl-params 1\n" << store.names().size() << "\n";
    char buf[64];
    for (const std::string& name : store.names()) {
        const Matrix& m = store.value(name);
        out << name << " " << m.rows << " " << m.cols << "\n";
        for (std::size_t i = 0; i < m.rows; ++i) {
            for (std::size_t j = 0; j < m.cols; ++j) {
                std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
                out << (j ? " " : "") << buf;
            }
            out << "\n";
        }
    }
    if (!out) throw std::runtime_error("save_parameters: write failed for " + path);
}

namespace detail {

// Layer sizes recovered from the weight shapes stored under a prefix.
inline std::vector<std::size_t> stored_layer_sizes(const ParameterStore& store,
                                                   const std::string& prefix) {
    std::vector<std::size_t> sizes;
    for (std::size_t l = 0;; ++l) {
        const std::string name = prefix + "/W" + std::to_string(l);
        if (!store.has(name)) break;
        const Matrix& w = store.value(name);
        if (sizes.empty()) sizes.push_back(w.rows);
        sizes.push_back(w.cols);
    }
    if (sizes.size() < 2)
        throw std::runtime_error("parameter file has no layers under prefix " + prefix);
    return sizes;
}

}  // namespace detail

// Replaces matching entries (shape-checked) and creates missing ones.
inline void load_parameters(ParameterStore& store, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_parameters: cannot open " + path);
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "ussl-params" || version != 1)
        throw std::runtime_error("load_parameters: bad header in " + path);
    std::size_t count = 0;
    in >> count;
    for (std::size_t k = 0; k < count; ++k) {
        std::string name;
        std::size_t rows = 0, cols = 0;
        in >> name >> rows >> cols;
        Matrix m(rows, cols);
        for (double& v : m.data) in >> v;
        if (!in) throw std::runtime_error("load_parameters: truncated data in " + path);
        if (store.has(name)) {
            Matrix& dst = store.value(name);
            if (!dst.same_shape(m))
                throw std::runtime_error("load_parameters: shape mismatch for " + name);
            dst = std::move(m);
        } else {
            store.add(name, std::move(m));
        }
    }
}

// Rebuilds a bundle from a parameter file; the architecture is inferred from
// the stored weight shapes.
inline ModelBundle load_model_bundle(const std::string& path) {
    ParameterStore raw;
    load_parameters(raw, path);
    const auto f_sizes = detail::stored_layer_sizes(raw, "F");
    const auto c_sizes = detail::stored_layer_sizes(raw, "C");
    BundleSpec spec;
    spec.input_dim = f_sizes.front();
    spec.feat_dim = f_sizes.back();
    spec.k_known = c_sizes.back();
    spec.extractor_hidden.assign(f_sizes.begin() + 1, f_sizes.end() - 1);
    spec.head_hidden.assign(c_sizes.begin() + 1, c_sizes.end() - 1);
    ModelBundle bundle = ModelBundle::create(spec, 0);
    load_parameters(bundle.store, path);
    return bundle;
}

inline Vae load_vae(const std::string& path, double kl_weight) {
    ParameterStore raw;
    load_parameters(raw, path);
    const auto enc_sizes = detail::stored_layer_sizes(raw, "enc");
    const auto dec_sizes = detail::stored_layer_sizes(raw, "dec");
    VaeSpec spec;
    spec.input_dim = enc_sizes.front();
    spec.latent_dim = dec_sizes.front();
    spec.encoder_hidden.assign(enc_sizes.begin() + 1, enc_sizes.end() - 1);
    spec.decoder_hidden.assign(dec_sizes.begin() + 1, dec_sizes.end() - 1);
    spec.kl_weight = kl_weight;
    Vae vae = Vae::create(spec, 0);
    load_parameters(vae.store, path);
    return vae;
}

}  // namespace ussl
