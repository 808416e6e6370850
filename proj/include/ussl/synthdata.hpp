// Synthetic scenarios with ground-truth class/domain mismatch flags, the
// feature-space strong augmentation, and CSV round-tripping.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ussl/matrix.hpp"
#include "ussl/rng.hpp"

namespace ussl {

struct ClassSpec {
    std::vector<double> mean;
    double scale = 1.0;  // isotropic std dev
};

struct DomainSpec {
    Matrix transform;           // input_dim x input_dim, must be invertible
    std::vector<double> shift;
    double noise_scale = 0.0;

    static DomainSpec identity(std::size_t dim) {
        return {Matrix::identity(dim), std::vector<double>(dim, 0.0), 0.0};
    }

    // Rotation by `degrees` in the (axis_a, axis_b) coordinate plane.
    static DomainSpec planar_rotation(std::size_t dim, std::size_t axis_a, std::size_t axis_b,
                                      double degrees, std::vector<double> shift,
                                      double noise_scale) {
        if (axis_a >= dim || axis_b >= dim || axis_a == axis_b)
            throw std::invalid_argument("planar_rotation: bad axes");
        Matrix t = Matrix::identity(dim);
        const double rad = degrees * M_PI / 180.0;
        t(axis_a, axis_a) = std::cos(rad);
        t(axis_a, axis_b) = -std::sin(rad);
        t(axis_b, axis_a) = std::sin(rad);
        t(axis_b, axis_b) = std::cos(rad);
        return {std::move(t), std::move(shift), noise_scale};
    }
};

struct Sample {
    std::vector<double> x;
    int class_id = 0;
    int domain_id = 0;
    bool is_ukc = false;
    bool is_ukd = false;
};

struct Scenario {
    std::vector<Sample> labeled, unlabeled, val, test;
    std::size_t k_known = 0;
    std::size_t input_dim = 0;

    static Matrix features(const std::vector<Sample>& samples, std::size_t dim) {
        Matrix m(samples.size(), dim);
        for (std::size_t i = 0; i < samples.size(); ++i)
            for (std::size_t j = 0; j < dim; ++j) m(i, j) = samples[i].x[j];
        return m;
    }
    static std::vector<int> labels(const std::vector<Sample>& samples) {
        std::vector<int> out(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) out[i] = samples[i].class_id;
        return out;
    }
    Matrix one_hot(const std::vector<Sample>& samples) const {
        Matrix m(samples.size(), k_known);
        for (std::size_t i = 0; i < samples.size(); ++i) m(i, samples[i].class_id) = 1.0;
        return m;
    }
};

struct ScenarioCounts {
    std::size_t labeled_per_class = 50;
    std::size_t val_total = 200;
    std::size_t test_total = 200;
    std::size_t unlabeled_total = 600;
    double ukc_fraction = 0.3;
    double ukd_fraction = 0.3;
};

struct AugmentConfig {
    double noise_std = 0.0;
    double drop_prob = 0.0;

    void validate() const {
        if (noise_std < 0.0) throw std::invalid_argument("AugmentConfig: negative noise_std");
        if (drop_prob < 0.0 || drop_prob >= 1.0)
            throw std::invalid_argument("AugmentConfig: drop_prob outside [0,1)");
    }
};

// Gaussian noise on every coordinate, then independent coordinate dropout.
inline std::vector<double> augment(const std::vector<double>& x, const AugmentConfig& cfg,
                                   std::mt19937_64& rng) {
    cfg.validate();
    std::vector<double> out = x;
    if (cfg.noise_std > 0.0) {
        std::normal_distribution<double> noise(0.0, cfg.noise_std);
        for (double& v : out) v += noise(rng);
    }
    if (cfg.drop_prob > 0.0) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (double& v : out)
            if (unif(rng) < cfg.drop_prob) v = 0.0;
    }
    return out;
}

namespace detail {

// Determinant via LU with partial pivoting; used only to reject degenerate
// domain transforms.
inline double det(Matrix a) {
    if (a.rows != a.cols) throw std::invalid_argument("det: matrix not square");
    const std::size_t n = a.rows;
    double d = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::fabs(a(i, k)) > std::fabs(a(piv, k))) piv = i;
        if (a(piv, k) == 0.0) return 0.0;
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
            d = -d;
        }
        d *= a(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a(i, k) / a(k, k);
            for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
        }
    }
    return d;
}

inline Sample draw_sample(const ClassSpec& cls, const DomainSpec& dom, std::size_t dim,
                          std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> s(dim);
    for (std::size_t j = 0; j < dim; ++j) s[j] = cls.mean[j] + cls.scale * gauss(rng);
    Sample out;
    out.x.assign(dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
        double acc = dom.shift[i];
        for (std::size_t j = 0; j < dim; ++j) acc += dom.transform(i, j) * s[j];
        out.x[i] = acc;
    }
    if (dom.noise_scale > 0.0)
        for (std::size_t i = 0; i < dim; ++i) out.x[i] += dom.noise_scale * gauss(rng);
    return out;
}

}  // namespace detail

inline Scenario generate_scenario(const std::vector<ClassSpec>& classes,
                                  const std::vector<DomainSpec>& domains,
                                  const ScenarioCounts& counts, std::size_t k_known,
                                  std::uint64_t seed) {
    if (k_known < 2) throw std::invalid_argument("generate_scenario: need >= 2 known classes");
    if (classes.size() < k_known)
        throw std::invalid_argument("generate_scenario: fewer class specs than k_known");
    if (domains.empty()) throw std::invalid_argument("generate_scenario: need domain 0");
    const std::size_t dim = classes.front().mean.size();
    for (const ClassSpec& c : classes) {
        if (c.mean.size() != dim) throw std::invalid_argument("generate_scenario: ragged means");
        if (c.scale <= 0.0) throw std::invalid_argument("generate_scenario: scale must be > 0");
    }
    for (const DomainSpec& d : domains) {
        if (d.transform.rows != dim || d.transform.cols != dim || d.shift.size() != dim)
            throw std::invalid_argument("generate_scenario: domain shape mismatch");
        if (std::fabs(detail::det(d.transform)) <= 1e-6)
            throw std::invalid_argument("generate_scenario: degenerate domain transform");
        if (d.noise_scale < 0.0)
            throw std::invalid_argument("generate_scenario: negative noise_scale");
    }

    Scenario sc;
    sc.k_known = k_known;
    sc.input_dim = dim;
    auto rng = make_rng(seed, Stream::data);

    auto emit = [&](std::vector<Sample>& dst, std::size_t cls, std::size_t dom) {
        Sample s = detail::draw_sample(classes[cls], domains[dom], dim, rng);
        s.class_id = static_cast<int>(cls);
        s.domain_id = static_cast<int>(dom);
        s.is_ukc = cls >= k_known;
        s.is_ukd = dom != 0;
        dst.push_back(std::move(s));
    };

    for (std::size_t c = 0; c < k_known; ++c)
        for (std::size_t i = 0; i < counts.labeled_per_class; ++i) emit(sc.labeled, c, 0);
    for (std::size_t i = 0; i < counts.val_total; ++i) emit(sc.val, i % k_known, 0);
    for (std::size_t i = 0; i < counts.test_total; ++i) emit(sc.test, i % k_known, 0);

    const std::size_t n_ukc =
        static_cast<std::size_t>(std::lround(counts.ukc_fraction * counts.unlabeled_total));
    const std::size_t n_ukd =
        static_cast<std::size_t>(std::lround(counts.ukd_fraction * counts.unlabeled_total));
    if (n_ukc + n_ukd > counts.unlabeled_total)
        throw std::invalid_argument("generate_scenario: ukc+ukd fractions exceed 1");
    const std::size_t n_plain = counts.unlabeled_total - n_ukc - n_ukd;
    const std::size_t n_novel = classes.size() - k_known;
    if (n_ukc > 0 && n_novel == 0)
        throw std::invalid_argument("generate_scenario: ukc requested but no novel classes");
    if (n_ukd > 0 && domains.size() < 2)
        throw std::invalid_argument("generate_scenario: ukd requested but no extra domain");

    for (std::size_t i = 0; i < n_plain; ++i) emit(sc.unlabeled, i % k_known, 0);
    for (std::size_t i = 0; i < n_ukc; ++i) emit(sc.unlabeled, k_known + i % n_novel, 0);
    for (std::size_t i = 0; i < n_ukd; ++i)
        emit(sc.unlabeled, i % k_known, 1 + i % (domains.size() - 1));
    return sc;
}

// ---- CSV ----
// Header: split,class_id,domain_id,is_ukc,is_ukd,f0,...,f{d-1}

inline void save_csv(const Scenario& sc, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_csv: cannot open " + path);
    out << "split,class_id,domain_id,is_ukc,is_ukd";
    for (std::size_t j = 0; j < sc.input_dim; ++j) out << ",f" << j;
    out << "\n";
    char buf[64];
    auto dump = [&](const char* split, const std::vector<Sample>& samples) {
        for (const Sample& s : samples) {
            out << split << "," << s.class_id << "," << s.domain_id << "," << (s.is_ukc ? 1 : 0)
                << "," << (s.is_ukd ? 1 : 0);
            for (double v : s.x) {
                std::snprintf(buf, sizeof(buf), "%.17g", v);
                out << "," << buf;
            }
            out << "\n";
        }
    };
    dump("labeled", sc.labeled);
    dump("unlabeled", sc.unlabeled);
    dump("val", sc.val);
    dump("test", sc.test);
    if (!out) throw std::runtime_error("save_csv: write failed for " + path);
}

inline Scenario load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_csv: empty file " + path);
    auto fail = [&](std::size_t lineno, const std::string& why) {
        throw std::runtime_error("load_csv: " + path + ":" + std::to_string(lineno) + ": " + why);
    };

    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) header.push_back(f);
    }
    const std::vector<std::string> fixed = {"split", "class_id", "domain_id", "is_ukc", "is_ukd"};
    if (header.size() < fixed.size()) fail(1, "short header");
    for (std::size_t i = 0; i < fixed.size(); ++i)
        if (header[i] != fixed[i]) fail(1, "bad header field '" + header[i] + "'");
    const std::size_t dim = header.size() - fixed.size();
    for (std::size_t j = 0; j < dim; ++j)
        if (header[fixed.size() + j] != "f" + std::to_string(j)) fail(1, "bad feature header");

    Scenario sc;
    sc.input_dim = dim;
    int max_known = -1;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != fixed.size() + dim)
            fail(lineno, "expected " + std::to_string(fixed.size() + dim) + " fields, got " +
                             std::to_string(fields.size()));
        Sample s;
        try {
            s.class_id = std::stoi(fields[1]);
            s.domain_id = std::stoi(fields[2]);
            s.is_ukc = std::stoi(fields[3]) != 0;
            s.is_ukd = std::stoi(fields[4]) != 0;
            s.x.resize(dim);
            for (std::size_t j = 0; j < dim; ++j) {
                std::size_t used = 0;
                s.x[j] = std::stod(fields[fixed.size() + j], &used);
                if (used != fields[fixed.size() + j].size()) fail(lineno, "bad float");
            }
        } catch (const std::invalid_argument&) {
            fail(lineno, "malformed value");
        } catch (const std::out_of_range&) {
            fail(lineno, "value out of range");
        }
        if (!s.is_ukc) max_known = std::max(max_known, s.class_id);
        if (fields[0] == "labeled") sc.labeled.push_back(std::move(s));
        else if (fields[0] == "unlabeled") sc.unlabeled.push_back(std::move(s));
        else if (fields[0] == "val") sc.val.push_back(std::move(s));
        else if (fields[0] == "test") sc.test.push_back(std::move(s));
        else fail(lineno, "unknown split '" + fields[0] + "'");
    }
    sc.k_known = static_cast<std::size_t>(max_known + 1);
    return sc;
}

// ---- scenario description files ----
// Plain key = value lines; '#' starts a comment. Vectors are comma separated,
// matrices use ';' between rows.

struct ScenarioSpec {
    std::size_t input_dim = 8;
    std::size_t k_known = 4;
    std::uint64_t seed = 1;
    ScenarioCounts counts;
    std::vector<ClassSpec> classes;
    std::vector<DomainSpec> domains;
};

// Four known classes on a radius-6 circle in 8-D, two novel-class blobs
// placed between them at radius 13.5 (at least 10 away from every known
// mean), and one shifted-and-rotated extra domain.
inline ScenarioSpec default_scenario_spec(std::uint64_t seed) {
    ScenarioSpec spec;
    spec.seed = seed;
    const std::size_t dim = spec.input_dim;
    auto planar = [&](double radius, double degrees) {
        std::vector<double> m(dim, 0.0);
        const double rad = degrees * M_PI / 180.0;
        m[0] = radius * std::cos(rad);
        m[1] = radius * std::sin(rad);
        return m;
    };
    for (int j = 0; j < 4; ++j) spec.classes.push_back({planar(6.0, 90.0 * j), 2.0});
    spec.classes.push_back({planar(13.5, 45.0), 2.0});
    spec.classes.push_back({planar(13.5, 225.0), 2.0});
    spec.domains.push_back(DomainSpec::identity(dim));
    spec.domains.push_back(
        DomainSpec::planar_rotation(dim, 0, 1, 30.0, std::vector<double>(dim, 3.0), 0.5));
    return spec;
}

inline Scenario generate_scenario(const ScenarioSpec& spec) {
    return generate_scenario(spec.classes, spec.domains, spec.counts, spec.k_known, spec.seed);
}

namespace detail {

inline std::vector<double> parse_vector(const std::string& s, std::size_t lineno) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (...) {
            throw std::runtime_error("scenario spec line " + std::to_string(lineno) +
                                     ": bad number '" + item + "'");
        }
    }
    return out;
}

inline std::string format_vector(const std::vector<double>& v) {
    char buf[64];
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
        if (i) out += ",";
        out += buf;
    }
    return out;
}

}  // namespace detail

inline void save_scenario_spec(const ScenarioSpec& spec, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_scenario_spec: cannot open " + path);
    out << "input_dim = " << spec.input_dim << "\n";
    out << "k_known = " << spec.k_known << "\n";
    out << "seed = " << spec.seed << "\n";
    out << "labeled_per_class = " << spec.counts.labeled_per_class << "\n";
    out << "val_total = " << spec.counts.val_total << "\n";
    out << "test_total = " << spec.counts.test_total << "\n";
    out << "unlabeled_total = " << spec.counts.unlabeled_total << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", spec.counts.ukc_fraction);
    out << "ukc_fraction = " << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", spec.counts.ukd_fraction);
    out << "ukd_fraction = " << buf << "\n";
    for (std::size_t c = 0; c < spec.classes.size(); ++c) {
        out << "class." << c << ".mean = " << detail::format_vector(spec.classes[c].mean) << "\n";
        std::snprintf(buf, sizeof(buf), "%.17g", spec.classes[c].scale);
        out << "class." << c << ".scale = " << buf << "\n";
    }
    for (std::size_t d = 0; d < spec.domains.size(); ++d) {
        const DomainSpec& dom = spec.domains[d];
        out << "domain." << d << ".transform = ";
        for (std::size_t i = 0; i < dom.transform.rows; ++i) {
            if (i) out << ";";
            std::vector<double> row(dom.transform.data.begin() + i * dom.transform.cols,
                                    dom.transform.data.begin() + (i + 1) * dom.transform.cols);
            out << detail::format_vector(row);
        }
        out << "\n";
        out << "domain." << d << ".shift = " << detail::format_vector(dom.shift) << "\n";
        std::snprintf(buf, sizeof(buf), "%.17g", dom.noise_scale);
        out << "domain." << d << ".noise_scale = " << buf << "\n";
    }
    if (!out) throw std::runtime_error("save_scenario_spec: write failed for " + path);
}

inline ScenarioSpec load_scenario_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_scenario_spec: cannot open " + path);
    ScenarioSpec spec;
    spec.classes.clear();
    spec.domains.clear();
    std::map<std::size_t, ClassSpec> classes;
    struct DomainDraft {
        Matrix transform;
        std::vector<double> shift;
        double noise_scale = 0.0;
        bool has_rotation = false;
        std::size_t rot_a = 0, rot_b = 1;
        double rot_deg = 0.0;
    };
    std::map<std::size_t, DomainDraft> domains;

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos)
                throw std::runtime_error("scenario spec line " + std::to_string(lineno) +
                                         ": expected key = value");
            continue;
        }
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        auto as_num = [&](const std::string& v) {
            try {
                return std::stod(v);
            } catch (...) {
                throw std::runtime_error("scenario spec line " + std::to_string(lineno) +
                                         ": bad number '" + v + "'");
            }
        };

        if (key == "input_dim") spec.input_dim = static_cast<std::size_t>(as_num(value));
        else if (key == "k_known") spec.k_known = static_cast<std::size_t>(as_num(value));
        else if (key == "seed") spec.seed = static_cast<std::uint64_t>(as_num(value));
        else if (key == "labeled_per_class")
            spec.counts.labeled_per_class = static_cast<std::size_t>(as_num(value));
        else if (key == "val_total") spec.counts.val_total = static_cast<std::size_t>(as_num(value));
        else if (key == "test_total")
            spec.counts.test_total = static_cast<std::size_t>(as_num(value));
        else if (key == "unlabeled_total")
            spec.counts.unlabeled_total = static_cast<std::size_t>(as_num(value));
        else if (key == "ukc_fraction") spec.counts.ukc_fraction = as_num(value);
        else if (key == "ukd_fraction") spec.counts.ukd_fraction = as_num(value);
        else if (key.rfind("class.", 0) == 0 || key.rfind("domain.", 0) == 0) {
            const bool is_class = key.rfind("class.", 0) == 0;
            const std::size_t first_dot = key.find('.');
            const std::size_t second_dot = key.find('.', first_dot + 1);
            if (second_dot == std::string::npos)
                throw std::runtime_error("scenario spec line " + std::to_string(lineno) +
                                         ": malformed key '" + key + "'");
            const std::size_t idx = static_cast<std::size_t>(
                std::stoul(key.substr(first_dot + 1, second_dot - first_dot - 1)));
            const std::string attr = key.substr(second_dot + 1);
            if (is_class) {
                ClassSpec& c = classes[idx];
                if (attr == "mean") c.mean = detail::parse_vector(value, lineno);
                else if (attr == "scale") c.scale = as_num(value);
                else
                    throw std::runtime_error("scenario spec line " + std::to_string(lineno) +
                                             ": unknown class attribute '" + attr + "'");
            } else {
                DomainDraft& d = domains[idx];
                if (attr == "shift") d.shift = detail::parse_vector(value, lineno);
                else if (attr == "noise_scale") d.noise_scale = as_num(value);
                else if (attr == "rotation") {
                    const std::vector<double> r = detail::parse_vector(value, lineno);
                    if (r.size() != 3)
                        throw std::runtime_error("scenario spec line " + std::to_string(lineno) +
                                                 ": rotation needs axis_a,axis_b,degrees");
                    d.has_rotation = true;
                    d.rot_a = static_cast<std::size_t>(r[0]);
                    d.rot_b = static_cast<std::size_t>(r[1]);
                    d.rot_deg = r[2];
                } else if (attr == "transform") {
                    std::stringstream rows(value);
                    std::string row;
                    std::vector<std::vector<double>> parsed;
                    while (std::getline(rows, row, ';'))
                        parsed.push_back(detail::parse_vector(row, lineno));
                    if (parsed.empty())
                        throw std::runtime_error("scenario spec line " + std::to_string(lineno) +
                                                 ": empty transform");
                    Matrix t(parsed.size(), parsed.front().size());
                    for (std::size_t i = 0; i < parsed.size(); ++i) {
                        if (parsed[i].size() != t.cols)
                            throw std::runtime_error("scenario spec line " +
                                                     std::to_string(lineno) + ": ragged transform");
                        for (std::size_t j = 0; j < t.cols; ++j) t(i, j) = parsed[i][j];
                    }
                    d.transform = std::move(t);
                } else
                    throw std::runtime_error("scenario spec line " + std::to_string(lineno) +
                                             ": unknown domain attribute '" + attr + "'");
            }
        } else
            throw std::runtime_error("scenario spec line " + std::to_string(lineno) +
                                     ": unknown key '" + key + "'");
    }

    for (auto& [idx, c] : classes) {
        if (idx != spec.classes.size())
            throw std::runtime_error("load_scenario_spec: class indices must be contiguous");
        if (c.mean.empty())
            throw std::runtime_error("load_scenario_spec: class " + std::to_string(idx) +
                                     " missing mean");
        spec.classes.push_back(std::move(c));
    }
    for (auto& [idx, d] : domains) {
        if (idx != spec.domains.size())
            throw std::runtime_error("load_scenario_spec: domain indices must be contiguous");
        if (d.shift.empty()) d.shift.assign(spec.input_dim, 0.0);
        DomainSpec out;
        if (d.has_rotation)
            out = DomainSpec::planar_rotation(spec.input_dim, d.rot_a, d.rot_b, d.rot_deg, d.shift,
                                              d.noise_scale);
        else {
            out.transform = d.transform.rows ? d.transform : Matrix::identity(spec.input_dim);
            out.shift = d.shift;
            out.noise_scale = d.noise_scale;
        }
        spec.domains.push_back(std::move(out));
    }
    if (spec.domains.empty()) spec.domains.push_back(DomainSpec::identity(spec.input_dim));
    if (spec.classes.empty())
        throw std::runtime_error("load_scenario_spec: no classes in " + path);
    return spec;
}

}  // namespace ussl
