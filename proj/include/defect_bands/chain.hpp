#pragma once

#include "defect_bands/linalg.hpp"
#include "defect_bands/model.hpp"
#include "defect_bands/parallel.hpp"
#include "defect_bands/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace defect_bands {

/// Evaluates the matrices B_0, ..., B_N of the defect cascade at a fixed
/// omega. Levels are indexed by codim; level j depends only on the torus
/// components j..N-1 (0-based).
///
/// The brackets are iterated one axis at a time:
///   G_1 = <B_0^-1>_1,  G_i = <B_{i-1}^-1 G_{i-1}>_i,  B_i = I + G_i A_i,
/// which equals <B_{i-1}^-1 ... B_0^-1 A_i>_{1..i} because A_i and every
/// B_l (l >= 1) are constant along the axes being integrated. Each G_i value
/// is cached by its remaining-coordinate tuple.
class ChainEvaluator {
public:
    struct Options {
        long n_start = 16;
        long n_max = 1L << 16;
        double quad_rel_tol = 1e-12;
    };

    ChainEvaluator(const ProblemSpec& spec, Complex omega, Options opt)
        : spec_(&spec), omega_(omega), opt_(opt), cache_(std::make_shared<Cache>()) {}

    ChainEvaluator(const ProblemSpec& spec, Complex omega)
        : ChainEvaluator(spec, omega,
                         Options{spec.tolerances.k_grid_base, 1L << 16, spec.tolerances.quad_rel_tol}) {}

    // The evaluator refers to the spec; it must outlive the evaluator.
    ChainEvaluator(ProblemSpec&&, Complex, Options) = delete;
    ChainEvaluator(ProblemSpec&&, Complex) = delete;

    int lattice_dim() const noexcept { return spec_->lattice_dim; }
    Complex omega() const noexcept { return omega_; }
    const ProblemSpec& spec() const noexcept { return *spec_; }

    ComplexMatrix b0(std::span<const double> k) const { return spec_->bulk.eval(omega_, k); }

    bool has_defect(int codim) const { return spec_->defect(codim) != nullptr; }

    ComplexMatrix defect_matrix(int codim, std::span<const double> k) const {
        const DefectLayer* d = spec_->defect(codim);
        if (!d) return ComplexMatrix::Zero(spec_->cell_size, spec_->cell_size);
        return d->symbol.eval(omega_, k);
    }

    /// G_i at k; only components i..N-1 of k matter.
    ComplexMatrix g(int level, std::span<const double> k) const {
        const Eigen::Index m = spec_->cell_size;
        if (level == 0) return identity(m);
        const auto key = cache_key(level, k);
        {
            std::lock_guard lock(cache_->mutex);
            auto it = cache_->g.find(key);
            if (it != cache_->g.end()) return it->second;
        }
        const int axis = level - 1;
        MatrixFunction integrand = [this, level](std::span<const double> kk) -> ComplexMatrix {
            return b_inv(level - 1, kk) * g(level - 1, kk);
        };
        AdaptiveOptions aopt;
        aopt.tol_rel = opt_.quad_rel_tol;
        aopt.n_start = opt_.n_start;
        aopt.n_max = opt_.n_max;
        aopt.monitor = [this, level](std::span<const double> kk) {
            return smallest_singular_value(b(level - 1, kk));
        };
        std::vector<double> base(k.begin(), k.end());
        ComplexMatrix value = adaptive_bracket_at(integrand, {axis}, base, aopt).value;
        std::lock_guard lock(cache_->mutex);
        cache_->g.emplace(key, value);
        return value;
    }

    /// B_j at k. Absent defect levels are the identity.
    ComplexMatrix b(int level, std::span<const double> k) const {
        if (level == 0) return b0(k);
        if (!has_defect(level)) return identity(spec_->cell_size);
        ComplexMatrix out = identity(spec_->cell_size);
        out.noalias() += g(level, k) * defect_matrix(level, k);
        return out;
    }

    ComplexMatrix b_inv(int level, std::span<const double> k) const {
        if (level > 0 && !has_defect(level)) return identity(spec_->cell_size);
        return inverse(b(level, k));
    }

private:
    using Key = std::pair<int, std::vector<double>>;
    struct Cache {
        std::mutex mutex;
        std::map<Key, ComplexMatrix> g;
    };

    static Key cache_key(int level, std::span<const double> k) {
        return {level, std::vector<double>(k.begin() + level, k.end())};
    }

    const ProblemSpec* spec_;
    Complex omega_;
    Options opt_;
    std::shared_ptr<Cache> cache_;
};

/// B_0(omega, .) as a callable; with the standard shift this is A(k) - omega I.
inline MatrixFunction build_b0(const ProblemSpec& spec, double omega) {
    return [&spec, omega](std::span<const double> k) { return spec.bulk.eval(omega, k); };
}

struct StepCheckOptions {
    double det_zero_tol = 1e-9;
    /// Real-valued zero test available: sorted eigenvalues at level 0,
    /// real part of det at higher levels (Hermitian family at real omega).
    bool hermitian = true;
    int refine_rounds = 10;
    int refine_seeds = 3;
    int threads = 1;
};

struct StepCheck {
    bool detected = false;
    double min_sigma = std::numeric_limits<double>::infinity();
    std::vector<double> witness_k;
    Complex det_at_witness{0.0, 0.0};
    /// "crossing", "sigma_threshold", "refined_minimum", "det_threshold" or "none".
    std::string method = "none";
};

namespace detail {

struct NodeSample {
    double sigma = 0.0;
    std::vector<double> zero_test;  // sorted eigenvalues or {Re det}
    Complex det{0.0, 0.0};
};

inline NodeSample sample_level(const MatrixFunction& level_fn, int level, std::span<const double> k,
                               const StepCheckOptions& opt) {
    NodeSample s;
    const ComplexMatrix m = level_fn(k);
    s.det = det(m);
    if (opt.hermitian && level == 0) {
        s.zero_test = hermitian_eigenvalues(m, 1e-8);
        s.sigma = std::numeric_limits<double>::infinity();
        for (double e : s.zero_test) s.sigma = std::min(s.sigma, std::abs(e));
    } else {
        s.sigma = smallest_singular_value(m);
        if (opt.hermitian) s.zero_test = {s.det.real()};
    }
    return s;
}

inline bool crosses(const NodeSample& a, const NodeSample& b) {
    const std::size_t n = std::min(a.zero_test.size(), b.zero_test.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (a.zero_test[i] * b.zero_test[i] <= 0.0) return true;
    }
    return false;
}

/// Lexicographic tensor grid over `axes` (first axis slowest).
inline std::vector<std::vector<double>> tensor_points(const std::vector<int>& axes, const std::vector<double>& base,
                                                      const std::vector<std::vector<double>>& coords) {
    std::size_t count = 1;
    for (const auto& c : coords) count *= c.size();
    std::vector<std::vector<double>> out;
    out.reserve(count);
    for (std::size_t flat = 0; flat < count; ++flat) {
        std::vector<double> k = base;
        std::size_t rem = flat;
        for (std::size_t a = axes.size(); a-- > 0;) {
            k[static_cast<std::size_t>(axes[a])] = coords[a][rem % coords[a].size()];
            rem /= coords[a].size();
        }
        out.push_back(std::move(k));
    }
    return out;
}

}  // namespace detail

/// Decides "det B_level(k) = 0 for some k" over the periodic grid of the
/// remaining axes (level..N-1), with n points per axis.
inline StepCheck step_check(const MatrixFunction& level_fn, int level, int lattice_dim, long n,
                            const StepCheckOptions& opt) {
    StepCheck out;
    std::vector<int> axes;
    for (int a = level; a < lattice_dim; ++a) axes.push_back(a);
    const std::vector<double> origin(static_cast<std::size_t>(lattice_dim), 0.0);

    if (axes.empty()) {
        const ComplexMatrix m = level_fn(origin);
        out.det_at_witness = det(m);
        out.min_sigma = smallest_singular_value(m);
        out.witness_k = origin;
        if (std::abs(out.det_at_witness) <= opt.det_zero_tol) {
            out.detected = true;
            out.method = "det_threshold";
        }
        return out;
    }

    std::vector<double> axis_nodes(static_cast<std::size_t>(n));
    for (long l = 0; l < n; ++l) axis_nodes[static_cast<std::size_t>(l)] = periodic_node(l, n);
    const auto points = detail::tensor_points(axes, origin, std::vector<std::vector<double>>(axes.size(), axis_nodes));
    const auto samples = parallel_map<detail::NodeSample>(
        points.size(), opt.threads, [&](std::size_t i) { return detail::sample_level(level_fn, level, points[i], opt); });

    std::size_t best = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].sigma < samples[best].sigma) best = i;
    }
    out.min_sigma = samples[best].sigma;
    out.witness_k = points[best];
    out.det_at_witness = samples[best].det;

    // Sign crossings between periodic grid neighbours.
    if (opt.hermitian) {
        const std::size_t dims = axes.size();
        std::vector<std::size_t> stride(dims, 1);
        for (std::size_t a = dims - 1; a-- > 0;) stride[a] = stride[a + 1] * static_cast<std::size_t>(n);
        for (std::size_t i = 0; i < samples.size(); ++i) {
            for (std::size_t a = 0; a < dims; ++a) {
                const std::size_t l = (i / stride[a]) % static_cast<std::size_t>(n);
                const std::size_t j =
                    l + 1 == static_cast<std::size_t>(n) ? i - l * stride[a] : i + stride[a];
                if (detail::crosses(samples[i], samples[j])) {
                    out.detected = true;
                    out.method = "crossing";
                    const std::size_t w = samples[i].sigma <= samples[j].sigma ? i : j;
                    out.witness_k = points[w];
                    out.det_at_witness = samples[w].det;
                    out.min_sigma = std::min(out.min_sigma, samples[w].sigma);
                    return out;
                }
            }
        }
    }
    if (out.min_sigma <= opt.det_zero_tol) {
        out.detected = true;
        out.method = "sigma_threshold";
        return out;
    }

    // Zoom around the smallest local minima to catch zeros between nodes
    // (tangential touching is invisible to the crossing test).
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return samples[a].sigma < samples[b].sigma; });
    const std::size_t seeds = std::min<std::size_t>(static_cast<std::size_t>(opt.refine_seeds), order.size());
    for (std::size_t s = 0; s < seeds; ++s) {
        std::vector<double> center = points[order[s]];
        double h = kTwoPi / static_cast<double>(n);
        for (int round = 0; round < opt.refine_rounds; ++round) {
            constexpr int kLocal = 9;
            std::vector<std::vector<double>> coords(axes.size());
            for (std::size_t a = 0; a < axes.size(); ++a) {
                const double c = center[static_cast<std::size_t>(axes[a])];
                for (int t = 0; t < kLocal; ++t) coords[a].push_back(c - h + 2.0 * h * t / (kLocal - 1));
            }
            const auto local = detail::tensor_points(axes, center, coords);
            const auto ls = parallel_map<detail::NodeSample>(local.size(), opt.threads, [&](std::size_t i) {
                return detail::sample_level(level_fn, level, local[i], opt);
            });
            std::size_t lb = 0;
            for (std::size_t i = 0; i < ls.size(); ++i) {
                if (ls[i].sigma < ls[lb].sigma) lb = i;
            }
            if (ls[lb].sigma < out.min_sigma) {
                out.min_sigma = ls[lb].sigma;
                out.witness_k = local[lb];
                out.det_at_witness = ls[lb].det;
            }
            bool crossed = false;
            if (opt.hermitian) {
                for (std::size_t i = 0; i + 1 < ls.size() && !crossed; ++i) {
                    crossed = (i + 1) % kLocal != 0 && detail::crosses(ls[i], ls[i + 1]);
                }
            }
            if (crossed || out.min_sigma <= opt.det_zero_tol) {
                out.detected = true;
                out.method = "refined_minimum";
                return out;
            }
            center = local[lb];
            h /= 4.0;
        }
    }
    return out;
}

enum class Verdict { In, Out, Inconclusive };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::In: return "IN";
        case Verdict::Out: return "OUT";
        case Verdict::Inconclusive: return "INCONCLUSIVE";
    }
    return "?";
}

struct LevelCertificate {
    int level = 0;
    bool present = true;
    bool built = false;
    bool certified_invertible = false;
    double min_sigma = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> witness_k;
    Complex det_at_witness{0.0, 0.0};
    std::string method = "none";
};

/// Levels B_0..B_j built so far at one omega, with their certificates.
struct BChain {
    double omega = 0.0;
    std::shared_ptr<ChainEvaluator> evaluator;
    std::vector<LevelCertificate> levels;

    bool certified_through(int level) const {
        if (static_cast<int>(levels.size()) <= level) return false;
        for (int i = 0; i <= level; ++i) {
            if (!levels[static_cast<std::size_t>(i)].certified_invertible) return false;
        }
        return true;
    }
};

inline StepCheckOptions step_options(const ProblemSpec& spec, const SweepGrids& grids) {
    StepCheckOptions o;
    o.det_zero_tol = spec.tolerances.det_zero_tol;
    bool herm = spec.bulk.is_hermitian_family();
    for (const auto& d : spec.defects) herm = herm && d.symbol.is_hermitian_family();
    o.hermitian = herm;
    o.threads = grids.threads;
    return o;
}

inline LevelCertificate certify(const StepCheck& sc, int level) {
    LevelCertificate c;
    c.level = level;
    c.built = true;
    c.certified_invertible = !sc.detected;
    c.min_sigma = sc.min_sigma;
    c.witness_k = sc.witness_k;
    c.det_at_witness = sc.det_at_witness;
    c.method = sc.method;
    return c;
}

/// Starts a chain at omega with level 0 checked. The chain refers to spec.
BChain start_chain(ProblemSpec&&, double, const SweepGrids&) = delete;

inline BChain start_chain(const ProblemSpec& spec, double omega, const SweepGrids& grids) {
    BChain chain;
    chain.omega = omega;
    chain.evaluator = std::make_shared<ChainEvaluator>(spec, omega);
    auto ev = chain.evaluator;
    MatrixFunction f = [ev](std::span<const double> k) { return ev->b0(k); };
    chain.levels.push_back(certify(step_check(f, 0, spec.lattice_dim, grids.k_points, step_options(spec, grids)), 0));
    return chain;
}

/// Builds level j. Requires every lower level to be certified invertible.
/// Missing defect levels are identity pass-throughs.
inline BChain& extend_chain(BChain& chain, const ProblemSpec& spec, int level, const SweepGrids& grids) {
    if (static_cast<int>(chain.levels.size()) != level) {
        throw std::logic_error("extend_chain: levels must be built in order");
    }
    if (!chain.certified_through(level - 1)) {
        throw std::logic_error("extend_chain: level " + std::to_string(level) +
                               " requested without certificates for all lower levels");
    }
    if (!spec.defect(level)) {
        LevelCertificate c;
        c.level = level;
        c.present = false;
        c.certified_invertible = true;
        c.min_sigma = 1.0;
        c.method = "pass_through";
        chain.levels.push_back(c);
        return chain;
    }
    auto ev = chain.evaluator;
    MatrixFunction f = [ev, level](std::span<const double> k) { return ev->b(level, k); };
    chain.levels.push_back(certify(step_check(f, level, spec.lattice_dim, grids.k_points, step_options(spec, grids)), level));
    return chain;
}

struct MembershipCertificate {
    Verdict verdict = Verdict::Out;
    bool in_spectrum = false;
    std::optional<int> detected_at_step;
    std::vector<double> witness_k;
    std::vector<double> min_sigma_per_level;
    std::vector<LevelCertificate> levels;
    std::string note;
};

/// Runs the cascade at lambda: level 0, then each level up to the highest
/// defect codim, stopping at the first certified zero.
inline MembershipCertificate membership(const ProblemSpec& spec, double lambda, const SweepGrids& grids) {
    MembershipCertificate cert;
    auto finish = [&](const BChain& chain) {
        cert.levels = chain.levels;
        for (const auto& l : chain.levels) cert.min_sigma_per_level.push_back(l.min_sigma);
        return cert;
    };
    BChain chain = start_chain(spec, lambda, grids);
    if (!chain.levels[0].certified_invertible) {
        cert.verdict = Verdict::In;
        cert.in_spectrum = true;
        cert.detected_at_step = 0;
        cert.witness_k = chain.levels[0].witness_k;
        return finish(chain);
    }
    const int top = spec.highest_defect_codim();
    double lowest_sigma = chain.levels[0].min_sigma;
    for (int j = 1; j <= top; ++j) {
        if (spec.defect(j) && lowest_sigma < spec.tolerances.band_guard) {
            cert.verdict = Verdict::Inconclusive;
            cert.note = "lambda within band_guard of a lower-level spectrum (min sigma " + std::to_string(lowest_sigma) +
                        ")";
            return finish(chain);
        }
        try {
            extend_chain(chain, spec, j, grids);
        } catch (const NonConvergence& e) {
            cert.verdict = Verdict::Inconclusive;
            cert.note = std::string(e.what()) + " (min sigma " + std::to_string(e.min_sigma()) + ")";
            return finish(chain);
        } catch (const SingularMatrix& e) {
            cert.verdict = Verdict::Inconclusive;
            cert.note = e.what();
            return finish(chain);
        }
        const auto& lvl = chain.levels.back();
        if (!lvl.certified_invertible) {
            cert.verdict = Verdict::In;
            cert.in_spectrum = true;
            cert.detected_at_step = j;
            cert.witness_k = lvl.witness_k;
            return finish(chain);
        }
        if (lvl.present) lowest_sigma = std::min(lowest_sigma, lvl.min_sigma);
    }
    cert.verdict = Verdict::Out;
    return finish(chain);
}

}  // namespace defect_bands
