// defect-bands: command-line front end for band, membership, spectrum and
// truncation-oracle computations on periodic lattices with nested defects.

#include "defect_bands/config.hpp"
#include "defect_bands/csv.hpp"
#include "defect_bands/defect_bands.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace defect_bands;
using nlohmann::json;

enum Exit : int { kOk = 0, kDomain = 1, kIo = 2, kInconclusive = 3 };

/// I/O failure while writing results.
struct OutputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string config;
    std::optional<double> omega;
    std::vector<long> box;
    std::vector<std::string> bc;
    std::optional<long> k_points;
    std::vector<std::string> k_path;
    std::string out;
    bool json = false;
    int threads = 1;
    double tol = 1e-8;
};

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("defect-bands");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("DEFECT_BANDS_LOG")) {
        const std::string level = env;
        if (level == "error") spdlog::set_level(spdlog::level::err);
        else if (level == "warn") spdlog::set_level(spdlog::level::warn);
        else if (level == "info") spdlog::set_level(spdlog::level::info);
        else if (level == "debug") spdlog::set_level(spdlog::level::debug);
        else spdlog::warn("DEFECT_BANDS_LOG={} not one of error,warn,info,debug; using warn", level);
    }
}

json to_json(const std::vector<double>& v) { return json(v); }

json to_json(const Interval& iv) { return json::array({iv.lo, iv.hi}); }

json sigma_json(double s) { return std::isfinite(s) ? json(s) : json(nullptr); }

/// Writes text to --out, or to stdout when no path was given.
void emit(const Options& opt, const std::string& text) {
    if (opt.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(opt.out, std::ios::binary);
    if (!f) throw OutputError("cannot open output file: " + opt.out);
    f << text;
    if (!f) throw OutputError("failed writing output file: " + opt.out);
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw OutputError("cannot open output file: " + path);
    f << text;
    if (!f) throw OutputError("failed writing output file: " + path);
}

ConfigDocument load(const Options& opt) {
    auto doc = load_config(opt.config);
    if (opt.k_points) doc.grids.k_points = *opt.k_points;
    doc.grids.threads = opt.threads;
    spdlog::info("loaded {}: dimension {}, cell size {}, {} defect layer(s)", opt.config, doc.spec.lattice_dim,
                 doc.spec.cell_size, doc.spec.defects.size());
    return doc;
}

/// Loads and validates; prints violations and returns false on failure.
bool load_valid(const Options& opt, ConfigDocument& doc) {
    doc = load(opt);
    doc.spec.sort_defects();
    const auto diag = validate(doc.spec);
    for (const auto& v : diag.violations) std::cerr << "violation " << v.code << ": " << v.message << '\n';
    return diag.ok();
}

int cmd_validate(const Options& opt) {
    auto doc = load(opt);
    const auto diag = validate(doc.spec);
    if (opt.json) {
        json j;
        j["ok"] = diag.ok();
        j["violations"] = json::array();
        for (const auto& v : diag.violations) j["violations"].push_back({{"code", v.code}, {"message", v.message}});
        j["bulk_hermitian"] = diag.bulk_hermitian;
        j["max_power"] = diag.max_power;
        j["defects"] = json::array();
        for (const auto& [codim, herm] : diag.defect_hermitian) {
            j["defects"].push_back({{"codim", codim}, {"hermitian", herm}});
        }
        emit(opt, j.dump(2) + "\n");
    } else {
        std::ostringstream os;
        if (diag.ok()) {
            os << "ok: dimension " << doc.spec.lattice_dim << ", cell size " << doc.spec.cell_size << ", "
               << doc.spec.defects.size() << " defect layer(s), max omega power " << diag.max_power
               << (diag.bulk_hermitian ? ", self-adjoint bulk" : ", non-self-adjoint bulk") << '\n';
        }
        for (const auto& v : diag.violations) os << "violation " << v.code << ": " << v.message << '\n';
        emit(opt, os.str());
    }
    return diag.ok() ? kOk : kDomain;
}

std::vector<double> parse_point(const std::string& s, int dim) {
    std::vector<double> k;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            k.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw InputError("--k-path: bad number \"" + item + "\" in point \"" + s + "\"");
        }
    }
    if (static_cast<int>(k.size()) != dim) {
        throw InputError("--k-path: point \"" + s + "\" needs " + std::to_string(dim) + " components");
    }
    return k;
}

/// k points for the band table: a polyline through --k-path vertices with
/// k_points samples per segment, or a tensor grid over [-pi, pi]^N with both
/// ends included.
std::vector<std::vector<double>> band_points(const Options& opt, const ConfigDocument& doc) {
    const int dim = doc.spec.lattice_dim;
    const long n = doc.grids.k_points;
    if (n < 2) throw InputError("--k-points must be >= 2");
    std::vector<std::vector<double>> pts;
    if (!opt.k_path.empty()) {
        std::vector<std::vector<double>> verts;
        for (const auto& s : opt.k_path) verts.push_back(parse_point(s, dim));
        if (verts.size() == 1) return verts;
        for (std::size_t s = 0; s + 1 < verts.size(); ++s) {
            for (long i = s == 0 ? 0 : 1; i < n; ++i) {
                const double t = static_cast<double>(i) / static_cast<double>(n - 1);
                std::vector<double> k(static_cast<std::size_t>(dim));
                for (std::size_t a = 0; a < k.size(); ++a) {
                    k[a] = i == n - 1 ? verts[s + 1][a] : verts[s][a] + t * (verts[s + 1][a] - verts[s][a]);
                }
                pts.push_back(k);
            }
        }
        return pts;
    }
    std::size_t total = 1;
    for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>(n);
    if (total > 4'000'000) throw InputError("--k-points: grid of " + std::to_string(total) + " points is too large");
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::vector<double> k(static_cast<std::size_t>(dim));
        std::size_t rem = flat;
        for (std::size_t a = k.size(); a-- > 0;) {
            const auto l = static_cast<long>(rem % static_cast<std::size_t>(n));
            rem /= static_cast<std::size_t>(n);
            k[a] = l == n - 1 ? kPi : -kPi + kTwoPi * static_cast<double>(l) / static_cast<double>(n - 1);
        }
        pts.push_back(k);
    }
    return pts;
}

int cmd_bands(const Options& opt) {
    ConfigDocument doc;
    if (!load_valid(opt, doc)) return kDomain;
    const auto pts = band_points(opt, doc);
    const auto vals = parallel_map<std::vector<double>>(pts.size(), opt.threads,
                                                        [&](std::size_t i) { return bands(doc.spec, pts[i]); });
    if (opt.json) {
        json rows = json::array();
        for (std::size_t i = 0; i < pts.size(); ++i) {
            for (std::size_t b = 0; b < vals[i].size(); ++b) {
                rows.push_back({{"k", pts[i]}, {"band_index", b}, {"omega", vals[i][b]}});
            }
        }
        emit(opt, json{{"dimension", doc.spec.lattice_dim}, {"rows", rows}}.dump(2) + "\n");
        return kOk;
    }
    std::ostringstream os;
    CsvWriter csv(os);
    for (int a = 1; a <= doc.spec.lattice_dim; ++a) csv.field("k_" + std::to_string(a));
    csv.field("band_index").field("omega");
    csv.end_row();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t b = 0; b < vals[i].size(); ++b) {
            for (double k : pts[i]) csv.field(k);
            csv.field(b).field(vals[i][b]);
            csv.end_row();
        }
    }
    emit(opt, os.str());
    return kOk;
}

int cmd_membership(const Options& opt) {
    if (!opt.omega) throw InputError("membership requires --omega");
    ConfigDocument doc;
    if (!load_valid(opt, doc)) return kDomain;
    const double lambda = *opt.omega;
    const auto cert = membership(doc.spec, lambda, doc.grids);
    spdlog::info("membership at {}: {}", lambda, to_string(cert.verdict));
    if (opt.json) {
        json j;
        j["omega"] = lambda;
        j["verdict"] = to_string(cert.verdict);
        j["in_spectrum"] = cert.in_spectrum;
        j["detected_at_step"] = cert.detected_at_step ? json(*cert.detected_at_step) : json(nullptr);
        j["witness_k"] = cert.witness_k;
        j["min_sigma_per_level"] = json::array();
        for (double s : cert.min_sigma_per_level) j["min_sigma_per_level"].push_back(sigma_json(s));
        j["levels"] = json::array();
        for (const auto& l : cert.levels) {
            j["levels"].push_back({{"level", l.level},
                                   {"present", l.present},
                                   {"built", l.built},
                                   {"certified_invertible", l.certified_invertible},
                                   {"min_sigma", sigma_json(l.min_sigma)},
                                   {"witness_k", l.witness_k},
                                   {"det_at_witness", {{"re", l.det_at_witness.real()}, {"im", l.det_at_witness.imag()}}},
                                   {"method", l.method}});
        }
        j["note"] = cert.note;
        emit(opt, j.dump(2) + "\n");
    } else {
        std::ostringstream os;
        os << "omega: " << format_double(lambda) << '\n';
        os << "verdict: " << to_string(cert.verdict);
        if (cert.detected_at_step) os << " (step " << *cert.detected_at_step << ")";
        os << '\n';
        for (const auto& l : cert.levels) {
            os << "level " << l.level << ": ";
            if (!l.present) {
                os << "no defect (identity)\n";
                continue;
            }
            os << (l.certified_invertible ? "invertible" : "singular") << ", min sigma " << format_double(l.min_sigma)
               << ", det " << format_double(l.det_at_witness.real());
            if (l.det_at_witness.imag() != 0.0) os << (l.det_at_witness.imag() < 0 ? "" : "+") << format_double(l.det_at_witness.imag()) << "i";
            os << " at k = (";
            for (std::size_t a = 0; a < l.witness_k.size(); ++a) os << (a ? ", " : "") << format_double(l.witness_k[a]);
            os << "), " << l.method << '\n';
        }
        if (!cert.note.empty()) os << "note: " << cert.note << '\n';
        emit(opt, os.str());
    }
    return cert.verdict == Verdict::Inconclusive ? kInconclusive : kOk;
}

std::string branch_path(const std::string& out, int codim) {
    const std::filesystem::path p(out);
    auto name = p.stem().string() + "_branch_codim" + std::to_string(codim) + ".csv";
    return (p.parent_path() / name).string();
}

int cmd_spectrum(const Options& opt) {
    ConfigDocument doc;
    if (!load_valid(opt, doc)) return kDomain;
    const auto res = full_spectrum(doc.spec, doc.grids);
    for (const auto& iv : res.inconclusive) spdlog::warn("inconclusive near [{}, {}]", iv.lo, iv.hi);

    if (!opt.out.empty()) {
        for (const auto& br : res.branches) {
            std::ostringstream os;
            CsvWriter csv(os);
            for (int a = br.codim + 1; a <= doc.spec.lattice_dim; ++a) csv.field("k_" + std::to_string(a));
            csv.field("omega");
            csv.end_row();
            for (const auto& s : br.samples) {
                for (int a = br.codim; a < doc.spec.lattice_dim; ++a) csv.field(s.k[static_cast<std::size_t>(a)]);
                csv.field(s.omega);
                csv.end_row();
            }
            write_file(branch_path(opt.out, br.codim), os.str());
        }
    }
    if (opt.json) {
        json j;
        j["omega_window"] = {{"min", res.omega_window.lo}, {"max", res.omega_window.hi}};
        j["pieces"] = json::array();
        for (const auto& p : res.pieces) {
            j["pieces"].push_back(
                {{"kind", to_string(p.kind)}, {"codim", p.codim}, {"omega_lo", p.range.lo}, {"omega_hi", p.range.hi}});
        }
        j["omega_set"] = json::array();
        for (const auto& iv : res.omega_set) j["omega_set"].push_back(to_json(iv));
        j["inconclusive"] = json::array();
        for (const auto& iv : res.inconclusive) j["inconclusive"].push_back(to_json(iv));
        j["branches"] = json::array();
        for (const auto& br : res.branches) {
            std::size_t near = 0;
            for (const auto& s : br.samples) near += s.near_band ? 1 : 0;
            j["branches"].push_back({{"codim", br.codim}, {"samples", br.samples.size()}, {"near_band", near}});
        }
        std::cout << j.dump(2) << '\n';
    }
    std::ostringstream os;
    CsvWriter csv(os);
    csv.field("kind").field("codim").field("omega_lo").field("omega_hi");
    csv.end_row();
    for (const auto& p : res.pieces) {
        csv.field(std::string(to_string(p.kind))).field(p.codim).field(p.range.lo).field(p.range.hi);
        csv.end_row();
    }
    if (!opt.out.empty()) {
        write_file(opt.out, os.str());
    } else if (!opt.json) {
        std::cout << os.str();
    }
    return res.inconclusive.empty() ? kOk : kInconclusive;
}

std::vector<Boundary> boundaries(const Options& opt, int dim) {
    std::vector<std::string> names = opt.bc.empty() ? std::vector<std::string>{"open"} : opt.bc;
    if (names.size() == 1) names.assign(static_cast<std::size_t>(dim), names[0]);
    if (static_cast<int>(names.size()) != dim) throw InputError("--bc: give one value or one per axis");
    std::vector<Boundary> out;
    for (const auto& n : names) out.push_back(n == "periodic" ? Boundary::Periodic : Boundary::Open);
    return out;
}

std::vector<long> box_sizes(const Options& opt, int dim) {
    std::vector<long> l = opt.box.empty() ? std::vector<long>{8} : opt.box;
    if (l.size() == 1) l.assign(static_cast<std::size_t>(dim), l[0]);
    if (static_cast<int>(l.size()) != dim) throw InputError("--L: give one value or one per axis");
    return l;
}

int cmd_oracle(const Options& opt) {
    ConfigDocument doc;
    if (!load_valid(opt, doc)) return kDomain;
    const auto& spec = doc.spec;
    const auto bc = boundaries(opt, spec.lattice_dim);
    const auto half = box_sizes(opt, spec.lattice_dim);
    const bool all_periodic = std::all_of(bc.begin(), bc.end(), [](Boundary b) { return b == Boundary::Periodic; });
    const auto t = assemble_truncated(spec, half, bc);
    spdlog::info("truncated operator of dimension {}", t.matrix.rows());

    json report;
    report["dimension"] = t.matrix.rows();
    report["L"] = half;
    report["bc"] = json::array();
    for (auto b : bc) report["bc"].push_back(b == Boundary::Periodic ? "periodic" : "open");
    report["tolerance"] = opt.tol;

    std::vector<double> vals, weights;
    bool agree = true;
    if (all_periodic && spec.defects.empty() &&
        std::all_of(half.begin(), half.end(), [&](long l) { return l == half[0]; })) {
        const double dev = periodic_box_check(spec, half[0]);
        vals = oracle_eigenvalues(t);
        weights.assign(vals.size(), 0.0);
        report["mode"] = "periodic_box";
        report["max_deviation"] = dev;
        agree = dev <= opt.tol;
    } else {
        const auto res = full_spectrum(spec, doc.grids);
        const auto cmp = compare_spectra(res, t, opt.tol);
        std::tie(vals, weights) = oracle_edge_weights(t, 2);
        report["mode"] = "comparison";
        report["checked"] = cmp.checked;
        report["flagged_edge"] = cmp.flagged_edge;
        report["max_distance"] = cmp.max_distance;
        report["unexplained"] = cmp.unexplained;
        report["points"] = json::array();
        // Truncation error of a bound state decays with the box; report the
        // gap again at half the size so the trend is visible.
        std::vector<long> smaller = half;
        bool can_shrink = false;
        for (std::size_t a = 0; a < smaller.size(); ++a) {
            if (bc[a] == Boundary::Open && smaller[a] >= 4) {
                smaller[a] /= 2;
                can_shrink = true;
            }
        }
        std::optional<std::vector<double>> small_vals;
        if (can_shrink && !cmp.points.empty()) small_vals = oracle_eigenvalues(assemble_truncated(spec, smaller, bc));
        for (const auto& p : cmp.points) {
            json jp{{"predicted", p.predicted}, {"nearest", p.nearest}, {"gap", p.gap}};
            jp["gap_half_box"] = small_vals ? json(std::abs(nearest_to(*small_vals, p.predicted) - p.predicted)) : json(nullptr);
            report["points"].push_back(jp);
        }
        agree = cmp.ok;
    }
    report["agree"] = agree;

    if (!opt.out.empty()) {
        std::ostringstream os;
        CsvWriter csv(os);
        csv.field("index").field("omega").field("edge_weight");
        csv.end_row();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            csv.field(i).field(vals[i]).field(weights[i]);
            csv.end_row();
        }
        write_file(opt.out, os.str());
    }
    if (opt.json) {
        std::cout << report.dump(2) << '\n';
    } else {
        std::cout << "oracle dimension " << t.matrix.rows() << ", mode " << report["mode"].get<std::string>() << '\n';
        if (report.contains("max_deviation")) {
            std::cout << "max deviation from bands: " << format_double(report["max_deviation"].get<double>()) << '\n';
        } else {
            std::cout << "eigenvalues checked " << report["checked"].get<std::size_t>() << ", edge-flagged "
                      << report["flagged_edge"].get<std::size_t>() << ", max distance to spectrum "
                      << format_double(report["max_distance"].get<double>()) << '\n';
            for (const auto& p : report["points"]) {
                std::cout << "isolated point " << format_double(p["predicted"].get<double>()) << ": nearest "
                          << format_double(p["nearest"].get<double>()) << ", gap "
                          << format_double(p["gap"].get<double>());
                if (!p["gap_half_box"].is_null()) {
                    std::cout << " (half box " << format_double(p["gap_half_box"].get<double>()) << ")";
                }
                std::cout << '\n';
            }
            for (const auto& u : report["unexplained"]) {
                std::cout << "unexplained eigenvalue " << format_double(u.get<double>()) << '\n';
            }
        }
        std::cout << (agree ? "agree" : "DISAGREE") << '\n';
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Spectra of periodic lattice operators with nested defects"};
    app.require_subcommand(1);
    Options opt;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "problem configuration (JSON)")->required();
        sub->add_option("--out", opt.out, "output file");
        sub->add_flag("--json", opt.json, "machine-readable output on stdout");
        sub->add_option("--threads", opt.threads, "worker threads (results do not depend on it)")
            ->check(CLI::Range(1, 256));
        sub->add_option("--k-points", opt.k_points, "k samples per axis")->check(CLI::Range(2L, 1L << 16));
    };
    auto* validate_cmd = app.add_subcommand("validate", "check a configuration");
    common(validate_cmd);
    auto* bands_cmd = app.add_subcommand("bands", "band table omega(k) as CSV");
    common(bands_cmd);
    bands_cmd->add_option("--k-path", opt.k_path, "polyline vertices, each \"k1,k2,...\"");
    auto* membership_cmd = app.add_subcommand("membership", "certify whether omega lies in the spectrum");
    common(membership_cmd);
    membership_cmd->add_option("--omega", opt.omega, "probe frequency")->required();
    auto* spectrum_cmd = app.add_subcommand("spectrum", "assemble the spectrum over the omega window");
    common(spectrum_cmd);
    auto* oracle_cmd = app.add_subcommand("oracle", "compare with a real-space truncation");
    common(oracle_cmd);
    oracle_cmd->add_option("--L", opt.box, "box size per axis (one value applies to all)");
    oracle_cmd->add_option("--bc", opt.bc, "periodic|open per axis (one value applies to all)")
        ->check(CLI::IsMember({"periodic", "open"}));
    oracle_cmd->add_option("--tol", opt.tol, "agreement tolerance")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kIo;
    }

    try {
        if (*validate_cmd) return cmd_validate(opt);
        if (*bands_cmd) return cmd_bands(opt);
        if (*membership_cmd) return cmd_membership(opt);
        if (*spectrum_cmd) return cmd_spectrum(opt);
        if (*oracle_cmd) return cmd_oracle(opt);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    } catch (const OutputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDomain;
    } catch (const NonConvergence& e) {
        std::cerr << "inconclusive: " << e.what() << '\n';
        return kInconclusive;
    } catch (const SingularMatrix& e) {
        std::cerr << "inconclusive: " << e.what() << '\n';
        return kInconclusive;
    }
    return kOk;
}
