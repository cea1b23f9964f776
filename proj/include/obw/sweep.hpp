#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <nlohmann/json.hpp>

#include "obw/fisher.hpp"
#include "obw/geometry.hpp"
#include "obw/helmholtz.hpp"
#include "obw/io.hpp"
#include "obw/negativity.hpp"
#include "obw/wigner.hpp"

namespace obw {

struct SweepConfig {
    double a = 1.2;
    double b = 1.0;
    double theta_min = 0.52;
    double theta_max = 0.66;
    int theta_samples = 41;
    double delta = 0.0;  // finite-difference step; 0 resolves to spacing/2
    double solver_h = 1.0 / 64;
    int mode_count = 3;
    double k_lo = 8.95;
    double k_hi = 9.42;
    int wigner_positions = 48;
    int wigner_momenta = 48;
    int slice_size = 256;
    double momentum_factor = 2.5;
    double momentum_k_ref = 0.0;  // 0 resolves to the window midpoint
    double score_floor = 1e-6;
    double eig_tol = 1e-8;
    double degenerate_threshold = 1e-8;
    double drift_abort = 1e-4;
    int threads = 0;
    std::string output_dir = "out";
    double theta_override = std::numeric_limits<double>::quiet_NaN();  // test hook

    double theta_spacing() const {
        return (theta_max - theta_min) / (theta_samples - 1);
    }
    double resolved_delta() const { return delta > 0.0 ? delta : 0.5 * theta_spacing(); }
    double resolved_k_ref() const {
        return momentum_k_ref > 0.0 ? momentum_k_ref : 0.5 * (k_lo + k_hi);
    }
    bool has_override() const { return !std::isnan(theta_override); }

    void validate() const {
        if (!(a > 0) || !(b > 0)) throw std::invalid_argument("config: a, b must be positive");
        if (theta_samples < 2) throw std::invalid_argument("config: need >= 2 theta samples");
        if (!(theta_max > theta_min)) throw std::invalid_argument("config: empty theta interval");
        const double d = resolved_delta();
        if (!(d > 0) || d >= theta_spacing())
            throw std::invalid_argument("config: delta must be positive and below the theta spacing");
        const double reach = std::max(std::abs(theta_min) + d, std::abs(theta_max) + d);
        if (!has_override() && !(reach < 1.0 / a))
            throw std::invalid_argument("config: theta interval (plus delta) must stay inside |theta| < 1/a");
        if (!(solver_h > 0)) throw std::invalid_argument("config: solver_h must be positive");
        if (mode_count < 2) throw std::invalid_argument("config: mode_count must be >= 2");
        if (!(k_hi > k_lo) || k_lo < 0) throw std::invalid_argument("config: bad k window");
        if (wigner_positions < 2 || wigner_momenta < 2 || wigner_momenta % 2)
            throw std::invalid_argument("config: wigner resolutions must be positive (momenta even)");
        if (slice_size < 2 || slice_size % 2) throw std::invalid_argument("config: bad slice size");
        if (!(momentum_factor > 0)) throw std::invalid_argument("config: momentum_factor must be positive");
        if (!(score_floor > 0) || !(eig_tol > 0) || !(degenerate_threshold > 0) || !(drift_abort > 0))
            throw std::invalid_argument("config: tolerances must be positive");
    }

    OvalShape shape_at(double theta) const {
        return OvalShape(a, b, has_override() ? theta_override : theta);
    }
};

/// One CSV row: everything measured for one branch at one theta sample.
struct SweepRecord {
    double theta = 0.0;
    int branch = 0;
    double k = 0.0;
    double h_r = 0.0, h_i = 0.0, N = 0.0, Z_plus = 0.0;
    double F_plus = 0.0, F_minus = 0.0, F_tilde_minus = 0.0;
    double mean_score = 0.0;
    double dhi_fd = 0.0, dhi_score = 0.0;
    double bound_rhs = 0.0, slack = 0.0;
    double decomp_residual = 0.0;
    double masked_fraction = 0.0;
    double masked_dhi_fd = 0.0;  // pi * FD contribution of floor-excluded cells
    bool degenerate = false;
    std::string resolution_stamp;
};

struct BranchSummary {
    int label = 0;
    int idx_hi_max = -1, idx_dhi_min = -1, idx_fm_max = -1, idx_fp_max = -1;
    double theta_hi_max = 0.0, theta_dhi_min = 0.0, theta_fm_max = 0.0, theta_fp_max = 0.0;
    double offset_hi_to_star = 0.0, offset_fm_to_star = 0.0, offset_fp_to_star = 0.0;
    double fm_at_star = 0.0, fp_at_star = 0.0, fm_over_fp_at_star = 0.0;
    AcCenterReport center;
};

struct SweepSummary {
    std::optional<AvoidedCrossing> ac;
    int detected_ac_count = 0;  // avoided crossings among all tracked branch pairs
    int idx_star = -1;          // record sample nearest theta_star
    double cross_overlap_12 = 0.0, cross_overlap_21 = 0.0;
    double self_overlap_1 = 0.0, self_overlap_2 = 0.0;
    std::vector<double> thetas;
    std::vector<BranchSummary> branches;
};

struct SweepResult {
    SweepConfig config;                      // fully resolved
    std::vector<double> thetas;              // record samples
    std::vector<std::vector<SweepRecord>> records;  // [branch][sample]
    std::vector<SpectrumBranch> pair;        // the two reported branches
    SweepSummary summary;
};

namespace detail {

/// Gap must dip to at most half of its value at both interval ends for the
/// pair to count as a detected avoided crossing (rules out gently curved but
/// non-interacting pairs).
inline bool ac_is_genuine(const SpectrumBranch& b1, const SpectrumBranch& b2,
                          const AvoidedCrossing& ac) {
    const double ge0 = std::abs(b2.k(0) - b1.k(0));
    const double ge1 = std::abs(b2.k(b1.size() - 1) - b1.k(b1.size() - 1));
    return ac.gap <= 0.5 * std::min(ge0, ge1);
}

}  // namespace detail

/// Per-branch extremal locations of the record table plus the AC-center
/// consistency diagnostics.
inline SweepSummary summarize(const std::vector<double>& thetas,
                              const std::vector<std::vector<SweepRecord>>& records,
                              std::optional<AvoidedCrossing> ac, int detected_count) {
    for (const auto& br : records)
        if (br.size() < 5)
            throw std::invalid_argument("summarize: need >= 5 records per branch");
    SweepSummary s;
    s.ac = ac;
    s.detected_ac_count = detected_count;
    s.thetas = thetas;
    if (ac) {
        int best = 0;
        for (int i = 1; i < static_cast<int>(thetas.size()); ++i)
            if (std::abs(thetas[i] - ac->theta_star) < std::abs(thetas[best] - ac->theta_star))
                best = i;
        s.idx_star = best;
    }
    for (const auto& br : records) {
        BranchSummary bs;
        bs.label = br.front().branch;
        auto argmax = [&](auto get) {
            int m = 0;
            for (int i = 1; i < static_cast<int>(br.size()); ++i)
                if (get(br[i]) > get(br[m])) m = i;
            return m;
        };
        auto argmin = [&](auto get) {
            int m = 0;
            for (int i = 1; i < static_cast<int>(br.size()); ++i)
                if (get(br[i]) < get(br[m])) m = i;
            return m;
        };
        bs.idx_hi_max = argmax([](const SweepRecord& r) { return r.h_i; });
        bs.idx_dhi_min = argmin([](const SweepRecord& r) { return std::abs(r.dhi_score); });
        bs.idx_fm_max = argmax([](const SweepRecord& r) { return r.F_minus; });
        bs.idx_fp_max = argmax([](const SweepRecord& r) { return r.F_plus; });
        bs.theta_hi_max = thetas[bs.idx_hi_max];
        bs.theta_dhi_min = thetas[bs.idx_dhi_min];
        bs.theta_fm_max = thetas[bs.idx_fm_max];
        bs.theta_fp_max = thetas[bs.idx_fp_max];
        if (ac) {
            bs.offset_hi_to_star = std::abs(bs.theta_hi_max - ac->theta_star);
            bs.offset_fm_to_star = std::abs(bs.theta_fm_max - ac->theta_star);
            bs.offset_fp_to_star = std::abs(bs.theta_fp_max - ac->theta_star);
            bs.fm_at_star = br[s.idx_star].F_minus;
            bs.fp_at_star = br[s.idx_star].F_plus;
            bs.fm_over_fp_at_star = bs.fp_at_star > 0 ? bs.fm_at_star / bs.fp_at_star : 0.0;
        }
        std::vector<double> hi, ms, ft, fm;
        for (const auto& r : br) {
            hi.push_back(r.h_i);
            ms.push_back(r.mean_score);
            ft.push_back(r.F_tilde_minus);
            fm.push_back(r.F_minus);
        }
        bs.center = ac_center_diagnostics(thetas, hi, ms, ft, fm);
        s.branches.push_back(bs);
    }
    return s;
}

/// Full pipeline: solve the windowed spectrum over the theta interval, track
/// branches by wavefunction continuity (halving the tracking step when
/// continuity is lost), select the avoided-crossing pair, and for every sample
/// evaluate the Wigner field triple, the complex entropy, and the Fisher
/// report of both branches. Deterministic for a fixed config.
inline SweepResult run_sweep(const SweepConfig& cfg_in) {
    SweepConfig cfg = cfg_in;
    cfg.delta = cfg_in.resolved_delta();
    cfg.momentum_k_ref = cfg_in.resolved_k_ref();
    cfg.validate();
#ifdef _OPENMP
    if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
#endif

    SweepResult res;
    res.config = cfg;
    const int ns = cfg.theta_samples;
    for (int t = 0; t < ns; ++t)
        res.thetas.push_back(cfg.theta_min + t * cfg.theta_spacing());

    // common grid, padded; the union box over the swept shapes keeps every
    // field and overlap on one layout
    std::vector<OvalShape> extremes;
    for (double th : {cfg.theta_min - cfg.delta, cfg.theta_min, 0.5 * (cfg.theta_min + cfg.theta_max),
                      cfg.theta_max, cfg.theta_max + cfg.delta})
        extremes.push_back(cfg.shape_at(th));
    const Grid2D grid = make_covering_grid(extremes, cfg.solver_h);

    SolveOptions sopts;
    sopts.tol = cfg.eig_tol;
    const KWindow window{cfg.k_lo, cfg.k_hi};
    auto solve_at = [&](double th) {
        return solve_modes(cfg.shape_at(th), grid, cfg.mode_count, window, sopts);
    };

    // tracking chain, refined by step halving when continuity is lost
    std::vector<double> chain_thetas = res.thetas;
    std::vector<std::vector<EigenMode>> chain_modes;
    std::map<long long, std::vector<EigenMode>> cache;  // keyed by rounded theta
    auto key_of = [&](double th) {
        return static_cast<long long>(std::llround(th * 1e12));
    };
    auto solve_cached = [&](double th) -> const std::vector<EigenMode>& {
        const auto key = key_of(th);
        auto it = cache.find(key);
        if (it == cache.end()) it = cache.emplace(key, solve_at(th)).first;
        return it->second;
    };

    std::vector<SpectrumBranch> branches;
    for (int attempt = 0;; ++attempt) {
        chain_modes.clear();
        for (double th : chain_thetas) chain_modes.push_back(solve_cached(th));
        try {
            branches = track_branches(chain_thetas, chain_modes);
            break;
        } catch (const TrackingError&) {
            if (attempt >= 2) throw;
            std::vector<double> refined;
            for (std::size_t i = 0; i + 1 < chain_thetas.size(); ++i) {
                refined.push_back(chain_thetas[i]);
                refined.push_back(0.5 * (chain_thetas[i] + chain_thetas[i + 1]));
            }
            refined.push_back(chain_thetas.back());
            chain_thetas = refined;
        }
    }

    // branches spanning the whole chain are avoided-crossing candidates
    std::vector<const SpectrumBranch*> full;
    for (const auto& br : branches)
        if (br.size() == chain_thetas.size()) full.push_back(&br);
    if (full.size() < 2)
        throw TrackingError("run_sweep: fewer than two branches survive the whole interval",
                            cfg.theta_min);

    struct PairCand {
        const SpectrumBranch *b1, *b2;
        AvoidedCrossing ac;
    };
    std::vector<PairCand> detected;
    if (chain_thetas.size() >= 3)
        for (std::size_t i = 0; i < full.size(); ++i)
            for (std::size_t j = i + 1; j < full.size(); ++j) {
                const auto det = detect_avoided_crossing(*full[i], *full[j]);
                if (det.status == CrossingStatus::avoided &&
                    detail::ac_is_genuine(*full[i], *full[j], *det.ac))
                    detected.push_back({full[i], full[j], *det.ac});
            }
    std::sort(detected.begin(), detected.end(),
              [](const PairCand& a, const PairCand& b) { return a.ac.gap < b.ac.gap; });

    const SpectrumBranch *sel1 = nullptr, *sel2 = nullptr;
    std::optional<AvoidedCrossing> ac;
    if (!detected.empty()) {
        sel1 = detected.front().b1;
        sel2 = detected.front().b2;
        ac = detected.front().ac;
    } else {
        // no avoided crossing: fall back to the closest pair so the sweep
        // still produces records (summary reports zero detections)
        double best = 1e300;
        for (std::size_t i = 0; i < full.size(); ++i)
            for (std::size_t j = i + 1; j < full.size(); ++j) {
                double g = 1e300;
                for (std::size_t t = 0; t < chain_thetas.size(); ++t)
                    g = std::min(g, std::abs(full[j]->k(t) - full[i]->k(t)));
                if (g < best) {
                    best = g;
                    sel1 = full[i];
                    sel2 = full[j];
                }
            }
    }
    // label 1 = lower k at the first sample
    if (sel1->k(0) > sel2->k(0)) std::swap(sel1, sel2);

    // restrict the selected branches to the record samples
    auto restrict_branch = [&](const SpectrumBranch& br, int label) {
        SpectrumBranch out;
        out.label = label;
        for (double th : res.thetas) {
            const auto it = std::find_if(br.thetas.begin(), br.thetas.end(), [&](double v) {
                return std::abs(v - th) < 1e-12;
            });
            if (it == br.thetas.end())
                throw TrackingError("run_sweep: branch does not cover sample theta", th);
            const auto idx = static_cast<std::size_t>(it - br.thetas.begin());
            out.thetas.push_back(th);
            out.modes.push_back(br.modes[idx]);
        }
        return out;
    };
    res.pair.push_back(restrict_branch(*sel1, 1));
    res.pair.push_back(restrict_branch(*sel2, 2));

    // Wigner grids shared by the entire sweep
    const double p_max = cfg.momentum_factor * cfg.momentum_k_ref;
    const MomentumGrid mom = MomentumGrid::from_pmax(cfg.wigner_momenta, p_max);
    const Grid2D pos = wigner_position_grid(grid, cfg.wigner_positions);
    const WignerOptions wopts{cfg.drift_abort};
    const std::string stamp = "h=" + fmt17(cfg.solver_h) + ";npos=" +
                              std::to_string(cfg.wigner_positions) + ";nmom=" +
                              std::to_string(cfg.wigner_momenta) + ";pmax=" + fmt17(p_max) +
                              ";delta=" + fmt17(cfg.delta) + ";tau=" + fmt17(cfg.score_floor);

    res.records.assign(2, {});
    for (int t = 0; t < ns; ++t) {
        const double th = res.thetas[t];
        const auto& flank_m = solve_cached(th - cfg.delta);
        const auto& flank_p = solve_cached(th + cfg.delta);
        for (int bidx = 0; bidx < 2; ++bidx) {
            const EigenMode& central = res.pair[bidx].modes[t];
            auto pick_flank = [&](const std::vector<EigenMode>& cands) {
                int best = -1;
                double bo = 0.0;
                for (int m = 0; m < static_cast<int>(cands.size()); ++m) {
                    const double o = std::abs(overlap(central, cands[m]));
                    if (o > bo) {
                        bo = o;
                        best = m;
                    }
                }
                if (best < 0 || bo <= 0.5)
                    throw TrackingError("run_sweep: cannot identify the flank mode", th);
                return align_gauge(central, cands[best]);
            };
            const EigenMode mode_m = pick_flank(flank_m);
            const EigenMode mode_p = pick_flank(flank_p);

            const WignerField Wm = wigner_transform(mode_m, mom, pos, wopts);
            const WignerField Wc = wigner_transform(central, mom, pos, wopts);
            const WignerField Wp = wigner_transform(mode_p, mom, pos, wopts);

            const ComplexEntropy ent = complex_entropy(Wc);
            SweepRecord rec;
            rec.theta = th;
            rec.branch = bidx + 1;
            rec.k = central.k;
            rec.h_r = ent.h_r;
            rec.h_i = ent.h_i;
            rec.N = ent.N;
            rec.resolution_stamp = stamp;
            if (ent.N < cfg.degenerate_threshold) {
                rec.degenerate = true;
                rec.Z_plus = 1.0 + ent.N;
            } else {
                const FisherReport fr =
                    analyze_fisher_triple(Wm, Wc, Wp, th, cfg.delta, cfg.score_floor);
                rec.Z_plus = fr.Z_plus;
                rec.F_plus = fr.F_plus;
                rec.F_minus = fr.F_minus;
                rec.F_tilde_minus = fr.F_tilde_minus;
                rec.mean_score = fr.mean_score;
                rec.dhi_fd = fr.dhi_fd;
                rec.dhi_score = fr.dhi_score;
                rec.bound_rhs = fr.bound_rhs;
                rec.slack = fr.slack;
                rec.decomp_residual = fr.decomposition_residual;
                rec.masked_fraction = fr.masked_fraction;
                rec.masked_dhi_fd = std::numbers::pi * fr.masked_dN_fd;
            }
            res.records[bidx].push_back(rec);
        }
    }

    if (ns >= 5) {
        res.summary = summarize(res.thetas, res.records, ac, static_cast<int>(detected.size()));
    } else {
        res.summary.ac = ac;
        res.summary.detected_ac_count = static_cast<int>(detected.size());
        res.summary.thetas = res.thetas;
    }
    // spatial-structure exchange across the interval
    const auto& b1 = res.pair[0];
    const auto& b2 = res.pair[1];
    res.summary.cross_overlap_12 = std::abs(overlap(b1.modes.front(), b2.modes.back()));
    res.summary.cross_overlap_21 = std::abs(overlap(b2.modes.front(), b1.modes.back()));
    res.summary.self_overlap_1 = std::abs(overlap(b1.modes.front(), b1.modes.back()));
    res.summary.self_overlap_2 = std::abs(overlap(b2.modes.front(), b2.modes.back()));
    return res;
}

// ---------------------------------------------------------------------------
// config <-> key/value map, CSV
// ---------------------------------------------------------------------------

inline std::map<std::string, std::string> config_to_kv(const SweepConfig& c) {
    std::map<std::string, std::string> kv;
    kv["a"] = fmt17(c.a);
    kv["b"] = fmt17(c.b);
    kv["theta_min"] = fmt17(c.theta_min);
    kv["theta_max"] = fmt17(c.theta_max);
    kv["theta_samples"] = std::to_string(c.theta_samples);
    kv["delta"] = fmt17(c.delta);
    kv["solver_h"] = fmt17(c.solver_h);
    kv["mode_count"] = std::to_string(c.mode_count);
    kv["k_window_lo"] = fmt17(c.k_lo);
    kv["k_window_hi"] = fmt17(c.k_hi);
    kv["wigner_positions"] = std::to_string(c.wigner_positions);
    kv["wigner_momenta"] = std::to_string(c.wigner_momenta);
    kv["slice_size"] = std::to_string(c.slice_size);
    kv["momentum_factor"] = fmt17(c.momentum_factor);
    kv["momentum_k_ref"] = fmt17(c.momentum_k_ref);
    kv["score_floor"] = fmt17(c.score_floor);
    kv["eig_tol"] = fmt17(c.eig_tol);
    kv["degenerate_threshold"] = fmt17(c.degenerate_threshold);
    kv["drift_abort"] = fmt17(c.drift_abort);
    kv["threads"] = std::to_string(c.threads);
    kv["output_dir"] = c.output_dir;
    if (c.has_override()) kv["theta_override"] = fmt17(c.theta_override);
    return kv;
}

inline SweepConfig config_from_kv(const std::map<std::string, std::string>& kv) {
    SweepConfig c;
    std::set<std::string> known;
    auto getd = [&](const char* key, double& tgt) {
        known.insert(key);
        if (auto it = kv.find(key); it != kv.end()) tgt = parse_double(it->second);
    };
    auto geti = [&](const char* key, int& tgt) {
        known.insert(key);
        if (auto it = kv.find(key); it != kv.end()) tgt = static_cast<int>(parse_double(it->second));
    };
    getd("a", c.a);
    getd("b", c.b);
    getd("theta_min", c.theta_min);
    getd("theta_max", c.theta_max);
    geti("theta_samples", c.theta_samples);
    getd("delta", c.delta);
    getd("solver_h", c.solver_h);
    geti("mode_count", c.mode_count);
    getd("k_window_lo", c.k_lo);
    getd("k_window_hi", c.k_hi);
    geti("wigner_positions", c.wigner_positions);
    geti("wigner_momenta", c.wigner_momenta);
    geti("slice_size", c.slice_size);
    getd("momentum_factor", c.momentum_factor);
    getd("momentum_k_ref", c.momentum_k_ref);
    getd("score_floor", c.score_floor);
    getd("eig_tol", c.eig_tol);
    getd("degenerate_threshold", c.degenerate_threshold);
    getd("drift_abort", c.drift_abort);
    geti("threads", c.threads);
    getd("theta_override", c.theta_override);
    known.insert("output_dir");
    if (auto it = kv.find("output_dir"); it != kv.end()) c.output_dir = it->second;
    for (const auto& [key, val] : kv)
        if (!known.count(key)) throw IoError("config: unknown key '" + key + "'");
    return c;
}

/// Manifest: JSON echo of the resolved config, sufficient to reproduce a run.
inline std::string manifest_json(const SweepConfig& c) {
    nlohmann::json j;
    j["producer"] = std::string("obw ") + kVersion;
    nlohmann::json jc;
    for (const auto& [key, val] : config_to_kv(c)) {
        if (key == "output_dir")
            jc[key] = val;
        else
            jc[key] = parse_double(val);
    }
    j["config"] = jc;
    return j.dump(2) + "\n";
}

inline SweepConfig config_from_manifest_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (j.contains("config")) j = j["config"];
    std::map<std::string, std::string> kv;
    for (const auto& [key, val] : j.items())
        kv[key] = val.is_string() ? val.get<std::string>() : val.dump();
    return config_from_kv(kv);
}

inline constexpr const char* kCsvHeader =
    "theta,branch,k,h_r,h_i,N,Z_plus,F_plus,F_minus,F_tilde_minus,dhi_fd,dhi_score,"
    "bound_rhs,slack,decomp_residual,masked_fraction,degenerate_flag";

inline std::string csv_row(const SweepRecord& r) {
    std::string s;
    s += fmt17(r.theta);
    s += "," + std::to_string(r.branch);
    s += "," + fmt17(r.k);
    s += "," + fmt17(r.h_r);
    s += "," + fmt17(r.h_i);
    s += "," + fmt17(r.N);
    s += "," + fmt17(r.Z_plus);
    s += "," + fmt17(r.F_plus);
    s += "," + fmt17(r.F_minus);
    s += "," + fmt17(r.F_tilde_minus);
    s += "," + fmt17(r.dhi_fd);
    s += "," + fmt17(r.dhi_score);
    s += "," + fmt17(r.bound_rhs);
    s += "," + fmt17(r.slack);
    s += "," + fmt17(r.decomp_residual);
    s += "," + fmt17(r.masked_fraction);
    s += r.degenerate ? ",1" : ",0";
    return s;
}

inline std::string sweep_csv(const SweepResult& res) {
    std::string out = kCsvHeader;
    out += "\n";
    for (std::size_t t = 0; t < res.thetas.size(); ++t)
        for (const auto& branch : res.records) {
            out += csv_row(branch[t]);
            out += "\n";
        }
    return out;
}

}  // namespace obw
