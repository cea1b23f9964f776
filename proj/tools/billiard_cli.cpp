// Command-line front end: solve, wigner, entropy, fisher, sweep, check.
// Exit codes: 0 success, 1 validation/usage error, 2 numerical failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "obw/obw.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int cmd_solve(double a, double b, double theta, int count, double h, double klo, double khi,
              double tol, const std::string& out) {
    obw::OvalShape shape(a, b, theta);
    const obw::Grid2D grid = obw::make_covering_grid({shape}, h);
    std::optional<obw::KWindow> window;
    if (khi > 0.0) window = obw::KWindow{klo, khi};
    obw::SolveOptions opts;
    opts.tol = tol;
    const auto modes = obw::solve_modes(shape, grid, count, window, opts);
    for (std::size_t i = 0; i < modes.size(); ++i) {
        std::cout << obw::fmt17(modes[i].k) << "\n";
        if (!out.empty())
            obw::write_dump(out + "_mode" + std::to_string(i), obw::dump_from_mode(modes[i]));
    }
    return 0;
}

int cmd_wigner(const std::string& mode_path, int npos, int nmom, double pfactor, double pmax,
               int slices, double drift_abort, const std::string& out) {
    const obw::EigenMode mode = obw::mode_from_dump(obw::read_dump(mode_path));
    const double p_max = pmax > 0.0 ? pmax : pfactor * mode.k;
    obw::WignerOptions wopts{drift_abort};
    const obw::WignerField f = obw::wigner_transform(mode, npos, nmom, p_max, wopts);
    std::cout << "raw_drift " << obw::fmt17(f.raw_drift) << "\n";
    std::cout << "purity " << obw::fmt17(obw::purity(f)) << "\n";
    const obw::ComplexEntropy e = obw::complex_entropy(f);
    std::cout << "h_r " << obw::fmt17(e.h_r) << "\n";
    std::cout << "h_i " << obw::fmt17(e.h_i) << "\n";
    std::cout << "N " << obw::fmt17(e.N) << "\n";
    if (!out.empty()) {
        obw::write_dump(out, obw::dump_from_field(f));
        if (slices > 0) {
            for (auto [axis, tag] : {std::pair{obw::SliceAxis::X, "_slice_x"},
                                     std::pair{obw::SliceAxis::Y, "_slice_y"}}) {
                const obw::WignerSlice sl = obw::wigner_slice(mode, axis, slices, slices, p_max);
                obw::GridDump d;
                const char* qn = axis == obw::SliceAxis::X ? "x" : "y";
                const char* pn = axis == obw::SliceAxis::X ? "px" : "py";
                d.axes = {{qn, sl.nq, sl.q_min, sl.dq}, {pn, sl.np, sl.p(0), sl.dp}};
                d.data = sl.values.v;
                obw::write_dump(out + tag, d);
            }
        }
    }
    return 0;
}

int cmd_entropy(const std::string& field_path) {
    const obw::WignerField f = obw::field_from_dump(obw::read_dump(field_path));
    const obw::ComplexEntropy e = obw::complex_entropy(f);
    std::cout << "h_r " << obw::fmt17(e.h_r) << "\n";
    std::cout << "h_i " << obw::fmt17(e.h_i) << "\n";
    std::cout << "N " << obw::fmt17(e.N) << "\n";
    return 0;
}

int cmd_fisher(const std::string& minus_path, const std::string& center_path,
               const std::string& plus_path, double delta, double tau) {
    const obw::WignerField wm = obw::field_from_dump(obw::read_dump(minus_path));
    const obw::WignerField wc = obw::field_from_dump(obw::read_dump(center_path));
    const obw::WignerField wp = obw::field_from_dump(obw::read_dump(plus_path));
    const obw::FisherReport r = obw::analyze_fisher_triple(wm, wc, wp, 0.0, delta, tau);
    std::cout << "N " << obw::fmt17(r.N) << "\n";
    std::cout << "Z_plus " << obw::fmt17(r.Z_plus) << "\n";
    std::cout << "F_plus " << obw::fmt17(r.F_plus) << "\n";
    std::cout << "F_minus " << obw::fmt17(r.F_minus) << "\n";
    std::cout << "F_tilde_minus " << obw::fmt17(r.F_tilde_minus) << "\n";
    std::cout << "mean_score " << obw::fmt17(r.mean_score) << "\n";
    std::cout << "dhi_fd " << obw::fmt17(r.dhi_fd) << "\n";
    std::cout << "dhi_score " << obw::fmt17(r.dhi_score) << "\n";
    std::cout << "bound_rhs " << obw::fmt17(r.bound_rhs) << "\n";
    std::cout << "slack " << obw::fmt17(r.slack) << "\n";
    std::cout << "decomp_residual " << obw::fmt17(r.decomposition_residual) << "\n";
    std::cout << "masked_fraction " << obw::fmt17(r.masked_fraction) << "\n";
    if (r.floor_warning) std::cerr << "warning: masked fraction exceeds 0.05\n";
    return 0;
}

json summary_to_json(const obw::SweepResult& res) {
    json j;
    const auto& s = res.summary;
    j["detected_avoided_crossings"] = s.detected_ac_count;
    if (s.ac) {
        j["avoided_crossing"] = {{"theta_star", s.ac->theta_star},
                                 {"gap", s.ac->gap},
                                 {"sample_index", s.idx_star}};
    }
    j["exchange_overlaps"] = {{"cross_12", s.cross_overlap_12},
                              {"cross_21", s.cross_overlap_21},
                              {"self_1", s.self_overlap_1},
                              {"self_2", s.self_overlap_2}};
    j["sample_points"] = {{"theta_min", res.thetas.front()},
                          {"theta_star_nearest", s.idx_star >= 0 ? res.thetas[s.idx_star] : 0.0},
                          {"theta_max", res.thetas.back()}};
    for (const auto& b : s.branches) {
        json jb;
        jb["label"] = b.label;
        jb["theta_hi_max"] = b.theta_hi_max;
        jb["theta_dhi_min"] = b.theta_dhi_min;
        jb["theta_F_minus_max"] = b.theta_fm_max;
        jb["theta_F_plus_max"] = b.theta_fp_max;
        jb["offset_hi_to_star"] = b.offset_hi_to_star;
        jb["offset_F_minus_to_star"] = b.offset_fm_to_star;
        jb["offset_F_plus_to_star"] = b.offset_fp_to_star;
        jb["F_minus_at_star"] = b.fm_at_star;
        jb["F_plus_at_star"] = b.fp_at_star;
        jb["F_minus_over_F_plus_at_star"] = b.fm_over_fp_at_star;
        jb["center_extremum_found"] = b.center.extremum_found;
        if (b.center.extremum_found) {
            jb["center_theta"] = b.center.theta;
            jb["center_mean_score_over_rms"] = b.center.mean_score_over_rms;
            jb["center_rel_fisher_gap"] = b.center.rel_fisher_gap;
        }
        j["branches"].push_back(jb);
    }
    return j;
}

obw::SweepConfig load_config(const std::string& path) {
    std::ifstream probe(path);
    if (!probe) throw obw::IoError("cannot open config file: " + path);
    char first = 0;
    probe >> first;
    probe.close();
    if (first == '{') {
        std::ifstream in(path);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return obw::config_from_manifest_json(text);
    }
    return obw::config_from_kv(obw::parse_kv_file(path));
}

int cmd_sweep(const std::string& config_path, const std::string& outdir_override) {
    obw::SweepConfig cfg = load_config(config_path);
    if (!outdir_override.empty()) cfg.output_dir = outdir_override;
    const obw::SweepResult res = obw::run_sweep(cfg);
    fs::create_directories(cfg.output_dir);

    {
        std::ofstream csv(fs::path(cfg.output_dir) / "sweep.csv", std::ios::binary);
        csv << obw::sweep_csv(res);
    }
    {
        std::ofstream mf(fs::path(cfg.output_dir) / "run-manifest.json", std::ios::binary);
        mf << obw::manifest_json(res.config);
    }
    {
        std::ofstream sf(fs::path(cfg.output_dir) / "summary.json");
        sf << summary_to_json(res).dump(2) << "\n";
    }
    std::cout << "sweep complete: " << res.thetas.size() << " samples, "
              << res.summary.detected_ac_count << " avoided crossing(s) detected\n";
    if (res.summary.ac)
        std::cout << "theta_star " << obw::fmt17(res.summary.ac->theta_star) << " gap "
                  << obw::fmt17(res.summary.ac->gap) << "\n";
    return 0;
}

int cmd_check(const std::string& field_path) {
    const obw::WignerField f = obw::field_from_dump(obw::read_dump(field_path));
    int failures = 0;
    auto report = [&](const char* name, bool ok, const std::string& detail) {
        std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << " " << detail << "\n";
        if (!ok) ++failures;
    };
    const double total = obw::pairwise_sum(f.values.v) * f.cell_volume();
    report("normalization", std::abs(total - 1.0) <= 1e-6, "integral = " + obw::fmt17(total));

    double max_asym = 0.0;
    for (int i = 0; i < f.values.n0; ++i)
        for (int j = 0; j < f.values.n1; ++j)
            for (int m = 1; m < f.values.n2; ++m)
                for (int n = 1; n < f.values.n3; ++n)
                    max_asym = std::max(max_asym,
                                        std::abs(f.values(i, j, m, n) -
                                                 f.values(i, j, f.values.n2 - m, f.values.n3 - n)));
    report("momentum_inversion", max_asym == 0.0, "max |W(p) - W(-p)| = " + obw::fmt17(max_asym));

    const auto [mpos, mmom] = obw::marginals(f);
    double min_pos = 0.0, min_mom = 0.0;
    for (double v : mpos.v) min_pos = std::min(min_pos, v);
    for (double v : mmom.v) min_mom = std::min(min_mom, v);
    report("marginal_positivity", min_pos >= -1e-9 && min_mom >= -1e-9,
           "min = " + obw::fmt17(std::min(min_pos, min_mom)));

    const double pur = obw::purity(f);
    report("purity", std::abs(pur - 1.0) <= 0.02, "(2pi)^2 int W^2 = " + obw::fmt17(pur));
    return failures == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"oval-billiard Wigner negativity and Fisher analysis"};
    app.require_subcommand(1);

    auto* solve = app.add_subcommand("solve", "Dirichlet eigenpairs at one theta");
    double a = 1.2, b = 1.0, theta = 0.0, h = 1.0 / 64, klo = 0.0, khi = 0.0, tol = 1e-8;
    int count = 1;
    std::string out;
    solve->add_option("--a", a, "semi-axis a");
    solve->add_option("--b", b, "semi-axis b");
    solve->add_option("--theta", theta, "deformation parameter");
    solve->add_option("--count", count, "number of modes");
    solve->add_option("--h", h, "grid spacing");
    solve->add_option("--klo", klo, "window start (k)");
    solve->add_option("--khi", khi, "window end (k, 0 = lowest modes)");
    solve->add_option("--tol", tol, "eigenvalue residual tolerance");
    solve->add_option("--out", out, "dump modes to <out>_modeN.{hdr,bin}");

    auto* wig = app.add_subcommand("wigner", "Wigner field and slices for one mode dump");
    std::string mode_path, wout;
    int npos = 48, nmom = 48, slices = 0;
    double pfactor = 2.5, pmax = 0.0, drift_abort = 1e-4;
    wig->add_option("--mode", mode_path, "mode dump base path")->required();
    wig->add_option("--npos", npos, "position samples per axis");
    wig->add_option("--nmom", nmom, "momentum samples per axis (even)");
    wig->add_option("--pfactor", pfactor, "momentum window as multiple of k");
    wig->add_option("--pmax", pmax, "momentum window override");
    wig->add_option("--slices", slices, "also dump phase-space slices of this size");
    wig->add_option("--drift-abort", drift_abort, "normalization drift abort threshold");
    wig->add_option("--out", wout, "output base path");

    auto* ent = app.add_subcommand("entropy", "complex Wigner entropy of a field dump");
    std::string field_path;
    ent->add_option("--field", field_path, "field dump base path")->required();

    auto* fish = app.add_subcommand("fisher", "Fisher report for a theta triple of field dumps");
    std::string fm, fc, fp;
    double delta = 1e-3, tau = 1e-6;
    fish->add_option("--minus", fm, "field at theta - delta")->required();
    fish->add_option("--center", fc, "field at theta")->required();
    fish->add_option("--plus", fp, "field at theta + delta")->required();
    fish->add_option("--delta", delta, "finite-difference step");
    fish->add_option("--tau", tau, "score floor (relative)");

    auto* sw = app.add_subcommand("sweep", "full pipeline over the theta interval");
    std::string config_path, outdir;
    sw->add_option("--config", config_path, "config file (key=value or run-manifest.json)")
        ->required();
    sw->add_option("--out", outdir, "override output directory");

    auto* chk = app.add_subcommand("check", "invariant suite on a field dump");
    std::string chk_path;
    chk->add_option("--field", chk_path, "field dump base path")->required();

    try {
        app.parse(argc, argv);
        if (solve->parsed()) return cmd_solve(a, b, theta, count, h, klo, khi, tol, out);
        if (wig->parsed())
            return cmd_wigner(mode_path, npos, nmom, pfactor, pmax, slices, drift_abort, wout);
        if (ent->parsed()) return cmd_entropy(field_path);
        if (fish->parsed()) return cmd_fisher(fm, fc, fp, delta, tau);
        if (sw->parsed()) return cmd_sweep(config_path, outdir);
        if (chk->parsed()) return cmd_check(chk_path);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const obw::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const obw::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
