#include "fermirg/commands.hpp"

#include <bit>
#include <cmath>
#include <fstream>

#include "fermirg/random.hpp"
#include "json.hpp"

namespace fermirg {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << text;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

struct ManifestWriter {
    nlohmann::json entries = nlohmann::json::array();
    void add(const std::string& file, const std::string& quantity,
             const std::string& description) {
        entries.push_back({{"file", file},
                           {"quantity", quantity},
                           {"description", description}});
    }
    void flush(const fs::path& dir) {
        nlohmann::json j;
        j["tables"] = entries;
        write_text(dir / "manifest.json", j.dump(2) + "\n");
    }
};

}  // namespace

std::function<GrassmannFunction(const GeneratorLabels&)> quartic_fixture(
    double coupling) {
    return [coupling](const GeneratorLabels& labels) {
        AlgebraShape sh = labels.shape();
        GrassmannFunction v(sh);
        const int q = sh.n_psi;
        for (std::uint32_t mask = 0; mask < (std::uint32_t(1) << q); ++mask) {
            if (std::popcount(mask) != 4) continue;
            int creation = 0;
            for (int i = 0; i < q; ++i)
                if (mask & (1u << i)) creation += labels.psi[i].a;
            if (creation != 2) continue;
            v[mask << sh.n_phi] = coupling;
        }
        return v;
    };
}

// ---------------------------------------------------------------------------
// validate

CommandResult cmd_validate(const RunConfig& cfg, const std::string& out_dir) {
    ValidationReport rep = validate_config(cfg);
    nlohmann::json j;
    j["accepted"] = rep.accepted();
    auto lines = nlohmann::json::array();
    for (const auto& l : rep.lines)
        lines.push_back({{"check", l.check},
                         {"constraint", l.constraint},
                         {"ok", l.ok},
                         {"fatal", l.fatal},
                         {"message", l.message}});
    j["lines"] = lines;
    CommandResult res;
    if (!out_dir.empty()) {
        write_text(fs::path(out_dir) / "validate.json", j.dump(2) + "\n");
        res.emitted.push_back("validate.json");
    }
    res.exit_code = rep.accepted() ? 0 : 1;
    res.summary = rep.accepted() ? "config accepted" : "config rejected";
    return res;
}

// ---------------------------------------------------------------------------
// geometry

CommandResult cmd_geometry(const RunConfig& cfg, const std::string& out_dir) {
    fs::path dir(out_dir);
    ManifestWriter manifest;
    Dispersion disp = Dispersion::builtin(cfg.rg.dispersion);
    FermiCurve curve = FermiCurve::trace(disp, 1024);

    {
        std::string csv = "arc,k1,k2,tangent1,tangent2,normal1,normal2\n";
        for (int i = 0; i < 512; ++i) {
            double t = curve.length() * i / 512.0;
            Vec2 p = curve.at_arc(t);
            Vec2 tg = curve.tangent_at_arc(t);
            Vec2 nm = curve.normal_at_arc(t);
            csv += fmt(t) + "," + fmt(p[0]) + "," + fmt(p[1]) + "," + fmt(tg[0]) +
                   "," + fmt(tg[1]) + "," + fmt(nm[0]) + "," + fmt(nm[1]) + "\n";
        }
        write_text(dir / "curve.csv", csv);
        manifest.add("curve.csv", "fermi curve trace",
                     "arc-length parametrized zero set of the dispersion");
    }
    {
        std::string csv = "j,sector,center,lo,hi,length,overlap,count\n";
        for (int j = cfg.rg.sp.j0; j <= cfg.rg.sp.j0 + 3; ++j) {
            Sectorization sec = Sectorization::build(j, curve, cfg.rg.sp);
            for (std::size_t s = 0; s < sec.size(); ++s)
                csv += std::to_string(j) + "," + std::to_string(s) + "," +
                       fmt(sec.sector(s).center) + "," + fmt(sec.sector(s).lo()) +
                       "," + fmt(sec.sector(s).hi()) + "," +
                       fmt(sec.sector_length()) + "," + fmt(sec.overlap()) + "," +
                       std::to_string(sec.size()) + "\n";
        }
        write_text(dir / "sectors.csv", csv);
        manifest.add("sectors.csv", "fermi curve sectorizations",
                     "arc intervals with the overlap invariants per scale");
    }
    {
        int j = cfg.rg.sp.j0;
        Sectorization sec = Sectorization::build(j, curve, cfg.rg.sp);
        SectorPartition part(disp, curve, sec, cfg.rg.sp);
        std::string csv = "arc,k1,k2";
        for (std::size_t s = 0; s < sec.size(); ++s)
            csv += ",chi" + std::to_string(s);
        csv += "\n";
        for (int i = 0; i < 256; ++i) {
            double t = curve.length() * i / 256.0;
            Vec2 p = curve.at_arc(t);
            csv += fmt(t) + "," + fmt(p[0]) + "," + fmt(p[1]);
            for (std::size_t s = 0; s < sec.size(); ++s)
                csv += "," + fmt(part.chi(s, 0.0, p));
            csv += "\n";
        }
        write_text(dir / "partition.csv", csv);
        manifest.add("partition.csv", "sector partition of unity",
                     "per-sector cutoff values along the curve");
    }
    manifest.flush(dir);
    CommandResult res;
    res.emitted = {"curve.csv", "sectors.csv", "partition.csv", "manifest.json"};
    res.summary = "geometry artifacts written";
    return res;
}

// ---------------------------------------------------------------------------
// ladder scan

namespace {

struct ScanPoint {
    Vec2 kxy;
    double k0 = 0.0;
    int sector = 0;
    int spin = 0;
    double weight = 1.0;
};

struct ScanCarrier {
    std::vector<ScanPoint> pts;
    int n_sectors = 0;
    double shell_width = 0.0;
};

ScanCarrier build_carrier(const FermiCurve& curve, const Sectorization& sec,
                          const ScaleParams& sp, int j) {
    ScanCarrier c;
    c.n_sectors = static_cast<int>(sec.size());
    double mj = std::pow(sp.M, j);
    double xbar = std::pow(2.0, 0.25) / mj;  // geometric mid-shell
    c.shell_width = (std::sqrt(2.0 * sp.M) - 1.0 / std::sqrt(sp.M)) / mj;
    double arc_spacing = curve.length() / sec.size();
    double w = arc_spacing * c.shell_width * c.shell_width;
    for (std::size_t s = 0; s < sec.size(); ++s) {
        double t = sec.sector(s).center;
        Vec2 p = curve.at_arc(t);
        for (double sign : {1.0, -1.0})
            for (int spin : {0, 1})
                c.pts.push_back(
                    ScanPoint{p, sign * xbar, static_cast<int>(s), spin, w});
    }
    return c;
}

/// Sparse rung with a mollified momentum-conservation factor on the
/// creation-signed sum: an opposite-spin contact interaction, so that the
/// antisymmetrization does not annihilate it.
FourKernel build_rung(const ScanCarrier& c, double lambda) {
    const int P = static_cast<int>(c.pts.size());
    FourKernel r(2 * P, c.n_sectors);
    double sigma = 0.5 * c.shell_width;
    // pair lists with the signed sums for the (+,-) leg pairs
    struct Pair {
        int i, k;
        std::array<double, 3> t;
    };
    auto signed_sum = [&](int i, int k, double si, double sk) {
        return std::array<double, 3>{si * c.pts[i].k0 + sk * c.pts[k].k0,
                                     si * c.pts[i].kxy[0] + sk * c.pts[k].kxy[0],
                                     si * c.pts[i].kxy[1] + sk * c.pts[k].kxy[1]};
    };
    std::vector<Pair> plus, minus;
    for (int i = 0; i < P; ++i)
        for (int k = 0; k < P; ++k) {
            // creation legs carry opposite spins (up, down); annihilation
            // legs likewise
            if (c.pts[i].spin == 0 && c.pts[k].spin == 1)
                plus.push_back({i, k, signed_sum(i, k, 1.0, 1.0)});
            if (c.pts[i].spin == 0 && c.pts[k].spin == 1)
                minus.push_back({i, k, signed_sum(i, k, 1.0, 1.0)});
        }
    // bucket the minus pairs by their sum for fast matching
    auto bucket_of = [&](const std::array<double, 3>& t) {
        auto q = [&](double v) { return static_cast<long>(std::floor(v / sigma)); };
        return std::tuple<long, long, long>(q(t[0]), q(t[1]), q(t[2]));
    };
    std::map<std::tuple<long, long, long>, std::vector<int>> buckets;
    for (std::size_t idx = 0; idx < minus.size(); ++idx)
        buckets[bucket_of(minus[idx].t)].push_back(static_cast<int>(idx));

    for (const auto& pp : plus) {
        auto [b0, b1, b2] = bucket_of(pp.t);
        for (long d0 = b0 - 1; d0 <= b0 + 1; ++d0)
            for (long d1 = b1 - 1; d1 <= b1 + 1; ++d1)
                for (long d2 = b2 - 1; d2 <= b2 + 1; ++d2) {
                    auto it = buckets.find({d0, d1, d2});
                    if (it == buckets.end()) continue;
                    for (int idx : it->second) {
                        const Pair& pm = minus[idx];
                        double dt0 = pp.t[0] - pm.t[0];
                        double dt1 = pp.t[1] - pm.t[1];
                        double dt2 = pp.t[2] - pm.t[2];
                        double g = std::exp(-(dt0 * dt0 + dt1 * dt1 + dt2 * dt2) /
                                            (2.0 * sigma * sigma));
                        if (g < 1e-2) continue;
                        // pattern (1,0,1,0): legs 1,3 create, legs 2,4 annihilate
                        ZLeg z1{iota(pp.i, 1), c.pts[pp.i].sector};
                        ZLeg z2{iota(pm.i, 0), c.pts[pm.i].sector};
                        ZLeg z3{iota(pp.k, 1), c.pts[pp.k].sector};
                        ZLeg z4{iota(pm.k, 0), c.pts[pm.k].sector};
                        r.add(z1, z2, z3, z4, lambda * g);
                    }
                }
    }
    return r;
}

/// One-bubble ladder with the point-diagonal covariance pair.
FourKernel diagonal_ladder(const ScanCarrier& c, const FourKernel& r,
                           const std::vector<cplx>& a, const std::vector<cplx>& b) {
    const int P = static_cast<int>(c.pts.size());
    // group the rung by the points of its first two legs
    std::map<std::pair<int, int>, std::vector<std::pair<std::array<ZLeg, 4>, cplx>>>
        right;
    for (const auto& [k, v] : r.entries())
        right[{ud_of(k[0].x), ud_of(k[1].x)}].push_back({k, v});

    auto flip = [](int x) { return iota(ud_of(x), 1 - b_of(x)); };
    FourKernel out(2 * P, c.n_sectors);
    for (const auto& [k, cl] : r.entries()) {
        int x3 = flip(k[2].x);
        int x4 = flip(k[3].x);
        int p3 = ud_of(x3), p4 = ud_of(x4);
        double s3 = b_of(x3) == 0 ? 1.0 : -1.0;
        double s4 = b_of(x4) == 0 ? 1.0 : -1.0;
        cplx f3 = s3 * a[p3], g3 = s3 * b[p3];
        cplx f4 = s4 * a[p4], g4 = s4 * b[p4];
        cplx bub = f3 * f4 + f3 * g4 + g3 * f4;
        if (bub == cplx(0.0)) continue;
        cplx left = cl * bub * c.pts[p3].weight * c.pts[p4].weight;
        auto it = right.find({p3, p4});
        if (it == right.end()) continue;
        for (const auto& [rk, cr] : it->second) {
            if (rk[0].x != x3 || rk[1].x != x4) continue;
            out.add(k[0], k[1], rk[2], rk[3], left * cr);
        }
    }
    return out;
}

/// |f|_{p,Sigma} over the scan carrier (measure = the point weights),
/// constant coefficient only.
double scan_norm_p(const FourKernel& f, const ScanCarrier& c, int p) {
    if (f.empty()) return 0.0;
    // block norms per sector 4-tuple
    std::map<std::array<int, 4>, double> block;
    {
        // \|.\|_{1,inf}: max over pinned slot and pinned point-label of
        // the weighted absolute sum over the remaining legs
        std::map<std::array<int, 4>,
                 std::map<std::pair<int, int>, double>>
            pinned_sums;  // (sector tuple) -> (slot, x) -> sum
        for (const auto& [k, v] : f.entries()) {
            std::array<int, 4> secs{k[0].s, k[1].s, k[2].s, k[3].s};
            double base = std::abs(v);
            for (int slot = 0; slot < 4; ++slot) {
                double w = base;
                for (int o = 0; o < 4; ++o)
                    if (o != slot) w *= c.pts[ud_of(k[o].x)].weight;
                pinned_sums[secs][{slot, k[slot].x}] += w;
            }
        }
        for (const auto& [secs, sums] : pinned_sums) {
            double best = 0.0;
            for (const auto& [key, v] : sums) best = std::max(best, v);
            block[secs] = best;
        }
    }
    // max over p pinned slots and sectors, sum over the rest
    std::vector<std::vector<int>> slot_choices;
    {
        std::vector<int> slots{0, 1, 2, 3};
        std::vector<int> cur;
        std::function<void(int)> rec = [&](int start) {
            if (static_cast<int>(cur.size()) == p) {
                slot_choices.push_back(cur);
                return;
            }
            for (int i = start; i < 4; ++i) {
                cur.push_back(i);
                rec(i + 1);
                cur.pop_back();
            }
        };
        rec(0);
    }
    double best = 0.0;
    for (const auto& slots : slot_choices) {
        std::map<std::vector<int>, double> sums;
        for (const auto& [secs, bn] : block) {
            std::vector<int> key;
            for (int s : slots) key.push_back(secs[s]);
            sums[key] += bn;
        }
        for (const auto& [key, v] : sums) best = std::max(best, v);
    }
    return best;
}

}  // namespace

std::vector<ScanRow> pp_suppression_scan(const std::string& dispersion,
                                         const ScaleParams& sp,
                                         const std::vector<int>& scales,
                                         int ell_max, double rung_strength) {
    Dispersion disp = Dispersion::builtin(dispersion);
    FermiCurve curve = FermiCurve::trace(disp, 1024);
    std::vector<ScanRow> rows;
    for (int j : scales) {
        Sectorization sec = Sectorization::build(j, curve, sp);
        ScanCarrier carrier = build_carrier(curve, sec, sp, j);
        // antisymmetrize so that every creation pattern is populated; the
        // bubble pairs opposite bits across consecutive rungs
        FourKernel rung = antisymmetrize4(build_rung(carrier, rung_strength));
        // point-diagonal covariances on the carrier (points sit mid-shell)
        std::vector<cplx> a(carrier.pts.size()), b(carrier.pts.size());
        for (std::size_t p = 0; p < carrier.pts.size(); ++p) {
            const ScanPoint& pt = carrier.pts[p];
            double e = 0.0;  // points sit on the curve
            double nu_j = nu_single(j, pt.k0, e, sp);
            double nu_ge1 = nu_ge(j + 1, pt.k0, e, sp);
            cplx denom(0.0, pt.k0);
            a[p] = nu_j / denom;
            b[p] = nu_ge1 / denom;
        }
        FourKernel lad = rung;
        for (int ell = 1; ell <= ell_max; ++ell) {
            lad = diagonal_ladder(carrier, rung, a, b);  // ell = 1 chain
            if (ell > 1) break;  // scan reports the one-bubble ladder only
            ScanRow row;
            row.j = j;
            row.ell = ell;
            row.dispersion = dispersion;
            FourKernel vpp = v_pp(reduce_pp(lad));
            row.norm_pp = scan_norm_p(vpp, carrier, 3);
            row.norm_full = scan_norm_p(lad, carrier, 3);
            rows.push_back(row);
        }
    }
    return rows;
}

CommandResult cmd_ladders(const RunConfig& cfg, const std::string& out_dir) {
    fs::path dir(out_dir);
    ManifestWriter manifest;

    // decomposition suite over the seeded corpus
    {
        CounterRng rng(cfg.seed);
        std::string csv = "trial,residual,antisymmetric,number_preserving\n";
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            int nud = 1 + static_cast<int>(rng.next_below(2));
            int ns = 1 + static_cast<int>(rng.next_below(2));
            FourKernel f(2 * nud, ns);
            for (int e = 0; e < 25; ++e) {
                auto leg = [&]() {
                    return ZLeg{static_cast<int>(rng.next_below(2 * nud)),
                                static_cast<int>(rng.next_below(ns))};
                };
                ZLeg z1 = leg(), z2 = leg(), z3 = leg(), z4 = leg();
                int total = b_of(z1.x) + b_of(z2.x) + b_of(z3.x) + b_of(z4.x);
                if (total != 2) continue;
                f.add(z1, z2, z3, z4,
                      cplx(rng.uniform(-1, 1), rng.uniform(-1, 1)));
            }
            FourKernel anti = antisymmetrize4(f);
            DecomposeReport rep = decompose_check(anti);
            worst = std::max(worst, rep.residual);
            csv += std::to_string(trial) + "," + fmt(rep.residual) + "," +
                   (rep.antisymmetric ? "1" : "0") + "," +
                   (rep.number_preserving ? "1" : "0") + "\n";
        }
        write_text(dir / "decompose.csv", csv);
        manifest.add("decompose.csv", "pair-channel decomposition residuals",
                     "reassembly defect of the channel decomposition over the "
                     "seeded kernel corpus; worst " + fmt(worst));
    }

    // particle-particle suppression trend
    {
        ScaleParams sp = cfg.rg.sp;
        sp.M = 2.0;
        sp.aleph = 0.6;
        std::string csv = "dispersion,j,ell,norm_pp,norm_full\n";
        for (const char* name : {"asymmetric", "circle"}) {
            auto rows = pp_suppression_scan(name, sp, {2, 3, 4}, 1, 1.0);
            for (const auto& r : rows)
                csv += std::string(name) + "," + std::to_string(r.j) + "," +
                       std::to_string(r.ell) + "," + fmt(r.norm_pp) + "," +
                       fmt(r.norm_full) + "\n";
        }
        write_text(dir / "ladder_scan.csv", csv);
        manifest.add("ladder_scan.csv", "particle-particle ladder seminorm trend",
                     "per-scale sectorized seminorms of the one-bubble ladder "
                     "for the asymmetric and symmetric dispersions");
    }
    manifest.flush(dir);
    CommandResult res;
    res.emitted = {"decompose.csv", "ladder_scan.csv", "manifest.json"};
    res.summary = "ladder artifacts written";
    return res;
}

// ---------------------------------------------------------------------------
// flow

namespace {

nlohmann::json fixpoint_json(const FixpointTrace& t) {
    nlohmann::json j;
    j["iterations"] = t.iterations;
    j["converged"] = t.converged;
    j["residual"] = t.residual;
    j["step_norms"] = t.step_norms;
    j["ratios"] = t.ratios;
    return j;
}

}  // namespace

CommandResult cmd_flow(const RunConfig& cfg, const std::string& out_dir) {
    fs::path dir(out_dir);
    ManifestWriter manifest;
    FlowContext ctx(cfg.rg);
    FlowTrace trace = recursion_driver(ctx, quartic_fixture(cfg.coupling),
                                       cfg.rg.jmax);

    for (std::size_t s = 0; s < trace.steps.size(); ++s) {
        const FlowStep& step = trace.steps[s];
        char name[32];
        std::snprintf(name, sizeof(name), "step-%02d", step.j);
        CountertermK zero = CountertermK::zero(ctx, step.j);

        nlohmann::json q;
        q["j"] = step.j;
        GrassmannFunction w = step.quad.w(zero);
        nlohmann::json blocks = nlohmann::json::array();
        AlgebraShape sh = step.quad.labels.shape();
        for (int m = 0; m <= sh.n_phi; ++m)
            for (int n = 0; n <= sh.n_psi; ++n) {
                double mx = w.component(m, n).max_abs();
                if (mx > 0)
                    blocks.push_back({{"m", m}, {"n", n}, {"max_abs", mx}});
            }
        q["w_blocks"] = blocks;
        q["p_count"] = step.quad.p_list.size();
        nlohmann::json ps = nlohmann::json::array();
        for (const auto& p : step.quad.p_list) ps.push_back(p.max_abs());
        q["p_max_abs"] = ps;
        q["fixpoint"] = fixpoint_json(step.fix);
        write_text(dir / name / "quadruple.json", q.dump(2) + "\n");

        QuadrupleReport qr = check_quadruple(ctx, step.quad, zero,
                                             DataMode::Output);
        nlohmann::json a;
        auto lines = nlohmann::json::array();
        for (const auto& l : qr.lines)
            lines.push_back({{"name", l.name},
                             {"verdict", l.verdict},
                             {"lhs0", l.lhs0},
                             {"rhs0", l.rhs0}});
        a["bounds"] = lines;
        write_text(dir / name / "audits.json", a.dump(2) + "\n");
        manifest.add(std::string(name) + "/quadruple.json",
                     "interaction quadruple snapshot",
                     "sampled interaction blocks and covariance shifts");
        manifest.add(std::string(name) + "/audits.json",
                     "output-data bound evaluations",
                     "componentwise verdicts of the displayed bounds");
    }

    // renormalization chain at zero and the counterterm table
    {
        nlohmann::json chain = nlohmann::json::array();
        for (std::size_t s = 0; s < trace.ren_step.size(); ++s) {
            int jhi = trace.j0 + static_cast<int>(s) + 1;
            CountertermK z = CountertermK::zero(ctx, jhi);
            CountertermK v = trace.ren_step[s](z);
            chain.push_back({{"from_scale", jhi},
                             {"to_scale", jhi - 1},
                             {"max_abs_at_zero", v.max_abs()}});
        }
        nlohmann::json j;
        j["steps"] = chain;
        write_text(dir / "flow" / "ren-chain.json", j.dump(2) + "\n");
        manifest.add("flow/ren-chain.json", "renormalization map chain",
                     "one-step counterterm maps evaluated at zero");
    }
    {
        // delta-e on the k0 = 0 spatial modes, one column per scale
        const TorusGrid& g = ctx.grid();
        std::string csv = "k1,k2";
        int jtop = trace.j0 + static_cast<int>(trace.ren_step.size());
        for (int j = trace.j0; j <= jtop; ++j)
            csv += ",delta_e_j" + std::to_string(j);
        csv += "\n";
        std::vector<std::vector<cplx>> des;
        for (int j = trace.j0; j <= jtop; ++j)
            des.push_back(trace.delta_e(ctx, j, CountertermK::zero(ctx, j)));
        for (int m1 = 0; m1 < g.n1; ++m1)
            for (int m2 = 0; m2 < g.n2; ++m2) {
                int mode = g.site(0, m1, m2);
                auto k = g.momentum(mode);
                csv += fmt(k[1]) + "," + fmt(k[2]);
                for (const auto& de : des) csv += "," + fmt(de[mode].real());
                csv += "\n";
            }
        write_text(dir / "flow" / "delta-e.csv", csv);
        manifest.add("flow/delta-e.csv", "running counterterm multiplier",
                     "spatial momentum table of the accumulated counterterm per "
                     "scale");
    }
    manifest.flush(dir);
    CommandResult res;
    res.summary = "flow artifacts written";
    res.emitted = {"flow/ren-chain.json", "flow/delta-e.csv", "manifest.json"};
    return res;
}

// ---------------------------------------------------------------------------
// audit

std::vector<LambdaSlopeRow> lambda_scaling_probe(
    const FlowContext& ctx, const std::vector<double>& lambdas) {
    const int j0 = ctx.cfg().sp.j0;
    GeneratorLabels labels = default_sample(ctx, j0, ctx.cfg().sample_arc_fraction * ctx.curve().length());
    SourceCoupling source = involution_coupling(labels);
    std::vector<cplx> ucheck(ctx.grid().volume(), 0.0);
    auto cle = cov_le(ctx.geo(), j0, ucheck);
    Pairing p = pairing_from_multiplier(ctx, labels, j0, cle);

    GrassmannFunction base = omega_tilde(GrassmannFunction(labels.shape()), p,
                                         source, ZNormalization::Scalar);
    std::vector<GrassmannFunction> ws;
    for (double l : lambdas) {
        GrassmannFunction w = omega_tilde(quartic_fixture(l)(labels), p, source,
                                          ZNormalization::Scalar);
        w -= base;
        ws.push_back(w);
    }

    std::vector<LambdaSlopeRow> rows;
    for (auto [m, n] : {std::pair<int, int>{0, 2}, {0, 4}, {2, 0}}) {
        LambdaSlopeRow row;
        row.m = m;
        row.n = n;
        row.expected = std::max((m + n - 2) / 2.0, 1.0);
        for (const auto& w : ws) row.magnitudes.push_back(w.component(m, n).max_abs());
        // least squares slope of log |w| against log lambda
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int cnt = 0;
        for (std::size_t i = 0; i < lambdas.size(); ++i) {
            if (row.magnitudes[i] <= 0.0) continue;
            double x = std::log(lambdas[i]);
            double y = std::log(row.magnitudes[i]);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            ++cnt;
        }
        row.slope = cnt >= 2 ? (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx) : 0.0;
        rows.push_back(row);
    }
    return rows;
}

CommandResult cmd_audit(const RunConfig& cfg, const std::string& out_dir) {
    fs::path dir(out_dir);
    ManifestWriter manifest;
    FlowContext ctx(cfg.rg);
    FlowTrace trace = recursion_driver(ctx, quartic_fixture(cfg.coupling),
                                       cfg.rg.jmax);

    nlohmann::json j;
    {
        ProjectiveReport rep = projective_audit(ctx, trace);
        j["projective"] = {{"composition_residual", rep.composition_residual},
                           {"delta_e_residual", rep.delta_e_residual},
                           {"cauchy_differences", rep.cauchy_differences},
                           {"envelope", rep.envelope}};
    }
    {
        LemmaAuditReport rep = lemma_audits(ctx, trace);
        j["dressing"] = {{"scales", rep.scales},
                         {"ratios", rep.dressing_ratio},
                         {"threshold", rep.threshold},
                         {"ok", rep.dressing_ok}};
        j["covariance_additivity"] = {{"cj", rep.cj_additivity},
                                      {"infrared", rep.ir_additivity}};
    }
    write_text(dir / "audits.json", j.dump(2) + "\n");
    manifest.add("audits.json", "projective and covariance audits",
                 "composition identities, counterterm tail differences, "
                 "dressing ratios and additivity residuals");

    {
        auto rows = lambda_scaling_probe(ctx, {1e-4, 1e-3, 1e-2});
        std::string csv = "m,n,slope,expected,mag1,mag2,mag3\n";
        for (const auto& r : rows) {
            csv += std::to_string(r.m) + "," + std::to_string(r.n) + "," +
                   fmt(r.slope) + "," + fmt(r.expected);
            for (double m : r.magnitudes) csv += "," + fmt(m);
            csv += "\n";
        }
        write_text(dir / "lambda_scaling.csv", csv);
        manifest.add("lambda_scaling.csv", "coupling power-counting slopes",
                     "log-log slopes of interaction blocks against the coupling");
    }
    manifest.flush(dir);
    CommandResult res;
    res.summary = "audit artifacts written";
    res.emitted = {"audits.json", "lambda_scaling.csv", "manifest.json"};
    return res;
}

}  // namespace fermirg
