// Acceptance gate. Each criterion prints exactly one [PASS]/[FAIL] line with
// the numbers it measured, so a log diff shows what moved between runs.
//
//   acceptance --setup --fixtures DIR            build fixture collections
//   acceptance --criterion N --fixtures DIR --viewsynth-bin PATH
//   acceptance --fixtures DIR --viewsynth-bin PATH         (run all)
//
// Exit 0 when every requested criterion passes.

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "viewsynth/viewsynth.hpp"

namespace fs = std::filesystem;
namespace vs = viewsynth;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Ctx {
    fs::path fixtures = "acceptance_fixtures";
    std::string bin;  // viewsynth CLI, exercised by criterion 11
};

struct Outcome {
    bool pass = false;
    std::string detail;
};

/// Measured values only; 5 significant digits beats a 17-digit round trip.
std::string fmt(double v) {
    std::ostringstream ss;
    ss << std::setprecision(5) << v;
    return ss.str();
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Lower median; total order puts -inf first, so an undefined-heavy sample
/// drags the median down instead of poisoning it.
double median(std::vector<double> v) {
    if (v.empty()) throw vs::ArgumentError("median of nothing");
    std::sort(v.begin(), v.end());
    return v[(v.size() - 1) / 2];
}

// ---------------------------------------------------------------------------
// Fixtures: three synthetic collections, built once and reloaded per criterion.
// ---------------------------------------------------------------------------

struct FixtureSpec {
    const char* name;
    vs::ShapeFamily family;
    int shapes;
    int views;
    std::uint64_t seed;
    bool vocab;        // train a vocabulary and attach the suitability table
    double ring_offset;  // degrees added to every azimuth
};

constexpr int kWords = 64;
constexpr int kImageSide = 112;
constexpr int kVocabCap = 100000;

// colC's ring sits half a step off the axes: at exactly 0/90/180/270 degrees
// the orthographic renders of axis-aligned shapes lose whole parameter
// dimensions (a pure side view cannot encode seat width in normalized
// gradients), which no transfer method can recover.
const FixtureSpec kFixtureSpecs[] = {
    {"colA", vs::ShapeFamily::Chairlike, 200, 16, 1001, true, 0.0},
    {"colB", vs::ShapeFamily::Mixed, 64, 8, 2002, true, 0.0},
    {"colC", vs::ShapeFamily::Chairlike, 100, 16, 3003, false, 11.25},
};

void build_fixture(const fs::path& dir, const FixtureSpec& f) {
    vs::RenderSpec spec;
    spec.view_set = vs::ViewSet::uniform_ring(f.views);
    for (double& a : spec.view_set.azimuths_deg) a += f.ring_offset;
    spec.image_side = kImageSide;
    vs::PatchGridConfig grid;
    grid.image_side = kImageSide;

    auto t0 = Clock::now();
    vs::SyntheticCollection built =
        vs::build_synthetic_collection(f.shapes, f.family, spec, grid, vs::HogConfig{}, f.seed);
    vs::save_collection_dir(dir.string(), f.name, built.collection,
                            vs::singleton_labels(built.labels));
    if (f.vocab) {
        vs::FeatureBlock samples =
            vs::subsample_features(built.collection, kVocabCap, vs::mix_seed(f.seed, 0));
        vs::Codebook cb = vs::train_codebook(samples, kWords, vs::mix_seed(f.seed, 1));
        cb.seed = f.seed;
        vs::attach_vocab(dir.string(), cb);
        vs::attach_suitability(dir.string(),
                               vs::build_table(vs::quantize_collection(built.collection, cb)));
    }
    std::cout << "fixture " << f.name << ": shapes=" << f.shapes << " views=" << f.views
              << (f.vocab ? " vocab+table" : " features only") << " built in "
              << fmt(seconds_since(t0)) << "s" << std::endl;
}

vs::CollectionBundle fixture(const Ctx& ctx, const std::string& name) {
    for (const FixtureSpec& f : kFixtureSpecs) {
        if (name != f.name) continue;
        fs::path dir = ctx.fixtures / f.name;
        if (!fs::exists(dir / "manifest.json")) build_fixture(dir, f);
        return vs::load_collection_dir(dir.string());
    }
    throw vs::ArgumentError("unknown fixture " + name);
}

// ---------------------------------------------------------------------------
// Criterion 1: the estimator must agree with a brute-force ordered-pair count
// at the bit level, on every address of 200 random quantized collections.
// ---------------------------------------------------------------------------

std::optional<double> oracle_gamma(const vs::QuantizedCollection& qc, int v0, int g0, int v1,
                                   int g1) {
    std::int64_t marg = 0;
    std::int64_t joint = 0;
    for (int i = 0; i < qc.shapes; ++i) {
        for (int j = 0; j < qc.shapes; ++j) {
            if (i == j || qc.code(i, v0, g0) != qc.code(j, v0, g0)) continue;
            ++marg;
            if (qc.code(i, v1, g1) == qc.code(j, v1, g1)) ++joint;
        }
    }
    if (marg == 0) return std::nullopt;
    if (joint == 0) return -kInf;
    double nn = static_cast<double>(qc.shapes) * static_cast<double>(qc.shapes);
    return std::log(static_cast<double>(joint) / nn) - std::log(static_cast<double>(marg) / nn);
}

vs::QuantizedCollection random_codes(vs::Rng& rng, int shapes, int views, int patches,
                                     int words) {
    vs::QuantizedCollection qc;
    qc.shapes = shapes;
    qc.views = views;
    qc.patches = patches;
    qc.words = words;
    qc.codes.resize(static_cast<std::size_t>(shapes) * views * patches);
    for (auto& c : qc.codes) c = static_cast<std::int32_t>(rng.uniform_int(0, words - 1));
    return qc;
}

Outcome criterion_1(const Ctx&) {
    auto t0 = Clock::now();
    vs::Rng rng(vs::mix_seed(4242, 1));
    long checks = 0;
    long mismatches = 0;
    for (int rep = 0; rep < 200; ++rep) {
        vs::QuantizedCollection qc =
            random_codes(rng, rng.uniform_int(4, 64), rng.uniform_int(2, 4),
                         rng.uniform_int(1, 5), rng.uniform_int(2, 16));
        for (int v0 = 0; v0 < qc.views; ++v0) {
            for (int g0 = 0; g0 < qc.patches; ++g0) {
                for (int v1 = 0; v1 < qc.views; ++v1) {
                    for (int g1 = 0; g1 < qc.patches; ++g1) {
                        ++checks;
                        if (vs::estimate_gamma(qc, v0, g0, v1, g1) !=
                            oracle_gamma(qc, v0, g0, v1, g1)) {
                            ++mismatches;
                        }
                    }
                }
            }
        }
    }
    double dt = seconds_since(t0);
    bool pass = mismatches == 0 && dt < 10.0;
    return {pass, "collections=200 addresses=" + std::to_string(checks) +
                      " mismatches=" + std::to_string(mismatches) + " runtime=" + fmt(dt) + "s"};
}

// ---------------------------------------------------------------------------
// Criterion 2: on a channel with known suitability (keep the observed code
// with probability alpha, else re-draw uniformly), the estimate's median
// absolute error across 20 random marginals must shrink as the collection
// grows from 8W to 16W to 32W samples.
// ---------------------------------------------------------------------------

Outcome criterion_2(const Ctx&) {
    auto t0 = Clock::now();
    const int W = 64;
    const int sizes[3] = {8 * W, 16 * W, 32 * W};
    std::vector<std::vector<double>> errs(3);
    for (int d = 0; d < 20; ++d) {
        vs::Rng rng(vs::mix_seed(9090, static_cast<std::uint64_t>(d)));
        double alpha = rng.uniform(0.4, 0.85);
        std::vector<double> cdf(W);
        double total = 0.0;
        for (double& p : cdf) {
            p = -std::log(1.0 - rng.uniform());
            total += p;
        }
        double acc = 0.0;
        for (double& p : cdf) {
            acc += p / total;
            p = acc;
        }
        cdf.back() = 1.0;
        double keep = alpha + (1.0 - alpha) / W;
        double off = (1.0 - alpha) / W;
        double truth = std::log(keep * keep + (W - 1) * off * off);

        for (int s = 0; s < 3; ++s) {
            int n = sizes[s];
            vs::QuantizedCollection qc;
            qc.shapes = n;
            qc.views = 2;
            qc.patches = 1;
            qc.words = W;
            qc.codes.resize(static_cast<std::size_t>(n) * 2);
            for (int i = 0; i < n; ++i) {
                auto it = std::lower_bound(cdf.begin(), cdf.end(), rng.uniform());
                int x = static_cast<int>(it - cdf.begin());
                int y = rng.uniform() < alpha ? x : rng.uniform_int(0, W - 1);
                qc.code(i, 0, 0) = x;
                qc.code(i, 1, 0) = y;
            }
            auto est = vs::estimate_gamma(qc, 0, 0, 1, 0);
            if (!est || !std::isfinite(*est)) {
                return {false, "estimate undefined at n=" + std::to_string(n)};
            }
            errs[s].push_back(std::abs(*est - truth));
        }
    }
    double m0 = median(errs[0]);
    double m1 = median(errs[1]);
    double m2 = median(errs[2]);
    double dt = seconds_since(t0);
    bool pass = m0 > m1 && m1 > m2 && dt < 30.0;
    return {pass, "median |error| n512=" + fmt(m0) + " n1024=" + fmt(m1) + " n2048=" + fmt(m2) +
                      " runtime=" + fmt(dt) + "s"};
}

// ---------------------------------------------------------------------------
// Criterion 3: every defined self entry is exactly zero, an injective
// deterministic patch relation scores exactly zero, and no defined entry of
// any generated table is positive.
// ---------------------------------------------------------------------------

Outcome criterion_3(const Ctx& ctx) {
    long defined = 0;
    long self_defined = 0;
    long bad_sign = 0;
    long bad_self = 0;
    auto scan = [&](const vs::SuitabilityTable& t) {
        for (int v0 = 0; v0 < t.views; ++v0) {
            for (int v1 = 0; v1 < t.views; ++v1) {
                for (int g0 = 0; g0 < t.patches; ++g0) {
                    for (int g1 = 0; g1 < t.patches; ++g1) {
                        double val = t.at(v0, v1, g0, g1);
                        if (val == -kInf) continue;
                        ++defined;
                        if (val > 0.0) ++bad_sign;
                        if (v0 == v1 && g0 == g1) {
                            ++self_defined;
                            if (val != 0.0) ++bad_self;
                        }
                    }
                }
            }
        }
    };
    scan(*fixture(ctx, "colA").table);
    scan(*fixture(ctx, "colB").table);
    vs::Rng rng(vs::mix_seed(3333, 0));
    for (int rep = 0; rep < 30; ++rep) {
        scan(vs::build_table(random_codes(rng, rng.uniform_int(4, 40), rng.uniform_int(2, 3),
                                          rng.uniform_int(1, 4), rng.uniform_int(2, 12))));
    }

    // injective deterministic dependence: one patch is a bijection of another
    long inj_checks = 0;
    long bad_inj = 0;
    for (int rep = 0; rep < 50; ++rep) {
        int words = rng.uniform_int(4, 16);
        vs::QuantizedCollection qc =
            random_codes(rng, rng.uniform_int(8, 60), 2, 2, words);
        int shift = rng.uniform_int(1, words - 1);
        for (int i = 0; i < qc.shapes; ++i) {
            qc.code(i, 1, 1) = (qc.code(i, 0, 0) + shift) % words;
        }
        auto est = vs::estimate_gamma(qc, 0, 0, 1, 1);
        if (!est) continue;
        ++inj_checks;
        if (*est != 0.0) ++bad_inj;
    }

    bool pass = bad_sign == 0 && bad_self == 0 && bad_inj == 0 && self_defined > 0 &&
                inj_checks >= 40;
    return {pass, "defined=" + std::to_string(defined) + " self_defined=" +
                      std::to_string(self_defined) + " positive=" + std::to_string(bad_sign) +
                      " self_nonzero=" + std::to_string(bad_self) + " injective_nonzero=" +
                      std::to_string(bad_inj) + "/" + std::to_string(inj_checks)};
}

// ---------------------------------------------------------------------------
// Criteria 4 and 5: the simplex least-squares solver against a brute-force
// grid oracle and against planted one-hot optima.
// ---------------------------------------------------------------------------

struct DenseQp {
    int k = 0;
    std::vector<double> gram;  // k x k
    std::vector<double> lin;   // k
    double c0 = 0.0;
};

/// Same accumulation the library uses: sum the per-column dot products of
/// stacked neighbor features against the stacked target.
DenseQp assemble_qp(const std::vector<std::vector<double>>& cols, const std::vector<double>& x) {
    DenseQp qp;
    qp.k = static_cast<int>(cols.size());
    qp.gram.assign(static_cast<std::size_t>(qp.k) * qp.k, 0.0);
    qp.lin.assign(static_cast<std::size_t>(qp.k), 0.0);
    for (int i = 0; i < qp.k; ++i) {
        for (int j = 0; j < qp.k; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < x.size(); ++t) s += cols[i][t] * cols[j][t];
            qp.gram[static_cast<std::size_t>(i) * qp.k + j] = s;
        }
        double s = 0.0;
        for (std::size_t t = 0; t < x.size(); ++t) s += cols[i][t] * x[t];
        qp.lin[static_cast<std::size_t>(i)] = s;
    }
    for (double v : x) qp.c0 += v * v;
    return qp;
}

double qp_value(const DenseQp& qp, std::span<const double> w) {
    double quad = 0.0;
    for (int i = 0; i < qp.k; ++i) {
        for (int j = 0; j < qp.k; ++j) {
            quad += w[i] * w[j] * qp.gram[static_cast<std::size_t>(i) * qp.k + j];
        }
    }
    double lin = 0.0;
    for (int i = 0; i < qp.k; ++i) lin += qp.lin[static_cast<std::size_t>(i)] * w[i];
    return quad - 2.0 * lin + qp.c0;
}

/// Exhaustive minimum over a 1/160 simplex lattice. The solver must land at
/// or below every lattice point, so the resolution is not load-bearing.
double grid_oracle(const DenseQp& qp) {
    constexpr int steps = 160;
    std::array<double, 3> w = {0.0, 0.0, 0.0};
    std::span<const double> view(w.data(), static_cast<std::size_t>(qp.k));
    double best = kInf;
    if (qp.k == 1) {
        w[0] = 1.0;
        return qp_value(qp, view);
    }
    if (qp.k == 2) {
        for (int a = 0; a <= steps; ++a) {
            w[0] = static_cast<double>(a) / steps;
            w[1] = 1.0 - w[0];
            best = std::min(best, qp_value(qp, view));
        }
        return best;
    }
    for (int a = 0; a <= steps; ++a) {
        for (int b = 0; a + b <= steps; ++b) {
            w[0] = static_cast<double>(a) / steps;
            w[1] = static_cast<double>(b) / steps;
            w[2] = 1.0 - w[0] - w[1];
            best = std::min(best, qp_value(qp, view));
        }
    }
    return best;
}

Outcome criterion_4(const Ctx&) {
    vs::Rng rng(vs::mix_seed(5151, 0));
    int bad_obj = 0;
    int bad_simplex = 0;
    int bad_history = 0;
    double worst_gap = -kInf;
    for (int rep = 0; rep < 100; ++rep) {
        int k = rng.uniform_int(1, 3);
        int rows = rng.uniform_int(1, 2) * rng.uniform_int(1, 4);  // region size x patch dim
        std::vector<std::vector<double>> cols(static_cast<std::size_t>(k),
                                              std::vector<double>(rows));
        std::vector<double> x(static_cast<std::size_t>(rows));
        for (auto& c : cols) {
            for (double& v : c) v = rng.normal();
        }
        for (double& v : x) v = rng.normal();
        DenseQp qp = assemble_qp(cols, x);

        vs::SolveStats stats;
        vs::SimplexWeights w = vs::solve_simplex_lsq(qp.gram, qp.lin, qp.c0, k, &stats);
        double obj = qp_value(qp, w.w);
        double oracle = grid_oracle(qp);
        worst_gap = std::max(worst_gap, obj - oracle);
        if (!(obj <= oracle + 1e-5)) ++bad_obj;

        double sum = 0.0;
        double lo = 0.0;
        for (double v : w.w) {
            sum += v;
            lo = std::min(lo, v);
        }
        if (std::abs(sum - 1.0) > 1e-9 || lo < -1e-9) ++bad_simplex;
        for (std::size_t i = 1; i < stats.history.size(); ++i) {
            if (stats.history[i] > stats.history[i - 1]) {
                ++bad_history;
                break;
            }
        }
    }
    bool pass = bad_obj == 0 && bad_simplex == 0 && bad_history == 0;
    return {pass, "instances=100 over_oracle=" + std::to_string(bad_obj) + " worst_gap=" +
                      fmt(worst_gap) + " simplex_violations=" + std::to_string(bad_simplex) +
                      " nonmonotone_histories=" + std::to_string(bad_history)};
}

Outcome criterion_5(const Ctx&) {
    vs::Rng rng(vs::mix_seed(5252, 0));
    int bad = 0;
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        int patches = rng.uniform_int(1, 3);
        int rows = patches * 4;
        int k = rng.uniform_int(2, std::min(6, rows));  // keep the columns independent
        std::vector<std::vector<double>> cols(static_cast<std::size_t>(k),
                                              std::vector<double>(rows));
        for (auto& c : cols) {
            for (double& v : c) v = rng.normal();
        }
        int target = rng.uniform_int(0, k - 1);
        DenseQp qp = assemble_qp(cols, cols[static_cast<std::size_t>(target)]);

        vs::SimplexWeights w = vs::solve_simplex_lsq(qp.gram, qp.lin, qp.c0, k);
        double dev = 0.0;
        for (int i = 0; i < k; ++i) {
            double want = i == target ? 1.0 : 0.0;
            dev = std::max(dev, std::abs(w.w[static_cast<std::size_t>(i)] - want));
        }
        worst = std::max(worst, dev);
        if (dev > 1e-3) ++bad;
    }
    return {bad == 0, "instances=50 failures=" + std::to_string(bad) +
                          " worst_deviation=" + fmt(worst)};
}

// ---------------------------------------------------------------------------
// Criterion 6: fully controlled protocol on the 200-chair collection. Every
// render is synthesized from its own view with its own shape excluded; the
// view-agnostic distance must hit the AUC target and clear the single-view
// baseline by a fixed margin, within the time budget.
// ---------------------------------------------------------------------------

Outcome criterion_6(const Ctx& ctx) {
    vs::CollectionBundle bundle = fixture(ctx, "colA");
    auto t0 = Clock::now();
    vs::LabeledImageSet set = vs::build_self_synthesized_set(
        bundle.collection, *bundle.table, vs::singleton_labels(bundle.collection.ids()), 16,
        vs::SelectionRule::top_k(9));
    double auc_vad = vs::run_retrieval(set, vs::DistanceKind::Vad).curve.auc;
    double auc_base = vs::run_retrieval(set, vs::DistanceKind::BaselineL2).curve.auc;
    double dt = seconds_since(t0);
    bool pass = auc_vad >= 0.95 && auc_vad >= auc_base + 0.15 && dt < 900.0;
    return {pass, "vad_auc=" + fmt(auc_vad) + " baseline_auc=" + fmt(auc_base) +
                      " k=16 region=9 runtime=" + fmt(dt) + "s"};
}

// ---------------------------------------------------------------------------
// Criterion 7: fine-grained labels on the mixed collection. The view-agnostic
// distance must beat the baseline, growing the neighborhood must not hurt,
// and the surrogate region size must peak strictly inside {1, 9, 18, 36}.
// ---------------------------------------------------------------------------

Outcome criterion_7(const Ctx& ctx) {
    vs::CollectionBundle bundle = fixture(ctx, "colB");
    std::set<std::string> distinct;
    for (const auto& ls : bundle.labels) distinct.insert(ls.begin(), ls.end());
    if (distinct.size() < 4) {
        return {false, "only " + std::to_string(distinct.size()) + " distinct labels"};
    }
    const vs::ShapeCollection& coll = bundle.collection;
    const vs::SuitabilityTable& table = *bundle.table;

    vs::LabeledImageSet main_set = vs::build_self_synthesized_set(
        coll, table, bundle.labels, 16, vs::SelectionRule::top_k(9));
    double vad = vs::run_retrieval(main_set, vs::DistanceKind::Vad).curve.auc;
    double base = vs::run_retrieval(main_set, vs::DistanceKind::BaselineL2).curve.auc;

    auto auc_at = [&](int k, int kp) {
        return vs::self_retrieval_auc(coll, table, bundle.labels, k, vs::SelectionRule::top_k(kp),
                                      vs::DistanceKind::Vad);
    };
    double k1 = auc_at(1, 9);
    double k50 = auc_at(50, 9);
    double kp1 = auc_at(16, 1);
    double kp18 = auc_at(16, 18);
    double kp36 = auc_at(16, 36);
    double interior = std::max(vad, kp18);  // vad is the kp=9 point

    bool pass = vad > base && k50 >= k1 && interior >= kp1 && interior >= kp36;
    return {pass, "labels=" + std::to_string(distinct.size()) + " vad_auc=" + fmt(vad) +
                      " baseline_auc=" + fmt(base) + " k1=" + fmt(k1) + " k50=" + fmt(k50) +
                      " region{1,9,18,36}=" + fmt(kp1) + "," + fmt(vad) + "," + fmt(kp18) + "," +
                      fmt(kp36)};
}

// ---------------------------------------------------------------------------
// Criterion 8: cross-view reconstruction ranks on the 100-chair collection.
// ---------------------------------------------------------------------------

Outcome criterion_8(const Ctx& ctx) {
    vs::CollectionBundle bundle = fixture(ctx, "colC");
    auto t0 = Clock::now();
    vs::TransferMatrix m = vs::transferability_matrix(bundle.collection, 32);
    double diag = m.diagonal_mean();
    double global = m.global_mean();
    double dt = seconds_since(t0);
    bool pass = diag <= 1.5 && global <= 3.0;
    return {pass, "diagonal_mean=" + fmt(diag) + " global_mean=" + fmt(global) +
                      " k=32 runtime=" + fmt(dt) + "s"};
}

// ---------------------------------------------------------------------------
// Criterion 9: symmetry discovery. In the front view of the chair collection,
// mirrored leg patches must look like better surrogates for each other than
// leg patches paired with back-rest patches.
//
// Grid geometry at 112 px (6 x 6 patches, patch 32, stride 16): the legs sit
// in the lower rows around columns 1 and 4, mirrored about the image center;
// the back rest fills the upper middle. Patch index is row * 6 + col.
// ---------------------------------------------------------------------------

Outcome criterion_9(const Ctx& ctx) {
    vs::CollectionBundle bundle = fixture(ctx, "colA");
    const vs::SuitabilityTable& t = *bundle.table;
    const int left[] = {19, 25, 31};    // (3,1) (4,1) (5,1)
    const int right[] = {22, 28, 34};   // (3,4) (4,4) (5,4)
    const int back[] = {2, 3, 8, 9};    // (0,2) (0,3) (1,2) (1,3)

    std::vector<double> mirror_vals;
    for (int i = 0; i < 3; ++i) {
        mirror_vals.push_back(t.at(0, 0, left[i], right[i]));
        mirror_vals.push_back(t.at(0, 0, right[i], left[i]));
    }
    std::vector<double> cross_vals;
    for (int leg : {19, 25, 31, 22, 28, 34}) {
        for (int b : back) {
            cross_vals.push_back(t.at(0, 0, leg, b));
            cross_vals.push_back(t.at(0, 0, b, leg));
        }
    }
    double med_mirror = median(mirror_vals);
    double med_cross = median(cross_vals);
    bool pass = med_mirror > med_cross;
    return {pass, "front view: mirrored_leg_median=" + fmt(med_mirror) +
                      " leg_back_median=" + fmt(med_cross)};
}

// ---------------------------------------------------------------------------
// Criterion 10: pose voting. At least 90% correct on renders of held-out
// shapes, and every render of a collection shape must come back as its own
// view.
// ---------------------------------------------------------------------------

Outcome criterion_10(const Ctx& ctx) {
    vs::CollectionBundle bundleA = fixture(ctx, "colA");
    vs::CollectionBundle bundleC = fixture(ctx, "colC");
    auto t0 = Clock::now();

    // the zero-distance dominance rule must hold on both rings; the axis
    // aligned one is the hard case (0 and 180 degree views are lookalikes
    // that outvote plain plurality)
    int exact_bad = 0;
    int exact_total = 0;
    for (const vs::ShapeCollection* cp : {&bundleA.collection, &bundleC.collection}) {
        const vs::ShapeCollection& c = *cp;
        for (int n = 0; n < c.size(); ++n) {
            for (int v = 0; v < c.views(); ++v) {
                vs::FeatureBlock f(c.patches(), c.dim());
                auto slab = c.view_block(n, v);
                std::copy(slab.begin(), slab.end(), f.values.begin());
                ++exact_total;
                if (vs::estimate_pose(c, f, 15).view != v) ++exact_bad;
            }
        }
    }

    // held-out shapes: same family and render setup, parameter-distinct from
    // every collection shape. Measured on the offset-ring set; the axis
    // aligned ring's 0/180 pair is a genuine lookalike (same reason it is
    // excluded from the transferability fixture).
    const vs::ShapeCollection& coll = bundleC.collection;
    const int views = coll.views();
    std::vector<vs::VoxelShape> known;
    for (int i = 0; i < coll.size(); ++i) {
        known.push_back(vs::sample_shape(vs::ShapeFamily::Chairlike,
                                         vs::mix_seed(3003, static_cast<std::uint64_t>(i))));
    }
    auto seen = [&](const vs::VoxelShape& s) {
        for (const auto& k : known) {
            if (k.occupancy == s.occupancy) return true;
        }
        return false;
    };
    vs::RenderSpec spec;
    spec.view_set = coll.view_set();
    spec.image_side = kImageSide;
    int held = 0;
    int correct = 0;
    for (std::uint64_t stream = 0; held < 40; ++stream) {
        vs::VoxelShape s = vs::sample_shape(vs::ShapeFamily::Chairlike, vs::mix_seed(7007, stream));
        if (seen(s)) continue;
        ++held;
        for (int v = 0; v < views; ++v) {
            vs::GrayImage img = vs::render(s, spec, v);
            vs::FeatureBlock f = vs::extract_view_features(img, coll.grid(), vs::HogConfig{});
            if (vs::estimate_pose(coll, f, 15).view == v) ++correct;
        }
    }
    double acc = static_cast<double>(correct) / (40.0 * views);
    double dt = seconds_since(t0);
    bool pass = acc >= 0.9 && exact_bad == 0;
    return {pass, "held_out_accuracy=" + fmt(acc) + " (" + std::to_string(correct) + "/" +
                      std::to_string(40 * views) + ") exact_render_misses=" +
                      std::to_string(exact_bad) + "/" + std::to_string(exact_total) +
                      " runtime=" + fmt(dt) + "s"};
}

// ---------------------------------------------------------------------------
// Criterion 11: the CLI chain, run twice from scratch, must leave two
// byte-identical output trees (logs included).
// ---------------------------------------------------------------------------

std::string shq(const std::string& s) { return "'" + s + "'"; }

std::optional<std::string> run_chain(const std::string& bin, const fs::path& dir) {
    fs::create_directories(dir);
    {
        std::ofstream q(dir / "queries.csv", std::ios::binary);
        q << "id,path,view,label\n"
          << "query_0,renders/shape_0001_v02.pgm,auto,"
          << "tall_back+thick_leg;tall_back+thin_leg;short_back+thick_leg;short_back+thin_leg;"
          << "wide_top+thick_leg;wide_top+thin_leg;narrow_top+thick_leg;narrow_top+thin_leg\n";
        if (!q) return "cannot write queries.csv";
    }
    const std::vector<std::string> steps = {
        "gen-synthetic --family mixed --n 6 --views 4 --seed 5 --image-side 48 --out col"
        " --renders renders",
        "build-vocab --collection col --words 8 --seed 3 --cap 500",
        "build-suitability --collection col",
        "synthesize --collection col --image renders/shape_0000_v01.pgm --pose auto --k 3 --m 5"
        " --kp 2 --out synth.mvft",
        "vad --a synth.mvft --b synth.mvft",
        "retrieve --collection col --queries self --distance vad --k 3 --kp 2 --report rep_vad",
        "retrieve --collection col --queries self --distance baseline --k 3 --kp 2"
        " --report rep_base",
        "retrieve --collection col --queries self --distance part --region g0,g1 --k 3 --kp 2"
        " --report rep_part",
        "retrieve --collection col --queries queries.csv --distance vad --k 3 --kp 2"
        " --report rep_ext",
        "eval-retrieval --rankings rep_vad/rankings.tsv --labels rep_vad/labels.csv --out pr2.csv",
        "transferability --collection col --k 3 --out transfer.csv",
        "sweep --collection col --param kp --values 1,2 --k 3 --report sweep.csv",
    };
    for (std::size_t i = 0; i < steps.size(); ++i) {
        std::string log = "log_" + std::to_string(i) + ".txt";
        std::string cmd = "cd " + shq(dir.string()) + " && " + shq(bin) + " " + steps[i] + " > " +
                          log + " 2>&1";
        int rc = std::system(cmd.c_str());
        if (rc == -1 || !WIFEXITED(rc) || WEXITSTATUS(rc) != 0) {
            return "step " + std::to_string(i) + " (" + steps[i].substr(0, steps[i].find(' ')) +
                   ") failed with status " + std::to_string(rc == -1 ? -1 : WEXITSTATUS(rc));
        }
    }
    return std::nullopt;
}

std::vector<fs::path> relative_files(const fs::path& root) {
    std::vector<fs::path> out;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file()) out.push_back(fs::relative(entry.path(), root));
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string slurp_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome criterion_11(const Ctx& ctx) {
    if (ctx.bin.empty()) return {false, "needs --viewsynth-bin"};
    fs::path root = ctx.fixtures / "cli_determinism";
    fs::remove_all(root);
    fs::path a = root / "run1";
    fs::path b = root / "run2";
    for (const fs::path& dir : {a, b}) {
        if (auto err = run_chain(ctx.bin, dir)) return {false, *err};
    }
    std::vector<fs::path> fa = relative_files(a);
    std::vector<fs::path> fb = relative_files(b);
    if (fa != fb) {
        return {false, "file sets differ: " + std::to_string(fa.size()) + " vs " +
                           std::to_string(fb.size()) + " files"};
    }
    long differing = 0;
    std::string first;
    for (const fs::path& rel : fa) {
        if (slurp_bytes(a / rel) != slurp_bytes(b / rel)) {
            if (differing == 0) first = rel.string();
            ++differing;
        }
    }
    bool pass = differing == 0;
    std::string detail = "steps=12 files_compared=" + std::to_string(fa.size()) +
                         " differing=" + std::to_string(differing);
    if (!pass) detail += " first=" + first;
    return {pass, detail};
}

// ---------------------------------------------------------------------------

struct Criterion {
    int number;
    const char* title;
    Outcome (*run)(const Ctx&);
};

const Criterion kCriteria[] = {
    {1, "estimator equals the exact pairwise oracle", criterion_1},
    {2, "estimator error shrinks with collection size", criterion_2},
    {3, "self-surrogacy exact, no positive suitability", criterion_3},
    {4, "simplex solver matches the grid oracle", criterion_4},
    {5, "simplex solver recovers one-hot weights", criterion_5},
    {6, "view-agnostic retrieval beats target and baseline", criterion_6},
    {7, "fine-grained retrieval behaves across parameters", criterion_7},
    {8, "cross-view transfer ranks stay near perfect", criterion_8},
    {9, "mirror-symmetric patches outscore unrelated parts", criterion_9},
    {10, "pose voting accurate held-out, exact on renders", criterion_10},
    {11, "CLI chain reruns byte-identical", criterion_11},
};

int usage(const char* argv0) {
    std::cerr << "usage: " << argv0
              << " [--setup] [--criterion N] [--fixtures DIR] [--viewsynth-bin PATH]\n";
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    bool setup = false;
    int wanted = -1;
    Ctx ctx;
    for (int i = 1; i < argc; ++i) {
        std::string arg = argv[i];
        auto value = [&]() -> const char* {
            if (i + 1 >= argc) {
                std::cerr << arg << " needs a value\n";
                std::exit(2);
            }
            return argv[++i];
        };
        if (arg == "--setup") {
            setup = true;
        } else if (arg == "--criterion") {
            wanted = std::atoi(value());
        } else if (arg == "--fixtures") {
            ctx.fixtures = value();
        } else if (arg == "--viewsynth-bin") {
            ctx.bin = value();
        } else {
            return usage(argv[0]);
        }
    }

    try {
        fs::create_directories(ctx.fixtures);
        if (setup) {
            for (const FixtureSpec& f : kFixtureSpecs) {
                fs::path dir = ctx.fixtures / f.name;
                if (fs::exists(dir / "manifest.json")) {
                    std::cout << "fixture " << f.name << ": already present" << std::endl;
                } else {
                    build_fixture(dir, f);
                }
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "setup failed: " << e.what() << "\n";
        return 1;
    }

    bool matched = false;
    bool all_pass = true;
    for (const Criterion& c : kCriteria) {
        if (wanted != -1 && wanted != c.number) continue;
        matched = true;
        Outcome o;
        try {
            o = c.run(ctx);
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (o.pass ? "[PASS]" : "[FAIL]") << " criterion " << c.number << ": "
                  << c.title << " (" << o.detail << ")" << std::endl;
        all_pass = all_pass && o.pass;
    }
    if (!matched) {
        std::cerr << "no such criterion: " << wanted << "\n";
        return 2;
    }
    return all_pass ? 0 : 1;
}
