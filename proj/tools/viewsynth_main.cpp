// viewsynth: build synthetic multi-view collections, train vocabularies,
// synthesize novel-view descriptors and run retrieval experiments.
//
// Every subcommand is deterministic given its flags and seeds. Exit codes:
// 0 success, 2 bad arguments, 3 malformed file, 1 anything else.

#include <charconv>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "viewsynth/viewsynth.hpp"

namespace fs = std::filesystem;
namespace vs = viewsynth;

namespace {

vs::ShapeFamily parse_family(const std::string& name) {
    if (name == "chairlike") return vs::ShapeFamily::Chairlike;
    if (name == "tablelike") return vs::ShapeFamily::Tablelike;
    if (name == "mixed") return vs::ShapeFamily::Mixed;
    throw vs::ArgumentError("unknown family '" + name + "' (chairlike, tablelike or mixed)");
}

int parse_strict_int(const std::string& s, const char* what) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
        throw vs::ArgumentError(std::string(what) + ": bad integer '" + s + "'");
    }
    return v;
}

// "3,4,9" or "g3,g4,g9" -> patch indices
std::vector<int> parse_region(const std::string& text) {
    std::vector<int> out;
    for (auto tok : vs::detail::split(text, ',')) {
        while (!tok.empty() && tok.front() == ' ') tok.erase(tok.begin());
        while (!tok.empty() && tok.back() == ' ') tok.pop_back();
        if (!tok.empty() && tok.front() == 'g') tok.erase(tok.begin());
        out.push_back(parse_strict_int(tok, "--region"));
    }
    if (out.empty()) throw vs::ArgumentError("--region: empty patch list");
    return out;
}

struct RuleFlags {
    std::optional<int> kp;
    std::optional<double> tau;

    vs::SelectionRule rule() const {
        if (tau) return vs::SelectionRule::threshold(*tau);
        return vs::SelectionRule::top_k(kp.value_or(9));
    }

    void add_to(CLI::App* cmd) {
        auto* kp_opt = cmd->add_option("--kp", kp, "surrogate region size (top-k rule)");
        auto* tau_opt = cmd->add_option("--tau", tau, "suitability threshold rule");
        kp_opt->excludes(tau_opt);
        tau_opt->excludes(kp_opt);
    }
};

const vs::SuitabilityTable& require_table(const vs::CollectionBundle& bundle) {
    if (!bundle.table) {
        throw vs::ArgumentError("collection has no suitability table; run build-suitability");
    }
    return *bundle.table;
}

vs::MultiViewDescriptor single_descriptor(const fs::path& path) {
    vs::MvftData data = vs::read_mvft(path);
    if (data.shapes != 1) {
        throw vs::ArgumentError(path.string() + ": expected exactly one shape, found " +
                                std::to_string(data.shapes));
    }
    vs::MultiViewDescriptor d(data.views, data.patches, data.dim);
    std::copy(data.values.begin(), data.values.end(), d.flat().begin());
    return d;
}

int pose_index(const std::string& pose, int views) {
    if (pose == "auto") return -1;
    int v = parse_strict_int(pose, "--pose");
    if (v < 0 || v >= views) throw vs::AddressError("view", v, views);
    return v;
}

// ---- gen-synthetic ----

struct GenOpts {
    std::string family = "chairlike";
    int n = 0;
    int views = 16;
    std::uint64_t seed = 0;
    std::string out;
    int image_side = 112;
    std::string renders;
};

void run_gen_synthetic(const GenOpts& opt) {
    vs::RenderSpec spec;
    spec.view_set = vs::ViewSet::uniform_ring(opt.views);
    spec.image_side = opt.image_side;
    vs::PatchGridConfig grid;
    grid.image_side = opt.image_side;
    vs::HogConfig hog;

    vs::SyntheticCollection built =
        vs::build_synthetic_collection(opt.n, parse_family(opt.family), spec, grid, hog, opt.seed);
    std::string name = opt.family + "_n" + std::to_string(opt.n) + "_v" + std::to_string(opt.views);
    vs::save_collection_dir(opt.out, name, built.collection, vs::singleton_labels(built.labels));

    if (!opt.renders.empty()) {
        fs::create_directories(opt.renders);
        for (int i = 0; i < built.collection.size(); ++i) {
            for (int v = 0; v < opt.views; ++v) {
                std::string tag = std::to_string(v);
                if (tag.size() < 2) tag.insert(tag.begin(), '0');
                fs::path file = fs::path(opt.renders) /
                                (built.collection.ids()[i] + "_v" + tag + ".pgm");
                vs::write_pgm(vs::render(built.shapes[i], spec, v), file.string());
            }
        }
    }
    std::cout << "shapes=" << built.collection.size() << " views=" << built.collection.views()
              << " patches=" << built.collection.patches() << " dim=" << built.collection.dim()
              << "\n";
}

// ---- build-vocab ----

struct VocabOpts {
    std::string collection;
    int words = 256;
    std::uint64_t seed = 0;
    int cap = 100000;
};

void run_build_vocab(const VocabOpts& opt) {
    vs::CollectionBundle bundle = vs::load_collection_dir(opt.collection);
    vs::FeatureBlock samples =
        vs::subsample_features(bundle.collection, opt.cap, vs::mix_seed(opt.seed, 0));
    vs::KMeansStats stats;
    vs::Codebook cb =
        vs::train_codebook(samples, opt.words, vs::mix_seed(opt.seed, 1), 100, &stats);
    cb.seed = opt.seed;
    vs::attach_vocab(opt.collection, cb);
    std::cout << "words=" << cb.words << " samples=" << samples.count
              << " iterations=" << stats.iterations
              << " objective=" << vs::detail::format_double(stats.objective.back()) << "\n";
}

// ---- build-suitability ----

void run_build_suitability(const std::string& collection) {
    vs::CollectionBundle bundle = vs::load_collection_dir(collection);
    if (!bundle.codebook) {
        throw vs::ArgumentError("collection has no vocabulary; run build-vocab first");
    }
    vs::QuantizedCollection qc = vs::quantize_collection(bundle.collection, *bundle.codebook);
    vs::SuitabilityTable table = vs::build_table(qc);
    vs::attach_suitability(collection, table);
    std::size_t defined = 0;
    for (double g : table.gamma) {
        if (std::isfinite(g)) ++defined;
    }
    std::cout << "entries=" << table.gamma.size() << " defined=" << defined << "\n";
}

// ---- synthesize ----

struct SynthOpts {
    std::string collection;
    std::string image;
    std::string pose = "auto";
    int k = 200;
    int m = 15;
    RuleFlags rule;
    std::string out;
};

void run_synthesize(const SynthOpts& opt) {
    vs::CollectionBundle bundle = vs::load_collection_dir(opt.collection);
    const vs::SuitabilityTable& table = require_table(bundle);
    vs::GrayImage image = vs::read_pgm(opt.image);
    int forced = pose_index(opt.pose, bundle.collection.views());
    vs::PosedSynthesis result =
        vs::synthesize_with_pose(bundle.collection, table, image, vs::HogConfig{},
                                 bundle.collection.grid(), opt.rule.rule(), opt.k, opt.m, forced);
    const vs::MultiViewDescriptor& d = result.descriptor.data;
    vs::write_mvft(opt.out, 1, d.views(), d.patches(), d.dim(), d.flat());
    std::cout << "pose_view=" << result.pose.view
              << " pose_score=" << vs::detail::format_double(result.pose.score) << "\n";
}

// ---- vad ----

void run_vad(const std::string& a, const std::string& b) {
    std::cout << vs::detail::format_double(vs::vad(single_descriptor(a), single_descriptor(b)))
              << "\n";
}

// ---- retrieve ----

struct RetrieveOpts {
    std::string collection;
    std::string queries = "self";
    std::string distance = "vad";
    std::string region;
    int k = 200;
    int m = 15;
    RuleFlags rule;
    std::string report;
};

vs::DistanceKind parse_distance(const std::string& name) {
    if (name == "vad") return vs::DistanceKind::Vad;
    if (name == "baseline") return vs::DistanceKind::BaselineL2;
    if (name == "part") return vs::DistanceKind::PartVad;
    throw vs::ArgumentError("unknown distance '" + name + "' (vad, baseline or part)");
}

// query list format: header "id,path,view,label"; view is an index or "auto",
// label may hold several values joined by ';'
struct ExternalQuery {
    std::string id;
    std::string path;
    std::string view;
    std::vector<std::string> labels;
};

std::vector<ExternalQuery> read_query_csv(const fs::path& path) {
    auto in = vs::detail::open_in(path);
    std::string line;
    if (!std::getline(in, line) || line != "id,path,view,label") {
        throw vs::FormatError("query csv: expected header 'id,path,view,label'");
    }
    std::vector<ExternalQuery> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = vs::detail::split(line, ',');
        if (fields.size() != 4 || fields[0].empty() || fields[1].empty() || fields[3].empty()) {
            throw vs::FormatError("query csv: bad row '" + line + "'");
        }
        out.push_back({fields[0], fields[1], fields[2], vs::detail::split(fields[3], ';')});
    }
    if (out.empty()) throw vs::ArgumentError("query csv: no queries");
    return out;
}

void write_report(const fs::path& dir, const vs::LabeledImageSet& set,
                  const vs::RetrievalResult& result) {
    fs::create_directories(dir);
    std::vector<vs::RankingRow> rows;
    for (const auto& qr : result.rankings) {
        for (const auto& r : qr.ranked) {
            rows.push_back({set.items[qr.query].id, r.rank, set.items[r.item].id, r.distance});
        }
    }
    vs::write_rankings_tsv(dir / "rankings.tsv", rows);
    vs::write_pr_csv(dir / "pr.csv", result.curve);
    std::vector<std::string> ids;
    std::vector<std::vector<std::string>> labels;
    for (const auto& item : set.items) {
        ids.push_back(item.id);
        labels.push_back(item.labels);
    }
    vs::write_labels_csv(dir / "labels.csv", ids, labels);
    std::string auc = vs::detail::format_double(result.curve.auc);
    auto out = vs::detail::open_out(dir / "auc.txt");
    out << auc << "\n";
    vs::detail::finish_write(out, dir / "auc.txt");
    std::cout << "auc=" << auc << "\n";
}

void run_retrieve(const RetrieveOpts& opt) {
    vs::CollectionBundle bundle = vs::load_collection_dir(opt.collection);
    const vs::SuitabilityTable& table = require_table(bundle);
    vs::DistanceKind kind = parse_distance(opt.distance);
    vs::SelectionRule rule = opt.rule.rule();
    std::vector<int> region;
    if (kind == vs::DistanceKind::PartVad) {
        if (opt.region.empty()) throw vs::ArgumentError("part distance needs --region");
        region = parse_region(opt.region);
    }

    vs::LabeledImageSet set;
    std::vector<int> roles;
    const std::vector<int>* roles_ptr = nullptr;
    if (opt.queries == "self") {
        set = vs::build_self_synthesized_set(bundle.collection, table, bundle.labels, opt.k, rule);
    } else {
        if (kind == vs::DistanceKind::BaselineL2) {
            throw vs::ArgumentError("baseline distance is only defined for --queries self");
        }
        const vs::ShapeCollection& c = bundle.collection;
        const std::size_t per_shape =
            static_cast<std::size_t>(c.views()) * c.patches() * c.dim();
        for (int i = 0; i < c.size(); ++i) {
            vs::LabeledItem item;
            item.id = c.ids()[i];
            item.descriptor = vs::MultiViewDescriptor(c.views(), c.patches(), c.dim());
            auto block = c.flat().subspan(static_cast<std::size_t>(i) * per_shape, per_shape);
            std::copy(block.begin(), block.end(), item.descriptor.flat().begin());
            item.labels = bundle.labels[i];
            set.items.push_back(std::move(item));
            roles.push_back(vs::kRoleCandidate);
        }
        for (const auto& q : read_query_csv(opt.queries)) {
            vs::GrayImage image = vs::read_pgm(q.path);
            int forced = pose_index(q.view, c.views());
            vs::PosedSynthesis posed =
                vs::synthesize_with_pose(c, table, image, vs::HogConfig{}, c.grid(), rule,
                                         opt.k, opt.m, forced);
            vs::LabeledItem item;
            item.id = q.id;
            item.descriptor = std::move(posed.descriptor.data);
            item.observed_view = posed.pose.view;
            item.labels = q.labels;
            set.items.push_back(std::move(item));
            roles.push_back(vs::kRoleQuery);
        }
        roles_ptr = &roles;
    }

    vs::RetrievalResult result =
        vs::run_retrieval(set, kind, &table, &rule, region.empty() ? nullptr : &region, roles_ptr);
    write_report(opt.report, set, result);
}

// ---- eval-retrieval ----

struct EvalOpts {
    std::string rankings;
    std::string labels;
    std::string out;
};

void run_eval_retrieval(const EvalOpts& opt) {
    auto rows = vs::read_rankings_tsv(opt.rankings);
    auto labels = vs::read_labels_csv(opt.labels);
    if (rows.empty()) throw vs::ArgumentError("rankings file holds no rows");
    auto labels_of = [&](const std::string& id) -> const std::vector<std::string>& {
        auto it = labels.find(id);
        if (it == labels.end()) throw vs::FormatError("labels csv: missing id '" + id + "'");
        return it->second;
    };
    std::vector<std::pair<double, bool>> pool;
    pool.reserve(rows.size());
    for (const auto& r : rows) {
        pool.emplace_back(r.distance,
                          vs::detail::share_label(labels_of(r.query), labels_of(r.candidate)));
    }
    vs::PRCurve curve = vs::detail::pooled_pr(pool);
    if (!opt.out.empty()) vs::write_pr_csv(opt.out, curve);
    std::cout << "auc=" << vs::detail::format_double(curve.auc) << "\n";
}

// ---- transferability ----

struct TransferOpts {
    std::string collection;
    int k = 50;
    std::string out;
};

void run_transferability(const TransferOpts& opt) {
    vs::CollectionBundle bundle = vs::load_collection_dir(opt.collection);
    vs::TransferMatrix m = vs::transferability_matrix(bundle.collection, opt.k);
    vs::write_transfer_csv(opt.out, m);
    std::cout << "diagonal_mean=" << vs::detail::format_double(m.diagonal_mean())
              << " global_mean=" << vs::detail::format_double(m.global_mean()) << "\n";
}

// ---- sweep ----

struct SweepOpts {
    std::string collection;
    std::string param;
    std::string values;
    int k = 200;
    int kp = 9;
    std::uint64_t seed = 0;
    int cap = 100000;
    std::string report;
};

void run_sweep(const SweepOpts& opt) {
    if (opt.param != "k" && opt.param != "kp" && opt.param != "tau" && opt.param != "words") {
        throw vs::ArgumentError("unknown sweep parameter '" + opt.param +
                                "' (k, kp, tau or words)");
    }
    vs::CollectionBundle bundle = vs::load_collection_dir(opt.collection);
    std::vector<std::string> tokens = vs::detail::split(opt.values, ',');

    auto out = vs::detail::open_out(opt.report);
    out << "param,value,auc\n";
    for (const auto& tok : tokens) {
        double auc = 0.0;
        if (opt.param == "words") {
            int words = parse_strict_int(tok, "--values");
            vs::FeatureBlock samples =
                vs::subsample_features(bundle.collection, opt.cap, vs::mix_seed(opt.seed, 0));
            vs::Codebook cb = vs::train_codebook(samples, words, vs::mix_seed(opt.seed, 1));
            vs::SuitabilityTable table =
                vs::build_table(vs::quantize_collection(bundle.collection, cb));
            auc = vs::self_retrieval_auc(bundle.collection, table, bundle.labels, opt.k,
                                         vs::SelectionRule::top_k(opt.kp), vs::DistanceKind::Vad);
        } else {
            const vs::SuitabilityTable& table = require_table(bundle);
            int k = opt.k;
            vs::SelectionRule rule = vs::SelectionRule::top_k(opt.kp);
            if (opt.param == "k") {
                k = parse_strict_int(tok, "--values");
            } else if (opt.param == "kp") {
                rule = vs::SelectionRule::top_k(parse_strict_int(tok, "--values"));
            } else {
                rule = vs::SelectionRule::threshold(vs::detail::parse_double(tok, "--values"));
            }
            auc = vs::self_retrieval_auc(bundle.collection, table, bundle.labels, k, rule,
                                         vs::DistanceKind::Vad);
        }
        std::string value = opt.param == "tau"
                                ? vs::detail::format_double(vs::detail::parse_double(tok, "--values"))
                                : std::to_string(parse_strict_int(tok, "--values"));
        out << opt.param << "," << value << "," << vs::detail::format_double(auc) << "\n";
        std::cout << opt.param << "=" << value << " auc=" << vs::detail::format_double(auc)
                  << "\n";
    }
    vs::detail::finish_write(out, opt.report);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-view feature synthesis and view-agnostic retrieval"};
    app.require_subcommand(1);

    GenOpts gen;
    auto* gen_cmd = app.add_subcommand("gen-synthetic", "generate a synthetic shape collection");
    gen_cmd->add_option("--family", gen.family, "chairlike, tablelike or mixed");
    gen_cmd->add_option("--n", gen.n, "number of shapes")->required();
    gen_cmd->add_option("--views", gen.views, "views on the azimuth ring");
    gen_cmd->add_option("--seed", gen.seed, "generator seed");
    gen_cmd->add_option("--out", gen.out, "collection directory")->required();
    gen_cmd->add_option("--image-side", gen.image_side, "render/grid image side");
    gen_cmd->add_option("--renders", gen.renders, "also write per-view PGM renders here");
    gen_cmd->callback([&] { run_gen_synthetic(gen); });

    VocabOpts vocab;
    auto* vocab_cmd = app.add_subcommand("build-vocab", "train and attach a visual vocabulary");
    vocab_cmd->add_option("--collection", vocab.collection, "collection directory")->required();
    vocab_cmd->add_option("--words", vocab.words, "vocabulary size");
    vocab_cmd->add_option("--seed", vocab.seed, "training seed");
    vocab_cmd->add_option("--cap", vocab.cap, "max training samples");
    vocab_cmd->callback([&] { run_build_vocab(vocab); });

    std::string suit_collection;
    auto* suit_cmd =
        app.add_subcommand("build-suitability", "estimate and attach the suitability table");
    suit_cmd->add_option("--collection", suit_collection, "collection directory")->required();
    suit_cmd->callback([&] { run_build_suitability(suit_collection); });

    SynthOpts synth;
    auto* synth_cmd =
        app.add_subcommand("synthesize", "synthesize all views from one observed image");
    synth_cmd->add_option("--collection", synth.collection, "collection directory")->required();
    synth_cmd->add_option("--image", synth.image, "observed view, 8-bit PGM")->required();
    synth_cmd->add_option("--pose", synth.pose, "'auto' or a view index");
    synth_cmd->add_option("--k", synth.k, "neighborhood size");
    synth_cmd->add_option("--m", synth.m, "pose voting neighbors");
    synth.rule.add_to(synth_cmd);
    synth_cmd->add_option("--out", synth.out, "output descriptor (.mvft)")->required();
    synth_cmd->callback([&] { run_synthesize(synth); });

    std::string vad_a, vad_b;
    auto* vad_cmd = app.add_subcommand("vad", "view-agnostic distance between two descriptors");
    vad_cmd->add_option("--a", vad_a, "first descriptor (.mvft)")->required();
    vad_cmd->add_option("--b", vad_b, "second descriptor (.mvft)")->required();
    vad_cmd->callback([&] { run_vad(vad_a, vad_b); });

    RetrieveOpts retr;
    auto* retr_cmd = app.add_subcommand("retrieve", "rank candidates for every query");
    retr_cmd->add_option("--collection", retr.collection, "collection directory")->required();
    retr_cmd->add_option("--queries", retr.queries, "'self' or a query list csv");
    retr_cmd->add_option("--distance", retr.distance, "vad, baseline or part");
    retr_cmd->add_option("--region", retr.region, "marked patches for the part distance");
    retr_cmd->add_option("--k", retr.k, "neighborhood size");
    retr_cmd->add_option("--m", retr.m, "pose voting neighbors");
    retr.rule.add_to(retr_cmd);
    retr_cmd->add_option("--report", retr.report, "report directory")->required();
    retr_cmd->callback([&] { run_retrieve(retr); });

    EvalOpts eval;
    auto* eval_cmd = app.add_subcommand("eval-retrieval", "recompute PR curve from a report");
    eval_cmd->add_option("--rankings", eval.rankings, "rankings.tsv")->required();
    eval_cmd->add_option("--labels", eval.labels, "labels.csv")->required();
    eval_cmd->add_option("--out", eval.out, "write the PR curve here");
    eval_cmd->callback([&] { run_eval_retrieval(eval); });

    TransferOpts transfer;
    auto* transfer_cmd =
        app.add_subcommand("transferability", "cross-view reconstruction rank matrix");
    transfer_cmd->add_option("--collection", transfer.collection, "collection directory")
        ->required();
    transfer_cmd->add_option("--k", transfer.k, "neighborhood size");
    transfer_cmd->add_option("--out", transfer.out, "output csv")->required();
    transfer_cmd->callback([&] { run_transferability(transfer); });

    SweepOpts sweep;
    auto* sweep_cmd = app.add_subcommand("sweep", "AUC versus one pipeline parameter");
    sweep_cmd->add_option("--collection", sweep.collection, "collection directory")->required();
    sweep_cmd->add_option("--param", sweep.param, "k, kp, tau or words")->required();
    sweep_cmd->add_option("--values", sweep.values, "comma-separated values")->required();
    sweep_cmd->add_option("--k", sweep.k, "neighborhood size when not swept");
    sweep_cmd->add_option("--kp", sweep.kp, "region size when not swept");
    sweep_cmd->add_option("--seed", sweep.seed, "vocabulary seed for the words sweep");
    sweep_cmd->add_option("--cap", sweep.cap, "max vocabulary training samples");
    sweep_cmd->add_option("--report", sweep.report, "output csv")->required();
    sweep_cmd->callback([&] { run_sweep(sweep); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const vs::ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const vs::AddressError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const vs::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
