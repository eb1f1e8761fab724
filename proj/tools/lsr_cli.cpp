// Command-line front end: synth, train, reinforce, predict, eval, export.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <lsr/lsr.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void log_line(const json& j) { std::cout << j.dump() << "\n" << std::flush; }

// ---------------------------------------------------------------------------
// Shared flag groups

struct CommonFlags {
    std::uint64_t seed = 0;
    int threads = 0;
    int verbosity = 1;
};

void add_common(CLI::App* app, CommonFlags& f)
{
    app->add_option("--seed", f.seed, "RNG seed");
    app->add_option("--threads", f.threads, "Worker threads (default: LSR_THREADS, else 1)")->check(CLI::NonNegativeNumber);
    app->add_option("-v,--verbosity", f.verbosity, "0 = quiet, 1 = progress");
}

struct TrainFlags {
    lsr::TrainConfig cfg;
    std::optional<double> mu;
    std::vector<double> radii;
};

void add_train(CLI::App* app, TrainFlags& f)
{
    app->add_option("--stages", f.cfg.stages, "Cascade stages T");
    app->add_option("--trees", f.cfg.trees_per_landmark, "Trees per landmark");
    app->add_option("--depth", f.cfg.tree_depth, "Tree depth");
    app->add_option("--radius", f.radii, "Sampling radius per stage, fraction of face size");
    app->add_option("--mu", f.mu, "Ridge weight (default 1e-3 * feature dimension)");
    app->add_option("--perturbations", f.cfg.initial_perturbations, "Initial shapes per training image");
    app->add_option("--split-candidates", f.cfg.split_candidates, "Pixel-difference candidates per split");
    app->add_option("--pixel-pool", f.cfg.pixel_pool, "Sampled pixels per landmark and stage");
    app->add_option("--split-sample-cap", f.cfg.split_sample_cap, "Node samples used to score a split");
}

lsr::TrainConfig finish_train(const TrainFlags& f, const CommonFlags& c, const lsr::DatasetManifest& m)
{
    lsr::TrainConfig cfg = f.cfg;
    cfg.mu = f.mu;
    if (!f.radii.empty()) {
        cfg.radius_schedule = f.radii;
    }
    cfg.rng_seed = c.seed;
    cfg.pupils = m.pupils;
    return cfg;
}

void validate_or_usage(const auto& cfg)
{
    try {
        cfg.validate();
    } catch (const lsr::InvalidConfig& e) {
        throw UsageError(e.what());
    }
}

void apply_threads(const CommonFlags& c) { lsr::set_thread_count(c.threads); }

void ensure_dir(const fs::path& p)
{
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) {
        throw lsr::IoError("cannot create " + p.string() + ": " + ec.message());
    }
}

// ---------------------------------------------------------------------------
// Manifest loading

struct LoadedFace {
    const lsr::ManifestEntry* entry = nullptr;
    std::shared_ptr<const lsr::GrayImage> image;
    std::optional<lsr::Shape> label;
    std::optional<lsr::Shape> truth;
};

std::vector<LoadedFace> load_split(const lsr::DatasetManifest& m, lsr::Split split)
{
    const auto entries = m.with_split(split);
    std::vector<LoadedFace> out(entries.size());
    lsr::parallel_for(entries.size(), [&](std::size_t i) {
        const auto& e = *entries[i];
        auto& f = out[i];
        f.entry = &e;
        f.image = std::make_shared<const lsr::GrayImage>(lsr::read_png(m.resolve(e.image)));
        if (e.pts) {
            f.label = lsr::load_pts(m.resolve(*e.pts));
            if (f.label->size() != m.landmarks) {
                throw lsr::MalformedFile(e.id + ": expected " + std::to_string(m.landmarks) + " landmarks");
            }
        }
        if (e.truth) {
            f.truth = lsr::load_pts(m.resolve(*e.truth));
        }
    });
    return out;
}

std::vector<lsr::TrainingSample> labeled_samples(const std::vector<LoadedFace>& faces)
{
    std::vector<lsr::TrainingSample> out;
    for (const auto& f : faces) {
        if (f.label) {
            out.push_back({f.image, f.entry->bbox, *f.label, 1});
        }
    }
    return out;
}

json stage_json(const lsr::StageReport& s, std::size_t t)
{
    return {{"event", "stage"},
            {"stage", t + 1},
            {"error_before", s.error_before},
            {"error_after", s.error_after},
            {"residual_before", s.residual_before},
            {"residual_after", s.residual_after},
            {"ridge_objective", s.ridge_objective}};
}

std::string csv_number(double v) { return lsr::format_double(v); }

// ---------------------------------------------------------------------------
// synth

struct SynthFlags {
    CommonFlags common;
    lsr::SyntheticFaceConfig cfg;
    std::string out;
    std::string split;
};

std::array<double, 3> parse_split_ratios(const std::string& text)
{
    std::array<double, 3> r{};
    std::stringstream ss(text);
    std::string item;
    std::size_t i = 0;
    while (std::getline(ss, item, ',')) {
        if (i >= 3) {
            throw UsageError("--split takes three comma-separated values");
        }
        const auto v = lsr::parse_double(item);
        if (!v || *v < 0.0) {
            throw UsageError("--split values must be nonnegative numbers");
        }
        r[i++] = *v;
    }
    if (i != 3) {
        throw UsageError("--split takes three comma-separated values");
    }
    const double sum = r[0] + r[1] + r[2];
    if (!(sum > 0.0)) {
        throw UsageError("--split values must not all be zero");
    }
    for (auto& v : r) {
        v /= sum;
    }
    return r;
}

int cmd_synth(const SynthFlags& f)
{
    apply_threads(f.common);
    lsr::SyntheticFaceConfig cfg = f.cfg;
    cfg.rng_seed = f.common.seed;
    validate_or_usage(cfg);
    std::optional<std::array<double, 3>> ratios;
    if (!f.split.empty()) {
        ratios = parse_split_ratios(f.split);
    }
    const fs::path out(f.out);
    lsr::DatasetManifest m = lsr::synthesize_dataset(cfg, out);
    if (ratios) {
        // Ratios were normalized by their sum; absorb rounding so they sum to 1.
        (*ratios)[2] = std::max(0.0, 1.0 - (*ratios)[0] - (*ratios)[1]);
        const auto parts = lsr::split_manifest(m, *ratios, f.common.seed);
        lsr::DatasetManifest merged = parts.train;
        for (auto e : parts.unlabeled.entries) {
            e.truth = e.pts;
            e.pts.reset();
            merged.entries.push_back(std::move(e));
        }
        for (const auto& e : parts.test.entries) {
            merged.entries.push_back(e);
        }
        m = std::move(merged);
        lsr::write_manifest(out / "manifest.jsonl", m);
    }
    log_line({{"event", "synth"},
              {"count", m.entries.size()},
              {"train", m.with_split(lsr::Split::train).size()},
              {"unlabeled", m.with_split(lsr::Split::unlabeled).size()},
              {"test", m.with_split(lsr::Split::test).size()},
              {"manifest", (out / "manifest.jsonl").string()}});
    return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainCmdFlags {
    CommonFlags common;
    TrainFlags train;
    std::string manifest;
    std::string out;
};

int cmd_train(const TrainCmdFlags& f)
{
    apply_threads(f.common);
    // Validate what can be checked without reading data first.
    {
        lsr::TrainConfig probe = f.train.cfg;
        probe.mu = f.train.mu;
        if (!f.train.radii.empty()) {
            probe.radius_schedule = f.train.radii;
        }
        validate_or_usage(probe);
    }
    const auto m = lsr::load_manifest(f.manifest);
    const auto cfg = finish_train(f.train, f.common, m);
    const lsr::FeatureConfig features;
    const auto faces = load_split(m, lsr::Split::train);
    const auto samples = labeled_samples(faces);
    if (samples.empty()) {
        throw lsr::EmptyInput("the manifest has no labeled train entries");
    }
    lsr::CascadeTrainReport report;
    const auto model = lsr::train_cascade(samples, cfg, features, &report);
    const fs::path out(f.out);
    ensure_dir(out);
    lsr::save_model(out / "model.lsrm", model);
    std::string log;
    for (std::size_t t = 0; t < report.stages.size(); ++t) {
        const auto j = stage_json(report.stages[t], t);
        log += j.dump() + "\n";
        if (f.common.verbosity > 0) {
            log_line(j);
        }
    }
    lsr::write_text_file(out / "train_log.jsonl", log);
    log_line({{"event", "train"}, {"samples", samples.size()}, {"model", (out / "model.lsrm").string()}});
    return 0;
}

// ---------------------------------------------------------------------------
// reinforce

struct ReinforceFlags {
    CommonFlags common;
    TrainFlags train;
    lsr::ReinforceConfig cfg;
    std::optional<double> sigma;
    std::optional<double> d_t;
    std::string manifest;
    std::string out;
};

int cmd_reinforce(const ReinforceFlags& f)
{
    apply_threads(f.common);
    lsr::ReinforceConfig cfg = f.cfg;
    cfg.sigma = f.sigma;
    cfg.d_t = f.d_t;
    cfg.train = f.train.cfg;
    cfg.train.mu = f.train.mu;
    if (!f.train.radii.empty()) {
        cfg.train.radius_schedule = f.train.radii;
    }
    validate_or_usage(cfg);

    const auto m = lsr::load_manifest(f.manifest);
    cfg.train = finish_train(f.train, f.common, m);
    cfg.stable_subset = m.stable_subset;

    const auto train = load_split(m, lsr::Split::train);
    const auto unlabeled = load_split(m, lsr::Split::unlabeled);
    const auto test = load_split(m, lsr::Split::test);

    std::vector<lsr::SampleRecord> manual, pool;
    for (const auto& face : train) {
        if (!face.label) {
            continue;
        }
        lsr::SampleRecord r;
        r.id = face.entry->id;
        r.image = face.image;
        r.bbox = face.entry->bbox;
        r.label = face.label;
        r.truth = face.truth;
        manual.push_back(std::move(r));
    }
    for (const auto& face : unlabeled) {
        lsr::SampleRecord r;
        r.id = face.entry->id;
        r.image = face.image;
        r.bbox = face.entry->bbox;
        r.truth = face.truth ? face.truth : face.label;
        pool.push_back(std::move(r));
    }
    std::vector<lsr::ValidationSample> validation;
    for (const auto& face : test) {
        if (face.label) {
            validation.push_back({face.entry->id, face.image, face.entry->bbox, *face.label});
        }
    }

    const fs::path out(f.out);
    ensure_dir(out / "checkpoints");
    auto state = lsr::initialize(std::move(manual), std::move(pool), cfg);
    if (state.classifiers || state.geometry) {
        lsr::ModelContainer v;
        v.features = cfg.features;
        v.classifiers = state.classifiers;
        v.geometry = state.geometry;
        lsr::save_container(out / "validators.lsrm", v);
        lsr::write_text_file(out / "geometry.tsv", lsr::format_geometry_table(*state.geometry));
    }
    std::string iteration_log;
    const auto model = lsr::run(state, cfg, validation, [&](const lsr::ReinforceState& st) {
        char name[32];
        std::snprintf(name, sizeof name, "iter_%03d.lsrm", st.t);
        lsr::save_model(out / "checkpoints" / name, st.model);
        json j = lsr::iteration_json(st.history.back());
        iteration_log += j.dump() + "\n";
        lsr::write_text_file(out / "iterations.jsonl", iteration_log);
        if (f.common.verbosity > 0) {
            j["event"] = "iteration";
            log_line(j);
        }
    });
    lsr::save_model(out / "model.lsrm", model);

    std::string scores = "id,origin,v,a,g,score\n";
    for (const auto& r : state.records) {
        scores += r.id + "," + (r.origin == lsr::Origin::manual ? "manual" : "predicted") + "," +
                  std::to_string(r.v) + "," + (r.scored ? csv_number(r.a) : "") + "," +
                  (r.scored ? csv_number(r.g) : "") + "," +
                  (r.scored ? csv_number(lsr::combined_score(r.a, r.g, cfg.lambda, cfg.epsilon)) : "") + "\n";
    }
    lsr::write_text_file(out / "scores.csv", scores);
    log_line({{"event", "reinforce"},
              {"iterations", state.t},
              {"converged", state.converged},
              {"survivors", state.survivor_count()},
              {"records", state.records.size()},
              {"model", (out / "model.lsrm").string()}});
    return 0;
}

// ---------------------------------------------------------------------------
// predict / eval

struct EvalFlags {
    CommonFlags common;
    std::string manifest;
    std::string model;
    std::string validators;
    std::string split = "test";
    std::string out;
    double lambda = 1.0;
    double epsilon = 0.0;
};

int cmd_predict(const EvalFlags& f)
{
    apply_threads(f.common);
    const auto m = lsr::load_manifest(f.manifest);
    const auto model = lsr::load_model(f.model);
    const auto entries = m.with_split(lsr::parse_split(f.split));
    if (entries.empty()) {
        throw lsr::EmptyInput("split '" + f.split + "' is empty");
    }
    const fs::path out(f.out);
    ensure_dir(out);
    lsr::parallel_for(entries.size(), [&](std::size_t i) {
        const auto& e = *entries[i];
        const auto img = lsr::read_png(m.resolve(e.image));
        lsr::write_pts(out / (e.id + ".pts"), lsr::predict(model, img, e.bbox));
    });
    log_line({{"event", "predict"}, {"count", entries.size()}, {"out", out.string()}});
    return 0;
}

int cmd_eval(const EvalFlags& f)
{
    apply_threads(f.common);
    if (!(f.lambda >= 0.0) || !(f.epsilon >= 0.0)) {
        throw UsageError("--lambda and --epsilon must be nonnegative");
    }
    const auto m = lsr::load_manifest(f.manifest);
    const auto model = lsr::load_model(f.model);
    std::optional<lsr::ModelContainer> validators;
    if (!f.validators.empty()) {
        validators = lsr::load_container(f.validators);
        if (!validators->classifiers || !validators->geometry) {
            throw lsr::MalformedFile(f.validators + " lacks classifier or geometry sections");
        }
    }
    const auto split = lsr::parse_split(f.split);
    std::vector<const lsr::ManifestEntry*> entries;
    for (const auto* e : m.with_split(split)) {
        if (e->pts || e->truth) {
            entries.push_back(e);
        }
    }
    if (entries.empty()) {
        throw lsr::EmptyInput("split '" + f.split + "' has no entries with ground truth");
    }
    std::vector<double> errors(entries.size());
    std::vector<double> scores(entries.size());
    lsr::parallel_for(entries.size(), [&](std::size_t i) {
        const auto& e = *entries[i];
        const auto img = lsr::read_png(m.resolve(e.image));
        const auto gt = lsr::load_pts(m.resolve(e.pts ? *e.pts : *e.truth));
        const auto pred = lsr::predict(model, img, e.bbox);
        errors[i] = lsr::nme(pred, gt, m.pupils);
        if (validators) {
            const double a = lsr::appearance_score(img, pred, *validators->classifiers);
            const double g = lsr::geometry_score(pred, *validators->geometry);
            scores[i] = lsr::combined_score(a, g, f.lambda, f.epsilon);
        }
    });
    std::vector<std::string> ids;
    for (const auto* e : entries) {
        ids.push_back(e->id);
    }
    const auto result = lsr::make_nme_result(f.split, ids, errors);
    const fs::path out(f.out);
    ensure_dir(out);
    lsr::write_nme_csv(out / "nme.csv", result);
    const auto ced = lsr::ced_curve(errors, lsr::ced_thresholds_for(errors));
    lsr::write_ced_csv(out / "ced.csv", ced);
    json summary{{"event", "eval"}, {"split", f.split}, {"count", errors.size()}, {"mean_nme", result.mean}};
    if (validators) {
        std::vector<lsr::CorrelationPair> pairs;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            pairs.push_back({ids[i], scores[i], errors[i]});
        }
        try {
            const auto rep = lsr::discrepancy_error_correlation(pairs);
            lsr::write_correlation_csv(out / "correlation.csv", rep);
            summary["spearman"] = rep.spearman_rho;
            summary["pearson"] = std::isfinite(rep.pearson_r) ? json(rep.pearson_r) : json(nullptr);
        } catch (const lsr::ConstantInput& e) {
            std::cerr << "correlation skipped: " << e.what() << "\n";
        } catch (const lsr::EmptyInput& e) {
            std::cerr << "correlation skipped: " << e.what() << "\n";
        }
    }
    log_line(summary);
    return 0;
}

// ---------------------------------------------------------------------------
// export

struct ExportFlags {
    std::string model;
    std::string out;
};

int cmd_export(const ExportFlags& f)
{
    const auto c = lsr::load_container(f.model);
    const fs::path out(f.out);
    ensure_dir(out);
    const fs::path target = out / (fs::path(f.model).stem().string() + ".json");
    lsr::write_text_file(target, lsr::container_to_json(c).dump(1) + "\n");
    log_line({{"event", "export"}, {"out", target.string()}});
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Self-reinforced cascaded regression for landmark localization"};
    app.require_subcommand(1);

    SynthFlags synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic face dataset");
    add_common(s, synth.common);
    s->add_option("--out", synth.out, "Output directory")->required();
    s->add_option("--count", synth.cfg.count, "Number of faces");
    s->add_option("--split", synth.split, "train,unlabeled,test ratios or counts");
    s->add_option("--image-size", synth.cfg.image_size, "Image side in pixels");
    s->add_option("--deformation-std", synth.cfg.deformation_std, "Shape deformation std");
    s->add_option("--rotation-std", synth.cfg.rotation_std, "Rotation std, radians");
    s->add_option("--perspective", synth.cfg.perspective, "Perspective jitter range");
    s->add_option("--clutter", synth.cfg.background_clutter, "Background clutter strength");
    s->add_option("--noise", synth.cfg.noise_std, "Pixel noise std");
    s->add_option("--texture-seed", synth.cfg.texture_seed, "Seed of the per-landmark textures");

    TrainCmdFlags train;
    auto* t = app.add_subcommand("train", "Supervised cascade training on the train split");
    add_common(t, train.common);
    add_train(t, train.train);
    t->add_option("--manifest", train.manifest, "Dataset manifest")->required();
    t->add_option("--out", train.out, "Output directory")->required();

    ReinforceFlags rf;
    auto* r = app.add_subcommand("reinforce", "Self-reinforced training on train + unlabeled splits");
    add_common(r, rf.common);
    add_train(r, rf.train);
    r->add_option("--manifest", rf.manifest, "Dataset manifest")->required();
    r->add_option("--out", rf.out, "Output directory")->required();
    r->add_option("--lambda", rf.cfg.lambda, "Geometry weight in the survival score");
    r->add_option("--alpha0", rf.cfg.alpha0, "Initial survival threshold");
    r->add_option("--alpha-step", rf.cfg.alpha_step, "Threshold increase per iteration");
    r->add_option("--max-iters", rf.cfg.max_iterations, "Maximum iterations");
    r->add_option("--tol", rf.cfg.tolerance, "Stability tolerance on a and g");
    r->add_option("--patience", rf.cfg.patience, "Stable iterations required to stop");
    r->add_option("--epsilon", rf.cfg.epsilon, "Score floor before the logarithm");
    r->add_flag("--refit-manual", rf.cfg.refit_manual, "Also re-estimate manual labels");
    r->add_option("--sigma", rf.sigma, "Perturbation std in pixels (default 0.1 IPD)");
    r->add_option("--dt", rf.d_t, "Valid/invalid distance threshold in pixels (default 0.05 IPD)");
    r->add_option("--samples-per-landmark", rf.cfg.samples_per_landmark, "Perturbation draws per landmark");
    r->add_option("--rel-std", rf.cfg.discovery.rel_std_threshold, "Relative std threshold for combinations");
    r->add_option("--max-combinations", rf.cfg.discovery.max_combinations, "Combinations kept");

    EvalFlags ev;
    auto* e = app.add_subcommand("eval", "NME, CED and discrepancy correlation on a split");
    add_common(e, ev.common);
    e->add_option("--manifest", ev.manifest, "Dataset manifest")->required();
    e->add_option("--model", ev.model, "Model container")->required();
    e->add_option("--validators", ev.validators, "Validators container (enables correlation.csv)");
    e->add_option("--split", ev.split, "train, unlabeled or test")->check(CLI::IsMember({"train", "unlabeled", "test"}));
    e->add_option("--out", ev.out, "Output directory")->required();
    e->add_option("--lambda", ev.lambda, "Geometry weight in the combined score");
    e->add_option("--epsilon", ev.epsilon, "Score floor before the logarithm");

    EvalFlags pr;
    auto* p = app.add_subcommand("predict", "Write predicted .pts files for a split");
    add_common(p, pr.common);
    p->add_option("--manifest", pr.manifest, "Dataset manifest")->required();
    p->add_option("--model", pr.model, "Model container")->required();
    p->add_option("--split", pr.split, "train, unlabeled or test")->check(CLI::IsMember({"train", "unlabeled", "test"}));
    p->add_option("--out", pr.out, "Output directory")->required();

    ExportFlags ex;
    auto* x = app.add_subcommand("export", "Write a model container as structured text");
    x->add_option("--model", ex.model, "Model container")->required();
    x->add_option("--out", ex.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (s->parsed()) return cmd_synth(synth);
        if (t->parsed()) return cmd_train(train);
        if (r->parsed()) return cmd_reinforce(rf);
        if (e->parsed()) return cmd_eval(ev);
        if (p->parsed()) return cmd_predict(pr);
        if (x->parsed()) return cmd_export(ex);
    } catch (const UsageError& err) {
        std::cerr << "usage error: " << err.what() << "\n" << app.help();
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 2;
}
