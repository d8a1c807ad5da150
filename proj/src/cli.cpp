#include "respvad/cli.hpp"

#include "respvad/config.hpp"
#include "respvad/error.hpp"
#include "respvad/eval.hpp"
#include "respvad/rng.hpp"
#include "respvad/text.hpp"
#include "respvad/video_io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

namespace fs = std::filesystem;

namespace respvad {

namespace {

class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}

    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

template <class F>
auto stage(const std::string& name, F&& f) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

// Config file first, then explicit flags on top.
struct Options {
    std::string config_path;
    std::map<std::string, std::string> flags;

    void attach(CLI::App* app, const std::vector<std::string>& keys) {
        app->add_option("--config", config_path, "key = value config file (flags override it)");
        const RunConfig defaults;
        for (const auto& key : keys) {
            app->add_option_function<std::string>(
                   "--" + key, [this, key](const std::string& v) { flags[key] = v; },
                   RunConfig::describe(key) + " [" + defaults.get(key) + "]")
                ->type_name("VALUE");
        }
    }

    RunConfig resolve() const {
        return stage("config", [&] {
            RunConfig cfg;
            if (!config_path.empty()) {
                cfg.load(config_path);
            }
            for (const auto& [k, v] : flags) {
                cfg.set(k, v);
            }
            cfg.validate();
            return cfg;
        });
    }
};

std::vector<std::string> keys_with_prefix(const std::string& prefix) {
    std::vector<std::string> out;
    for (const auto& k : RunConfig::keys()) {
        if (k.starts_with(prefix)) {
            out.push_back(k);
        }
    }
    return out;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

const std::vector<std::string> kRpKeys = {"seed", "eps", "tol", "max_iter", "integrate", "filter", "low_bpm", "high_bpm"};
const std::vector<std::string> kDatasetKeys = {"seed", "w", "mode", "n_splits"};
const std::vector<std::string> kTrainKeys = {"seed",       "w",     "mode", "arch",  "epochs",
                                             "batch_size", "lr",    "chunks_per_epoch", "w_pos", "w_neg"};
const std::vector<std::string> kPredictKeys = {"seed", "mode"};
const std::vector<std::string> kEvalKeys = {"threshold", "match_window_s"};

void write_record(const RunConfig& cfg, const fs::path& dir, const std::map<std::string, std::uint64_t>& seeds) {
    cfg.save(dir / "run_config.txt");
    std::ofstream out(dir / "run_config.txt", std::ios::app);
    for (const auto& [name, value] : seeds) {
        out << "# derived seed " << name << " = " << value << "\n";
    }
}

void make_dir(const fs::path& dir) {
    stage("output", [&] {
        fs::create_directories(dir);
        return 0;
    });
}

// `<csv>.meta` holds the sample rate (and tags for predictions).
std::map<std::string, std::string> read_meta(const fs::path& csv) {
    std::map<std::string, std::string> meta;
    std::ifstream in(csv.string() + ".meta");
    std::string line;
    while (std::getline(in, line)) {
        if (auto kv = parse_key_value(line)) {
            meta[kv->first] = kv->second;
        }
    }
    return meta;
}

void write_meta(const fs::path& csv, const std::map<std::string, std::string>& meta) {
    std::ofstream out(csv.string() + ".meta");
    for (const auto& [k, v] : meta) {
        out << k << " = " << v << "\n";
    }
}

std::vector<LabeledSequence> load_dataset(const fs::path& csv, double fallback_fps) {
    return stage("load_dataset", [&] {
        const auto meta = read_meta(csv);
        const double fps = meta.count("fps") ? parse_double(meta.at("fps"), csv.string() + ".meta") : fallback_fps;
        return read_dataset_csv(csv, fps);
    });
}

void save_dataset(const std::vector<LabeledSequence>& data, const fs::path& csv) {
    write_dataset_csv(data, csv);
    const double fps = data.empty() ? 0.0 : data.front().rp.fps;
    write_meta(csv, {{"fps", format_real(fps)}});
}

std::vector<std::string> speaker_ids(const std::vector<LabeledSequence>& data) {
    std::vector<std::string> ids;
    for (const auto& s : data) {
        ids.push_back(s.speaker_id);
    }
    return ids;
}

// Fold selection shared by train and predict.
struct FoldArgs {
    std::string splits;
    int fold = -1;

    void attach(CLI::App* app) {
        app->add_option("--splits", splits, "splits file from make-dataset");
        app->add_option("--fold", fold, "fold index within --splits");
    }

    std::vector<LabeledSequence> pick(const std::vector<LabeledSequence>& data, bool train_side) const {
        if (splits.empty() && fold < 0) {
            return data;
        }
        return stage("splits", [&] {
            if (splits.empty() || fold < 0) {
                throw Error("--splits and --fold go together");
            }
            const auto all = read_splits(splits, speaker_ids(data));
            if (fold >= static_cast<int>(all.size())) {
                throw Error("fold " + std::to_string(fold) + " out of range (" + std::to_string(all.size()) +
                            " folds)");
            }
            const auto& s = all[static_cast<std::size_t>(fold)];
            return select_speakers(data, train_side ? s.train : s.test);
        });
    }

    std::string name() const { return fold < 0 ? "all" : std::to_string(fold); }
};

struct Predictions {
    std::vector<std::string> speakers;
    std::map<std::string, std::vector<double>> probs;
};

void write_predictions(const Predictions& p, const fs::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << "speaker_id,index,prob\n";
    for (const auto& id : p.speakers) {
        const auto& v = p.probs.at(id);
        for (std::size_t i = 0; i < v.size(); ++i) {
            out << id << "," << i << "," << format_real(v[i]) << "\n";
        }
    }
}

Predictions read_predictions(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || trim(line) != "speaker_id,index,prob") {
        throw Error(path.string() + ": expected header speaker_id,index,prob");
    }
    Predictions p;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) {
            continue;
        }
        const std::string where = path.string() + ":" + std::to_string(lineno);
        const auto cols = split(line, ',');
        if (cols.size() != 3) {
            throw Error(where + ": expected 3 columns");
        }
        auto& v = p.probs[cols[0]];
        if (v.empty()) {
            p.speakers.push_back(cols[0]);
        }
        if (parse_int64(cols[1], where) != static_cast<long long>(v.size())) {
            throw Error(where + ": indices must be consecutive from 0 per speaker");
        }
        v.push_back(parse_double(cols[2], where));
    }
    return p;
}

// ------------------------------------------------------------ subcommands

int run_synth_video(const Options& o, const fs::path& out) {
    RunConfig cfg = o.resolve();
    make_dir(out);
    SynthVideoParams p = cfg.video;
    p.seed = derive_seed(cfg.seed, "synth-video");
    const SynthVideo video = stage("synth_video", [&] { return synth_video(p); });
    stage("write_frames", [&] {
        write_frames(video.frames, out);
        RespirationPattern d{video.displacement, p.fps, false};
        write_rp_csv(d, out / "displacement.csv");
        return 0;
    });
    write_record(cfg, out, {{"synth-video", p.seed}});
    std::cout << "wrote " << video.frames.size() << " frames to " << out.string() << "\n";
    return 0;
}

int run_synth_rp(const Options& o, const fs::path& out) {
    RunConfig cfg = o.resolve();
    make_dir(out);
    SynthRPParams p = cfg.rp;
    p.seed = derive_seed(cfg.seed, "synth-rp");
    const auto data = stage("synth_rp_dataset", [&] { return synth_rp_dataset(p); });
    stage("write_dataset", [&] {
        save_dataset(data, out / "dataset.csv");
        return 0;
    });
    write_record(cfg, out, {{"synth-rp", p.seed}});
    std::cout << "wrote " << data.size() << " speakers to " << (out / "dataset.csv").string() << "\n";
    return 0;
}

int run_extract_rp(const Options& o, const fs::path& manifest_path, const fs::path& out) {
    RunConfig cfg = o.resolve();
    make_dir(out);
    const Manifest manifest = stage("read_manifest", [&] { return read_manifest(manifest_path); });
    const FrameSequence seq = stage("load_frames", [&] { return load_frames(manifest); });
    const RpOptions opts = cfg.rp_options();
    SingularTriplet diag;
    const RespirationPattern rp = stage("extract_rp", [&] { return respiration_pattern(seq, opts, &diag); });
    stage("write_rp", [&] {
        write_rp_csv(rp, out / "rp.csv");
        std::ofstream d(out / "diagnostics.txt");
        d << "sigma = " << format_real(diag.sigma) << "\n"
          << "iterations = " << diag.iterations << "\n"
          << "residual = " << format_real(diag.residual) << "\n"
          << "gap_ratio = " << format_real(diag.gap_ratio) << "\n";
        return 0;
    });
    write_record(cfg, out, {{"power-iteration", opts.solver.seed}});
    std::cout << "wrote " << rp.size() << " samples to " << (out / "rp.csv").string() << "\n";
    return 0;
}

int run_make_dataset(const Options& o, const std::string& dataset, const std::vector<std::string>& rps,
                     const std::vector<std::string>& manifests, std::vector<std::string> speakers,
                     const fs::path& out) {
    RunConfig cfg = o.resolve();
    make_dir(out);
    std::vector<LabeledSequence> data;
    if (!dataset.empty()) {
        data = load_dataset(dataset, cfg.rp.fps);
    }
    data = stage("label_rp", [&] {
        if (rps.size() != manifests.size()) {
            throw Error("every --rp needs a matching --manifest with speech intervals");
        }
        if (!speakers.empty() && speakers.size() != rps.size()) {
            throw Error("--speaker must be given once per --rp or not at all");
        }
        for (std::size_t i = 0; i < rps.size(); ++i) {
            LabeledSequence s;
            s.speaker_id = speakers.empty() ? fs::path(rps[i]).parent_path().filename().string() : speakers[i];
            if (s.speaker_id.empty()) {
                s.speaker_id = "speaker" + std::to_string(i + 1);
            }
            s.rp = read_rp_csv(rps[i]);
            const Manifest m = read_manifest(manifests[i]);
            validate_intervals(m.speech_intervals, static_cast<double>(s.rp.size()) / s.rp.fps);
            s.labels = label_from_intervals(m.speech_intervals, s.rp.size(), s.rp.fps);
            s.validate();
            data.push_back(std::move(s));
        }
        if (data.empty()) {
            throw Error("no input: give --dataset or --rp/--manifest pairs");
        }
        return data;
    });
    stage("chunk", [&] {
        save_dataset(data, out / "dataset.csv");
        std::ofstream chunks(out / "chunks.csv");
        chunks << "speaker_id,chunk,offset,position,input,label,valid\n";
        for (const auto& s : data) {
            write_chunks_csv(s.speaker_id, chunk(s, cfg.w, cfg.mode), chunks);
        }
        return 0;
    });
    const std::uint64_t split_seed = derive_seed(cfg.seed, "splits");
    stage("split_speakers", [&] {
        if (data.size() >= static_cast<std::size_t>(cfg.n_splits)) {
            write_splits(split_speakers(data, cfg.n_splits, split_seed), out / "splits.txt");
        } else {
            std::cerr << "make-dataset: " << data.size() << " speaker(s) < n_splits, no splits written\n";
        }
        return 0;
    });
    write_record(cfg, out, {{"splits", split_seed}});
    std::cout << "wrote " << data.size() << " speakers to " << out.string() << "\n";
    return 0;
}

int run_train(const Options& o, const std::string& dataset, const FoldArgs& fold, const fs::path& out) {
    RunConfig cfg = o.resolve();
    make_dir(out);
    const auto train_set = fold.pick(load_dataset(dataset, cfg.rp.fps), true);
    TrainConfig tc = cfg.train_config();
    if (cfg.w_pos == 0.0) {
        tc.weights = stage("class_weights", [&] { return class_weights(train_set); });
    }
    const std::uint64_t model_seed = derive_seed(cfg.seed, "model");
    Model model = stage("build_model", [&] { return Model::build({cfg.arch, cfg.w}, model_seed); });
    const auto chunks = stage("chunk", [&] { return chunk_all(train_set, cfg.w, cfg.mode); });
    const auto history = stage("train", [&] { return train(model, chunks, tc); });
    stage("save", [&] {
        model.save(out / "model.ckpt");
        std::ofstream h(out / "history.csv");
        h << "epoch,loss\n";
        for (std::size_t e = 0; e < history.size(); ++e) {
            h << e + 1 << "," << format_real(history[e]) << "\n";
        }
        std::ofstream wts(out / "class_weights.txt");
        wts << "w_pos = " << format_real(tc.weights.positive) << "\nw_neg = " << format_real(tc.weights.negative)
            << "\n";
        return 0;
    });
    write_record(cfg, out, {{"model", model_seed}, {"train", tc.seed}});
    std::cout << "trained " << to_string(cfg.arch) << " (" << to_string(cfg.mode) << ") on " << train_set.size()
              << " speakers, final loss " << format_sig9(history.back()) << "\n";
    return 0;
}

int run_predict(const Options& o, const fs::path& model_path, const std::string& rp_path, const std::string& dataset,
                const FoldArgs& fold, const fs::path& out) {
    RunConfig cfg = o.resolve();
    make_dir(out);
    Model model = stage("load_model", [&] { return Model::load(model_path); });
    Predictions p;
    double fps = 0.0;
    stage("predict", [&] {
        if (rp_path.empty() == dataset.empty()) {
            throw Error("give exactly one of --rp or --dataset");
        }
        if (!rp_path.empty()) {
            const RespirationPattern rp = read_rp_csv(rp_path);
            fps = rp.fps;
            p.speakers.push_back("rp");
            p.probs["rp"] = predict_sequence(model, rp.samples, cfg.mode);
        } else {
            for (const auto& s : fold.pick(load_dataset(dataset, cfg.rp.fps), false)) {
                fps = s.rp.fps;
                p.speakers.push_back(s.speaker_id);
                p.probs[s.speaker_id] = predict_sequence(model, s.rp.samples, cfg.mode);
            }
        }
        write_predictions(p, out / "predictions.csv");
        write_meta(out / "predictions.csv", {{"fps", format_real(fps)},
                                             {"model", to_string(model.spec().arch)},
                                             {"mode", to_string(cfg.mode)},
                                             {"seed", std::to_string(cfg.seed)},
                                             {"split", fold.name()}});
        return 0;
    });
    write_record(cfg, out, {});
    std::cout << "wrote predictions for " << p.speakers.size() << " sequence(s) to "
              << (out / "predictions.csv").string() << "\n";
    return 0;
}

int run_eval(const Options& o, const fs::path& pred_path, const std::string& dataset, const std::string& manifest,
             const std::vector<std::string>& tags, const fs::path& out) {
    RunConfig cfg = o.resolve();
    make_dir(out);
    const Predictions p = stage("read_predictions", [&] { return read_predictions(pred_path); });
    auto meta = read_meta(pred_path);
    std::map<std::string, Labels> labels;
    double fps = meta.count("fps") ? parse_double(meta.at("fps"), "predictions meta") : 0.0;
    stage("labels", [&] {
        if (dataset.empty() == manifest.empty()) {
            throw Error("give exactly one of --dataset or --manifest");
        }
        if (!dataset.empty()) {
            for (auto& s : load_dataset(dataset, fps > 0.0 ? fps : cfg.rp.fps)) {
                fps = s.rp.fps;
                labels[s.speaker_id] = std::move(s.labels);
            }
        } else {
            const Manifest m = read_manifest(manifest);
            if (!(fps > 0.0)) {
                fps = m.fps;
            }
            for (const auto& id : p.speakers) {
                labels[id] = label_from_intervals(m.speech_intervals, p.probs.at(id).size(), fps);
            }
        }
        return 0;
    });
    RunReport report;
    std::vector<double> all_probs;
    Labels all_labels;
    report.transitions.fps = fps;
    stage("evaluate", [&] {
        for (const auto& id : p.speakers) {
            if (!labels.count(id)) {
                throw Error("no labels for speaker " + id);
            }
            const auto& pr = p.probs.at(id);
            const auto& y = labels.at(id);
            if (pr.size() != y.size()) {
                throw Error("speaker " + id + ": " + std::to_string(pr.size()) + " predictions vs " +
                            std::to_string(y.size()) + " labels");
            }
            all_probs.insert(all_probs.end(), pr.begin(), pr.end());
            all_labels.insert(all_labels.end(), y.begin(), y.end());
            report.transitions.append(transition_errors(binarize(pr, cfg.threshold), y, fps, cfg.match_window_s));
        }
        report.metrics = metrics(all_probs, all_labels, cfg.threshold);
        return 0;
    });
    meta.erase("fps");
    report.tags = meta;
    report.tags["samples"] = std::to_string(all_probs.size());
    report.tags["fps"] = format_real(fps);
    report.tags["threshold"] = format_real(cfg.threshold);
    stage("tags", [&] {
        for (const auto& t : tags) {
            const auto eq = t.find('=');
            if (eq == std::string::npos) {
                throw Error("--tag expects key=value, got '" + t + "'");
            }
            report.tags[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
        }
        return 0;
    });
    stage("write_report", [&] {
        write_run_report(report, out / "report.txt");
        if (report.metrics.auroc) {
            export_curves(all_probs, all_labels, out);
        }
        write_transition_histogram(report.transitions, out / "transitions.csv", cfg.match_window_s);
        return 0;
    });
    write_record(cfg, out, {});
    std::cout << "auroc = " << (report.metrics.auroc ? format_sig9(*report.metrics.auroc) : "undefined") << "\n";
    return 0;
}

int run_report(const std::vector<std::string>& runs, const fs::path& out) {
    const auto parsed = stage("read_reports", [&] {
        std::vector<ParsedReport> r;
        for (const auto& path : runs) {
            r.push_back(read_run_report(path));
        }
        return r;
    });
    stage("summary", [&] {
        if (out.has_parent_path()) {
            fs::create_directories(out.parent_path());
        }
        write_summary(parsed, out);
        return 0;
    });
    std::cout << "summarized " << parsed.size() << " run(s) into " << out.string() << "\n";
    return 0;
}

} // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"respvad: respiration-pattern voice activity detection"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "respvad 0.1.0");

    Options o_video, o_rp, o_extract, o_dataset, o_train, o_predict, o_eval;
    std::string out, manifest, dataset, rp, model, predictions;
    std::vector<std::string> rps, manifests, speakers, tags, runs;
    FoldArgs fold_train, fold_predict;

    auto* sv = app.add_subcommand("synth-video", "synthetic frames with known displacement");
    o_video.attach(sv, concat({"seed"}, keys_with_prefix("video.")));
    sv->add_option("--out", out, "output directory")->required();

    auto* sr = app.add_subcommand("synth-rp", "synthetic labeled respiration dataset");
    o_rp.attach(sr, concat({"seed"}, keys_with_prefix("rp.")));
    sr->add_option("--out", out, "output directory")->required();

    auto* ex = app.add_subcommand("extract-rp", "manifest -> respiration pattern CSV");
    o_extract.attach(ex, kRpKeys);
    ex->add_option("--manifest", manifest, "frame manifest")->required()->check(CLI::ExistingFile);
    ex->add_option("--out", out, "output directory")->required();

    auto* md = app.add_subcommand("make-dataset", "respiration patterns + labels -> dataset, chunks, splits");
    o_dataset.attach(md, concat(kDatasetKeys, {"rp.fps"}));
    md->add_option("--dataset", dataset, "existing dataset CSV")->check(CLI::ExistingFile);
    md->add_option("--rp", rps, "RP CSV (repeatable)")->check(CLI::ExistingFile);
    md->add_option("--manifest", manifests, "manifest with speech intervals, one per --rp")->check(CLI::ExistingFile);
    md->add_option("--speaker", speakers, "speaker id, one per --rp");
    md->add_option("--out", out, "output directory")->required();

    auto* tr = app.add_subcommand("train", "dataset + arch -> checkpoint + loss history");
    o_train.attach(tr, concat(kTrainKeys, {"rp.fps"}));
    tr->add_option("--dataset", dataset, "dataset CSV")->required()->check(CLI::ExistingFile);
    fold_train.attach(tr);
    tr->add_option("--out", out, "output directory")->required();

    auto* pr = app.add_subcommand("predict", "checkpoint + RP -> per-sample probabilities");
    o_predict.attach(pr, concat(kPredictKeys, {"rp.fps"}));
    pr->add_option("--model", model, "checkpoint")->required()->check(CLI::ExistingFile);
    pr->add_option("--rp", rp, "single RP CSV")->check(CLI::ExistingFile);
    pr->add_option("--dataset", dataset, "dataset CSV (test speakers with --splits/--fold)")
        ->check(CLI::ExistingFile);
    fold_predict.attach(pr);
    pr->add_option("--out", out, "output directory")->required();

    auto* ev = app.add_subcommand("eval", "predictions + labels -> report, curves, transition histogram");
    o_eval.attach(ev, concat(kEvalKeys, {"rp.fps"}));
    ev->add_option("--predictions", predictions, "predictions CSV")->required()->check(CLI::ExistingFile);
    ev->add_option("--dataset", dataset, "dataset CSV with labels")->check(CLI::ExistingFile);
    ev->add_option("--manifest", manifest, "manifest with speech intervals")->check(CLI::ExistingFile);
    ev->add_option("--tag", tags, "extra report tag key=value (repeatable)");
    ev->add_option("--out", out, "output directory")->required();

    auto* rep = app.add_subcommand("report", "aggregate run reports: mean +- std per (model, split, mode)");
    rep->add_option("--runs", runs, "report files")->required()->check(CLI::ExistingFile);
    rep->add_option("--out", out, "summary file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        if (name == "synth-video") {
            return run_synth_video(o_video, out);
        }
        if (name == "synth-rp") {
            return run_synth_rp(o_rp, out);
        }
        if (name == "extract-rp") {
            return run_extract_rp(o_extract, manifest, out);
        }
        if (name == "make-dataset") {
            return run_make_dataset(o_dataset, dataset, rps, manifests, speakers, out);
        }
        if (name == "train") {
            return run_train(o_train, dataset, fold_train, out);
        }
        if (name == "predict") {
            return run_predict(o_predict, model, rp, dataset, fold_predict, out);
        }
        if (name == "eval") {
            return run_eval(o_eval, predictions, dataset, manifest, tags, out);
        }
        return run_report(runs, out);
    } catch (const std::exception& e) {
        std::cerr << "respvad " << name << ": " << e.what() << "\n";
        return 1;
    }
}

int cli_main(const std::vector<std::string>& args) {
    std::vector<std::string> copy = args;
    std::vector<char*> argv;
    for (auto& a : copy) {
        argv.push_back(a.data());
    }
    argv.push_back(nullptr);
    return cli_main(static_cast<int>(copy.size()), argv.data());
}

} // namespace respvad
