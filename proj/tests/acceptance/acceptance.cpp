// One PASS/FAIL line per primary acceptance criterion.
//   acceptance [name-substring...]   runs the matching criteria only

#include "../support/oracles.hpp"
#include "../support/tempdir.hpp"
#include "respvad/cli.hpp"
#include "respvad/dataset.hpp"
#include "respvad/eval.hpp"
#include "respvad/models.hpp"
#include "respvad/rng.hpp"
#include "respvad/rp.hpp"
#include "respvad/synth.hpp"
#include "respvad/text.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

using namespace respvad;

namespace {

using Clock = std::chrono::steady_clock;
using Bits = std::vector<std::uint8_t>;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::mt19937_64 gen_for(std::uint64_t seed) { return std::mt19937_64(seed); }

// ------------------------------------------------------------ rp extraction

Outcome rp_oracle() {
    Outcome o{true, ""};
    double worst_r = 1.0, worst_t = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SynthVideoParams p;
        p.seed = seed;
        const auto video = synth_video(p);
        const auto t0 = Clock::now();
        RpOptions opts;
        opts.solver.seed = derive_seed(seed, "power-iteration");
        const auto rp = respiration_pattern(video.frames, opts);
        const double t = since(t0);
        const double r = std::abs(oracle::pearson(rp.samples, video.displacement));
        o.detail += fmt("seed %d |r|=%.4f %.1fs; ", static_cast<int>(seed), r, t);
        worst_r = std::min(worst_r, r);
        worst_t = std::max(worst_t, t);
        o.pass = o.pass && r >= 0.95 && t <= 30.0;
    }
    o.detail += fmt("min |r| %.4f, max extraction %.1fs", worst_r, worst_t);
    return o;
}

Outcome svd_oracle() {
    auto gen = gen_for(101);
    std::normal_distribution<double> n(0.0, 1.0);
    double worst_sigma = 0.0, worst_v = 0.0;
    for (int k = 0; k < 20; ++k) {
        Eigen::MatrixXd f(8, 6);
        for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = n(gen);
        PowerIterationOptions opts;
        opts.seed = static_cast<std::uint64_t>(k);
        const auto t = top_singular_triplet(f, opts);
        Eigen::VectorXd values;
        Eigen::MatrixXd vectors;
        oracle::jacobi_eigen(f.transpose() * f, values, vectors);
        const double sigma = std::sqrt(values(0));
        const Eigen::VectorXd v = vectors.col(0);
        worst_sigma = std::max(worst_sigma, std::abs(t.sigma - sigma) / sigma);
        worst_v = std::max(worst_v, std::min((t.v - v).cwiseAbs().maxCoeff(), (t.v + v).cwiseAbs().maxCoeff()));
    }
    return {worst_sigma <= 1e-6 && worst_v <= 1e-6,
            fmt("20 matrices 8x6: max sigma rel err %.2e, max v err %.2e", worst_sigma, worst_v)};
}

Outcome maximization() {
    auto gen = gen_for(202);
    std::normal_distribution<double> n(0.0, 1.0);
    int violations = 0;
    double min_margin = 1e300;
    for (int k = 0; k < 10; ++k) {
        Eigen::MatrixXd f(60, 25);
        for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = n(gen);
        PowerIterationOptions opts;
        opts.seed = static_cast<std::uint64_t>(k);
        const auto r = top_singular_triplet(f, opts).v;
        const double best = (f * r).squaredNorm();
        for (int j = 0; j < 100; ++j) {
            Eigen::VectorXd q(25);
            for (Eigen::Index i = 0; i < q.size(); ++i) q(i) = n(gen);
            q.normalize();
            const double val = (f * q).squaredNorm();
            violations += val > best;
            min_margin = std::min(min_margin, (best - val) / best);
        }
    }
    return {violations == 0, fmt("10 F (60x25) x 100 unit q: %d violations, min relative margin %.3f", violations,
                                 min_margin)};
}

// ------------------------------------------------------------ gradients

Outcome gradient_checks() {
    std::map<std::string, double> worst;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto layer_check = [&](const std::string& name, nn::Layer& layer, const nn::SeqBatch& x) {
            oracle::randomize(layer.params(), seed * 7 + 1);
            const auto r = oracle::check_layer(layer, x, seed * 7 + 2);
            worst[name] = std::max(worst[name], r.max_rel);
        };
        nn::Dense dense("d", 6, 4);
        layer_check("dense", dense, oracle::random_batch(3, 2, 6, seed));
        nn::Conv1D conv("c", 2, 3, 3, 2);
        layer_check("conv1d(d=2)", conv, oracle::random_batch(11, 2, 2, seed));
        nn::Conv1D conv3("c3", 1, 4, 5, 3);
        layer_check("conv1d(d=3)", conv3, oracle::random_batch(16, 2, 1, seed + 100));
        nn::Lstm lstm("l", 3, 4);
        layer_check("lstm", lstm, oracle::random_batch(6, 2, 3, seed));
        nn::Bidirectional bi("b", 3, 3);
        layer_check("bidirectional", bi, oracle::random_batch(5, 2, 3, seed));

        auto gen = gen_for(seed);
        std::uniform_real_distribution<double> u(0.05, 0.95);
        std::vector<double> p(30);
        Bits y(30), mask(30);
        for (std::size_t i = 0; i < p.size(); ++i) {
            p[i] = u(gen);
            y[i] = gen() & 1u;
            mask[i] = gen() % 4 != 0;
        }
        const double wp = 0.5 + u(gen), wn = 0.5 + u(gen);
        const auto r = nn::weighted_bce(p, y, wp, wn, mask);
        for (std::size_t i = 0; i < p.size(); ++i) {
            auto pp = p, pm = p;
            pp[i] += 1e-6;
            pm[i] -= 1e-6;
            const double num =
                (nn::weighted_bce(pp, y, wp, wn, mask).loss - nn::weighted_bce(pm, y, wp, wn, mask).loss) / 2e-6;
            worst["weighted_bce"] = std::max(worst["weighted_bce"], oracle::rel_err(r.grad[i], num));
        }
    }
    bool pass = true;
    std::string detail = "10 seeds, max rel err:";
    for (const auto& [k, v] : worst) {
        detail += fmt(" %s %.1e", k.c_str(), v);
        pass = pass && v <= 1e-5;
    }
    return {pass, detail};
}

// ------------------------------------------------------------ chunking

Outcome chunking() {
    std::vector<double> x(10);
    for (std::size_t i = 0; i < 10; ++i) x[i] = static_cast<double>(i + 1);
    const auto non = chunk_signal(x, 4, ChunkMode::non_overlap);
    const auto ov = chunk_signal(x, 4, ChunkMode::overlap);
    bool layout = non.size() == 3 && non.pad_count == 2 && ov.size() == 7;
    layout = layout && non.chunks[2].input == std::vector<double>{9, 10, 0, 0} && non.chunks[2].valid == 2;
    for (std::size_t k = 0; layout && k < 7; ++k) {
        layout = ov.chunks[k].input == std::vector<double>(x.begin() + k, x.begin() + k + 4);
    }

    auto gen = gen_for(303);
    std::normal_distribution<double> n(0.0, 1.0);
    bool roundtrip = true;
    double worst = 0.0;
    for (int c = 0; c < 50; ++c) {
        const std::size_t w = 2 + gen() % 12;
        const std::size_t len = w + gen() % 40;
        std::vector<double> sig(len);
        for (auto& v : sig) v = n(gen);
        for (auto mode : {ChunkMode::overlap, ChunkMode::non_overlap}) {
            const auto set = chunk_signal(sig, w, mode);
            std::vector<std::vector<double>> values;
            for (const auto& ch : set.chunks) values.push_back(ch.input);
            roundtrip = roundtrip && reassemble(set, values, len) == sig;
        }
        const auto set = chunk_signal(sig, w, ChunkMode::overlap);
        std::vector<std::vector<double>> values(set.size(), std::vector<double>(w));
        for (auto& row : values)
            for (auto& v : row) v = n(gen);
        const auto got = reassemble(set, values, len);
        const auto want = oracle::coverage_mean(values, len, w);
        for (std::size_t i = 0; i < len; ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
    }
    return {layout && roundtrip && worst <= 1e-12,
            fmt("N=10/w=4 layout %s; round trips %s; overlap mean max err %.1e over 50 cases",
                layout ? "exact" : "WRONG", roundtrip ? "exact" : "INEXACT", worst)};
}

// ------------------------------------------------------------ metrics

Outcome metric_fidelity() {
    auto gen = gen_for(404);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_auc = 0.0;
    int mismatches = 0;
    for (int c = 0; c < 20; ++c) {
        std::vector<double> s(500);
        Bits y(500);
        for (std::size_t i = 0; i < s.size(); ++i) {
            y[i] = u(gen) < 0.3;
            s[i] = std::round((u(gen) + 0.4 * y[i]) * 50.0) / 50.0;
        }
        worst_auc = std::max(worst_auc, std::abs(auroc(s, y) - oracle::mann_whitney_auc(s, y)));

        const double threshold = 0.3 + 0.4 * u(gen);
        double tp = 0, fp = 0, tn = 0, fn = 0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            const bool p = s[i] >= threshold;
            (p ? (y[i] ? tp : fp) : (y[i] ? fn : tn)) += 1.0;
        }
        const auto m = metrics(s, y, threshold);
        const double prec = tp / (tp + fp), rec = tp / (tp + fn);
        mismatches += *m.accuracy != (tp + tn) / (tp + tn + fp + fn);
        mismatches += *m.precision != prec;
        mismatches += *m.recall != rec;
        mismatches += *m.f1 != 2.0 * prec * rec / (prec + rec);
        mismatches += std::abs(*m.auroc - oracle::mann_whitney_auc(s, y)) > 1e-12;
    }
    return {worst_auc <= 1e-12 && mismatches == 0,
            fmt("auroc vs Mann-Whitney max err %.1e on 20x500; %d metric mismatches", worst_auc, mismatches)};
}

// ------------------------------------------------------------ learning

struct LearnSettings {
    std::size_t w = 100;
    int epochs = 8;
    std::size_t chunks_per_epoch = 256;
    int batch_size = 32;
    double lr = 1e-3;
    std::size_t predict_batch = 64;
};

struct RunResult {
    double auroc = 0.0;
    double seconds = 0.0;
};

RunResult learn(std::uint64_t seed, Arch arch, ChunkMode mode, double distortion, const LearnSettings& ls) {
    SynthRPParams p;
    p.seed = seed;
    p.distortion = distortion;
    const auto data = synth_rp_dataset(p);
    const auto split = split_speakers(data, 4, derive_seed(seed, "splits"))[0];
    const auto train_set = select_speakers(data, split.train);
    const auto test_set = select_speakers(data, split.test);

    const auto t0 = Clock::now();
    auto model = Model::build({arch, ls.w}, derive_seed(seed, "model"));
    TrainConfig cfg;
    cfg.epochs = ls.epochs;
    cfg.batch_size = ls.batch_size;
    cfg.lr = ls.lr;
    cfg.seed = derive_seed(seed, "train");
    cfg.weights = class_weights(train_set);
    cfg.mode = mode;
    cfg.chunks_per_epoch = ls.chunks_per_epoch;
    train(model, chunk_all(train_set, ls.w, mode), cfg);

    std::vector<double> probs;
    Bits labels;
    for (const auto& seq : test_set) {
        const auto pr = predict_sequence(model, seq.rp.samples, mode, ls.predict_batch);
        probs.insert(probs.end(), pr.begin(), pr.end());
        labels.insert(labels.end(), seq.labels.begin(), seq.labels.end());
    }
    return {auroc(probs, labels), since(t0)};
}

const LearnSettings kLearn;
std::map<std::pair<int, int>, std::vector<double>> g_table; // (arch, mode) -> auroc per seed

std::vector<double>& table(Arch a, ChunkMode m) { return g_table[{static_cast<int>(a), static_cast<int>(m)}]; }

Outcome end_to_end() {
    const auto t0 = Clock::now();
    int good = 0;
    std::string detail;
    auto& col = table(Arch::convlstm, ChunkMode::overlap);
    col.clear();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto r = learn(seed, Arch::convlstm, ChunkMode::overlap, 1.0, kLearn);
        col.push_back(r.auroc);
        good += r.auroc >= 0.9;
        detail += fmt("seed %d auroc %.4f (%.0fs); ", static_cast<int>(seed), r.auroc, r.seconds);
    }
    const auto null = learn(1, Arch::convlstm, ChunkMode::overlap, 0.0, kLearn);
    const double total = since(t0);
    detail += fmt("%d/5 >= 0.90; null control auroc %.4f; total %.0fs", good, null.auroc, total);
    return {good >= 4 && std::abs(null.auroc - 0.5) <= 0.1 && total <= 900.0, detail};
}

Outcome table_trend() {
    const Arch archs[] = {Arch::mlp, Arch::cnn1d, Arch::bilstm, Arch::convlstm};
    for (Arch a : archs) {
        for (auto m : {ChunkMode::overlap, ChunkMode::non_overlap}) {
            auto& col = table(a, m);
            if (col.size() == 5) {
                continue;
            }
            col.clear();
            for (std::uint64_t seed = 1; seed <= 5; ++seed) {
                col.push_back(learn(seed, a, m, 1.0, kLearn).auroc);
            }
        }
    }
    auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
    auto failures = [](const std::vector<double>& hi, const std::vector<double>& lo) {
        int f = 0;
        for (std::size_t i = 0; i < hi.size(); ++i) f += hi[i] < lo[i];
        return f;
    };
    bool pass = true;
    std::string detail = "mean auroc O/NO:";
    for (Arch a : archs) {
        const auto& o = table(a, ChunkMode::overlap);
        const auto& no = table(a, ChunkMode::non_overlap);
        const int f = failures(o, no);
        pass = pass && f <= 1;
        detail += fmt(" %s %.4f/%.4f (O<NO in %d);", to_string(a), mean(o), mean(no), f);
    }
    const int f = failures(table(Arch::convlstm, ChunkMode::overlap), table(Arch::mlp, ChunkMode::overlap));
    pass = pass && f <= 1;
    detail += fmt(" convlstm(O) < mlp(O) in %d of 5", f);
    return {pass, detail};
}

// ------------------------------------------------------------ transitions

Outcome transitions() {
    const double fps = 30.0;
    auto gen = gen_for(505);
    Bits gt(3000, 0);
    std::size_t i = 100;
    while (i + 400 < gt.size()) {
        const std::size_t len = 60 + gen() % 200;
        for (std::size_t k = i; k < i + len; ++k) gt[k] = 1;
        i += len + 80 + gen() % 100;
    }
    Bits pred(gt.size(), 0);
    for (std::size_t k = 9; k < gt.size(); ++k) pred[k] = gt[k - 9];
    const auto e = transition_errors(pred, gt, fps);
    const double on = *e.mean_onset_error_s(), off = *e.mean_offset_error_s();
    return {on == 0.3 && off == 0.3 && e.onset_misses == 0 && e.offset_misses == 0,
            fmt("%zu onsets mean %.17g s, %zu offsets mean %.17g s", e.onset_errors.size(), on,
                e.offset_errors.size(), off)};
}

// ------------------------------------------------------------ determinism

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "respvad");
    std::ostringstream sink;
    auto* old = std::cout.rdbuf(sink.rdbuf());
    const int code = cli_main(args);
    std::cout.rdbuf(old);
    return code;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        return "<missing " + p.string() + ">";
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
    TempDir dir;
    auto pipeline = [&](const std::string& tag) {
        const auto root = dir / tag;
        const auto s = [&](const char* sub) { return (root / sub).string(); };
        int code = cli({"synth-rp", "--out", s("s"), "--rp.n_speakers", "8", "--seed", "17"});
        code |= cli({"make-dataset", "--dataset", s("s/dataset.csv"), "--seed", "17", "--out", s("d")});
        code |= cli({"train", "--dataset", s("d/dataset.csv"), "--splits", s("d/splits.txt"), "--fold", "0", "--arch",
                     "convlstm", "--epochs", "2", "--chunks_per_epoch", "64", "--seed", "17", "--out", s("t")});
        code |= cli({"predict", "--model", s("t/model.ckpt"), "--dataset", s("d/dataset.csv"), "--splits",
                     s("d/splits.txt"), "--fold", "0", "--out", s("p")});
        code |= cli({"eval", "--predictions", s("p/predictions.csv"), "--dataset", s("d/dataset.csv"), "--out",
                     s("e")});
        return code;
    };
    const int c1 = pipeline("a"), c2 = pipeline("b");
    int same = 0;
    const char* files[] = {"t/model.ckpt", "t/history.csv", "p/predictions.csv", "e/report.txt", "e/roc.csv"};
    for (const char* f : files) {
        same += slurp(dir / "a" / f) == slurp(dir / "b" / f);
    }
    return {c1 == 0 && c2 == 0 && same == 5,
            fmt("two CLI runs (seed 17): %d/5 artifacts byte-identical (checkpoint, history, predictions, "
                "report, roc)",
                same)};
}

struct Criterion {
    const char* name;
    std::function<Outcome()> run;
};

} // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all = {
        {"rp-extraction-oracle", rp_oracle},
        {"svd-oracle", svd_oracle},
        {"rayleigh-maximization", maximization},
        {"gradient-checks", gradient_checks},
        {"chunking-fidelity", chunking},
        {"metric-fidelity", metric_fidelity},
        {"end-to-end-learning", end_to_end},
        {"architecture-trend", table_trend},
        {"transition-errors", transitions},
        {"determinism", determinism},
    };
    std::vector<std::string> filters(argv + 1, argv + argc);
    int failed = 0;
    for (const auto& c : all) {
        bool selected = filters.empty();
        for (const auto& f : filters) selected = selected || std::string(c.name).find(f) != std::string::npos;
        if (!selected) {
            continue;
        }
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s %-22s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), since(t0));
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
