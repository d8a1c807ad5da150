#include "respvad/eval.hpp"

#include "respvad/error.hpp"
#include "respvad/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <tuple>

namespace respvad {

Confusion confusion_counts(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> labels) {
    if (pred.size() != labels.size()) {
        throw Error("confusion_counts: length mismatch");
    }
    Confusion c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (labels[i]) {
            (pred[i] ? c.tp : c.fn)++;
        } else {
            (pred[i] ? c.fp : c.tn)++;
        }
    }
    return c;
}

std::vector<std::uint8_t> binarize(std::span<const double> probs, double threshold) {
    std::vector<std::uint8_t> out(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        out[i] = probs[i] >= threshold ? 1 : 0;
    }
    return out;
}

Metrics metrics(std::span<const double> probs, std::span<const std::uint8_t> labels, double threshold) {
    if (probs.size() != labels.size()) {
        throw Error("metrics: length mismatch");
    }
    Metrics m;
    m.counts = confusion_counts(binarize(probs, threshold), labels);
    const Confusion& c = m.counts;
    if (c.total() > 0) {
        m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    }
    if (c.tp + c.fp > 0) {
        m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    }
    if (c.tp + c.fn > 0) {
        m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    }
    if (m.precision && m.recall) {
        const double pr = *m.precision, rc = *m.recall;
        m.f1 = pr + rc > 0.0 ? 2.0 * pr * rc / (pr + rc) : 0.0;
    }
    if (c.tp + c.fn > 0 && c.tn + c.fp > 0) {
        m.auroc = auroc(probs, labels);
    }
    return m;
}

namespace {

// Indices sorted by descending score.
std::vector<std::size_t> rank_desc(std::span<const double> scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

struct Step {
    std::size_t tp, fp;
    double threshold;
};

// Cumulative (tp, fp) after each group of tied scores.
std::vector<Step> cumulative_steps(std::span<const double> scores, std::span<const std::uint8_t> labels,
                                   std::size_t& pos, std::size_t& neg) {
    if (scores.size() != labels.size()) {
        throw Error("roc: length mismatch");
    }
    pos = 0;
    for (const auto y : labels) {
        pos += y != 0;
    }
    neg = labels.size() - pos;
    if (pos == 0 || neg == 0) {
        throw SingleClassError("roc: labels contain a single class");
    }
    for (const double s : scores) {
        if (std::isnan(s)) {
            throw Error("roc: NaN score");
        }
    }
    const auto idx = rank_desc(scores);
    std::vector<Step> steps;
    std::size_t tp = 0, fp = 0;
    for (std::size_t k = 0; k < idx.size();) {
        const double s = scores[idx[k]];
        while (k < idx.size() && scores[idx[k]] == s) {
            (labels[idx[k]] ? tp : fp)++;
            ++k;
        }
        steps.push_back({tp, fp, s});
    }
    return steps;
}

} // namespace

double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    std::size_t pos = 0, neg = 0;
    const auto steps = cumulative_steps(scores, labels, pos, neg);
    // Twice the area in units of one (fp, tp) cell; exact in integers.
    unsigned long long twice = 0;
    std::size_t tp_prev = 0, fp_prev = 0;
    for (const Step& s : steps) {
        twice += static_cast<unsigned long long>(s.fp - fp_prev) * (s.tp + tp_prev);
        tp_prev = s.tp;
        fp_prev = s.fp;
    }
    return static_cast<double>(twice) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    std::size_t pos = 0, neg = 0;
    const auto steps = cumulative_steps(scores, labels, pos, neg);
    std::vector<RocPoint> out;
    out.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    for (const Step& s : steps) {
        out.push_back({static_cast<double>(s.fp) / static_cast<double>(neg),
                       static_cast<double>(s.tp) / static_cast<double>(pos), s.threshold});
    }
    return out;
}

std::vector<PrPoint> pr_curve(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    std::size_t pos = 0, neg = 0;
    const auto steps = cumulative_steps(scores, labels, pos, neg);
    std::vector<PrPoint> out;
    for (const Step& s : steps) {
        out.push_back({static_cast<double>(s.tp) / static_cast<double>(pos),
                       static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp), s.threshold});
    }
    return out;
}

void export_curves(std::span<const double> scores, std::span<const std::uint8_t> labels,
                   const std::filesystem::path& dir) {
    const auto roc = roc_curve(scores, labels);
    const auto pr = pr_curve(scores, labels);
    std::filesystem::create_directories(dir);
    std::ofstream r(dir / "roc.csv");
    std::ofstream p(dir / "pr.csv");
    if (!r || !p) {
        throw Error("cannot write curves into " + dir.string());
    }
    r << "fpr,tpr,threshold\n";
    for (const auto& pt : roc) {
        r << format_real(pt.fpr) << "," << format_real(pt.tpr) << ","
          << (std::isinf(pt.threshold) ? std::string("inf") : format_real(pt.threshold)) << "\n";
    }
    p << "recall,precision,threshold\n";
    for (const auto& pt : pr) {
        p << format_real(pt.recall) << "," << format_real(pt.precision) << "," << format_real(pt.threshold)
          << "\n";
    }
}

// ---------------------------------------------------------------- transitions

namespace {

std::vector<long long> transitions(std::span<const std::uint8_t> y, bool onset) {
    std::vector<long long> out;
    for (std::size_t i = 1; i < y.size(); ++i) {
        const bool prev = y[i - 1] != 0;
        const bool cur = y[i] != 0;
        if (onset ? (!prev && cur) : (prev && !cur)) {
            out.push_back(static_cast<long long>(i));
        }
    }
    return out;
}

void match(const std::vector<long long>& gt, const std::vector<long long>& pred, double window,
           std::vector<long long>& errors, std::size_t& misses) {
    std::vector<bool> used(pred.size(), false);
    for (const long long g : gt) {
        std::size_t best = pred.size();
        long long best_dist = 0;
        for (std::size_t k = 0; k < pred.size(); ++k) {
            if (used[k]) {
                continue;
            }
            const long long dist = std::llabs(pred[k] - g);
            if (static_cast<double>(dist) > window) {
                continue;
            }
            if (best == pred.size() || dist < best_dist) {
                best = k;
                best_dist = dist;
            }
        }
        if (best == pred.size()) {
            ++misses;
        } else {
            used[best] = true;
            errors.push_back(pred[best] - g);
        }
    }
}

std::optional<double> mean_s(const std::vector<long long>& e, double fps) {
    if (e.empty()) {
        return std::nullopt;
    }
    long long sum = 0;
    for (const long long v : e) {
        sum += v;
    }
    return static_cast<double>(sum) / static_cast<double>(e.size()) / fps;
}

std::vector<double> to_seconds(const std::vector<long long>& e, double fps) {
    std::vector<double> out;
    for (const long long v : e) {
        out.push_back(static_cast<double>(v) / fps);
    }
    return out;
}

} // namespace

std::vector<double> TransitionErrors::onset_errors_s() const { return to_seconds(onset_errors, fps); }
std::vector<double> TransitionErrors::offset_errors_s() const { return to_seconds(offset_errors, fps); }
std::optional<double> TransitionErrors::mean_onset_error_s() const { return mean_s(onset_errors, fps); }
std::optional<double> TransitionErrors::mean_offset_error_s() const { return mean_s(offset_errors, fps); }

void TransitionErrors::append(const TransitionErrors& other) {
    if (fps == 0.0) {
        fps = other.fps;
    } else if (other.fps != fps) {
        throw Error("transition errors: cannot merge different frame rates");
    }
    onset_errors.insert(onset_errors.end(), other.onset_errors.begin(), other.onset_errors.end());
    offset_errors.insert(offset_errors.end(), other.offset_errors.begin(), other.offset_errors.end());
    onset_misses += other.onset_misses;
    offset_misses += other.offset_misses;
}

TransitionErrors transition_errors(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> labels,
                                   double fps, double match_window_s) {
    if (pred.size() != labels.size()) {
        throw Error("transition_errors: length mismatch");
    }
    if (!(fps > 0.0)) {
        throw Error("transition_errors: fps must be positive");
    }
    TransitionErrors out;
    out.fps = fps;
    // Small slack so a window of exactly k samples admits offset k.
    const double window = match_window_s * fps + 1e-9;
    match(transitions(labels, true), transitions(pred, true), window, out.onset_errors, out.onset_misses);
    match(transitions(labels, false), transitions(pred, false), window, out.offset_errors, out.offset_misses);
    return out;
}

void write_transition_histogram(const TransitionErrors& errors, const std::filesystem::path& path,
                                double match_window_s, double bin_width_s) {
    if (!(bin_width_s > 0.0) || !(match_window_s > 0.0)) {
        throw Error("transition histogram: window and bin width must be positive");
    }
    const auto bins = static_cast<long long>(std::ceil(match_window_s / bin_width_s));
    const std::size_t n = static_cast<std::size_t>(2 * bins + 1);
    std::vector<std::size_t> on(n, 0), off(n, 0);
    auto bin_of = [&](double e) {
        const long long b = std::llround(e / bin_width_s) + bins;
        return static_cast<std::size_t>(std::clamp<long long>(b, 0, 2 * bins));
    };
    for (const double e : errors.onset_errors_s()) {
        ++on[bin_of(e)];
    }
    for (const double e : errors.offset_errors_s()) {
        ++off[bin_of(e)];
    }
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << "bin_center_s,onset_count,offset_count\n";
    for (std::size_t k = 0; k < n; ++k) {
        const double center = static_cast<double>(static_cast<long long>(k) - bins) * bin_width_s;
        out << format_sig9(center) << "," << on[k] << "," << off[k] << "\n";
    }
}

// ---------------------------------------------------------------- reports

namespace {

void put(std::ostream& out, const char* key, const std::optional<double>& v) {
    out << key << " = " << (v ? format_real(*v) : std::string("undefined")) << "\n";
}

double sample_std(const std::vector<double>& v, double mean) {
    if (v.size() < 2) {
        return 0.0;
    }
    double ss = 0.0;
    for (const double x : v) {
        ss += (x - mean) * (x - mean);
    }
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::optional<double> stddev_s(const std::vector<long long>& e, double fps) {
    if (e.empty()) {
        return std::nullopt;
    }
    const auto s = to_seconds(e, fps);
    const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    return sample_std(s, mean);
}

const char* kValueKeys[] = {"accuracy", "precision", "recall", "f1", "auroc", "tp", "fp", "tn", "fn",
                            "onset_matched", "onset_misses", "onset_error_mean_s", "onset_error_std_s",
                            "offset_matched", "offset_misses", "offset_error_mean_s", "offset_error_std_s"};

} // namespace

void write_run_report(const RunReport& r, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    for (const auto& [k, v] : r.tags) {
        out << k << " = " << v << "\n";
    }
    put(out, "accuracy", r.metrics.accuracy);
    put(out, "precision", r.metrics.precision);
    put(out, "recall", r.metrics.recall);
    put(out, "f1", r.metrics.f1);
    put(out, "auroc", r.metrics.auroc);
    out << "tp = " << r.metrics.counts.tp << "\n";
    out << "fp = " << r.metrics.counts.fp << "\n";
    out << "tn = " << r.metrics.counts.tn << "\n";
    out << "fn = " << r.metrics.counts.fn << "\n";
    const auto& t = r.transitions;
    out << "onset_matched = " << t.onset_errors.size() << "\n";
    out << "onset_misses = " << t.onset_misses << "\n";
    put(out, "onset_error_mean_s", t.mean_onset_error_s());
    put(out, "onset_error_std_s", stddev_s(t.onset_errors, t.fps));
    out << "offset_matched = " << t.offset_errors.size() << "\n";
    out << "offset_misses = " << t.offset_misses << "\n";
    put(out, "offset_error_mean_s", t.mean_offset_error_s());
    put(out, "offset_error_std_s", stddev_s(t.offset_errors, t.fps));
    if (!out) {
        throw Error("I/O failure writing " + path.string());
    }
}

ParsedReport read_run_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    const std::set<std::string> value_keys(std::begin(kValueKeys), std::end(kValueKeys));
    ParsedReport r;
    std::string line;
    while (std::getline(in, line)) {
        const auto kv = parse_key_value(line);
        if (!kv) {
            continue;
        }
        const auto& [k, v] = *kv;
        if (!value_keys.count(k)) {
            r.tags[k] = v;
        } else if (v != "undefined") {
            r.values[k] = parse_double(v, path.string());
        }
    }
    return r;
}

void write_summary(const std::vector<ParsedReport>& runs, const std::filesystem::path& path) {
    using Key = std::tuple<std::string, std::string, std::string>;
    std::map<Key, std::vector<const ParsedReport*>> groups;
    auto tag = [](const ParsedReport& r, const char* k) {
        const auto it = r.tags.find(k);
        return it == r.tags.end() ? std::string("-") : it->second;
    };
    for (const auto& r : runs) {
        groups[{tag(r, "model"), tag(r, "split"), tag(r, "mode")}].push_back(&r);
        groups[{tag(r, "model"), "all", tag(r, "mode")}].push_back(&r);
    }
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    const char* fields[] = {"accuracy", "precision", "recall", "f1", "auroc", "onset_error_mean_s",
                            "offset_error_mean_s"};
    bool first = true;
    for (const auto& [key, members] : groups) {
        // A single-split "all" group duplicates its split group.
        if (std::get<1>(key) == "all") {
            std::set<std::string> splits;
            for (const auto* r : members) {
                splits.insert(tag(*r, "split"));
            }
            if (splits.size() < 2) {
                continue;
            }
        }
        if (!first) {
            out << "\n";
        }
        first = false;
        out << "[model=" << std::get<0>(key) << " split=" << std::get<1>(key) << " mode=" << std::get<2>(key)
            << "]\n";
        out << "runs = " << members.size() << "\n";
        for (const char* f : fields) {
            std::vector<double> vals;
            for (const auto* r : members) {
                const auto it = r->values.find(f);
                if (it != r->values.end()) {
                    vals.push_back(it->second);
                }
            }
            if (vals.empty()) {
                out << f << " = undefined\n";
                continue;
            }
            const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(vals.size());
            out << f << " = " << format_sig9(mean) << " +- " << format_sig9(sample_std(vals, mean));
            if (vals.size() != members.size()) {
                out << " (defined in " << vals.size() << " of " << members.size() << ")";
            }
            out << "\n";
        }
    }
}

} // namespace respvad
