#include "respvad/cli.hpp"
#include "respvad/dataset.hpp"
#include "respvad/error.hpp"
#include "respvad/eval.hpp"
#include "respvad/flow.hpp"
#include "respvad/models.hpp"
#include "respvad/rp.hpp"
#include "respvad/synth.hpp"
#include "respvad/video_io.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace respvad;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Labels8 = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

// (T, H, W) array in [0, 1] -> frames.
FrameSequence to_frames(const Array& a, double fps) {
    if (a.ndim() != 3) {
        throw Error("frames must be a (T, H, W) array");
    }
    FrameSequence seq;
    seq.height = static_cast<int>(a.shape(1));
    seq.width = static_cast<int>(a.shape(2));
    seq.fps = fps;
    const auto per = static_cast<std::size_t>(seq.width) * seq.height;
    for (py::ssize_t t = 0; t < a.shape(0); ++t) {
        Image im(seq.width, seq.height);
        std::copy_n(a.data() + t * per, per, im.pixels.begin());
        seq.frames.push_back(std::move(im));
    }
    seq.validate();
    return seq;
}

Array from_frames(const FrameSequence& seq) {
    Array out({static_cast<py::ssize_t>(seq.size()), static_cast<py::ssize_t>(seq.height),
               static_cast<py::ssize_t>(seq.width)});
    double* p = out.mutable_data();
    for (const auto& f : seq.frames) {
        p = std::copy(f.pixels.begin(), f.pixels.end(), p);
    }
    return out;
}

std::vector<double> vec(const Array& a) { return {a.data(), a.data() + a.size()}; }
std::vector<std::uint8_t> bits(const Labels8& a) { return {a.data(), a.data() + a.size()}; }

template <class T>
py::object opt(const std::optional<T>& v) {
    return v ? py::cast(*v) : py::none();
}

py::dict metrics_dict(const Metrics& m) {
    py::dict d;
    d["accuracy"] = opt(m.accuracy);
    d["precision"] = opt(m.precision);
    d["recall"] = opt(m.recall);
    d["f1"] = opt(m.f1);
    d["auroc"] = opt(m.auroc);
    d["tp"] = m.counts.tp;
    d["fp"] = m.counts.fp;
    d["tn"] = m.counts.tn;
    d["fn"] = m.counts.fn;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Respiration-pattern voice activity detection";

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<DegenerateInputError>(m, "DegenerateInputError", m.attr("Error"));
    py::register_exception<SingleClassError>(m, "SingleClassError", m.attr("Error"));
    py::register_exception<ConvergenceError>(m, "ConvergenceError", m.attr("Error"));
    py::register_exception<NumericalError>(m, "NumericalError", m.attr("Error"));

    m.def(
        "synth_video",
        [](int width, int height, std::size_t frames, double fps, double amplitude_px, double freq_hz,
           double noise_sigma, std::uint64_t seed) {
            SynthVideoParams p;
            p.width = width;
            p.height = height;
            p.frames = frames;
            p.fps = fps;
            p.amplitude_px = amplitude_px;
            p.freq_hz = freq_hz;
            p.noise_sigma = noise_sigma;
            p.seed = seed;
            const auto v = synth_video(p);
            return py::make_tuple(from_frames(v.frames), py::array(py::cast(v.displacement)));
        },
        py::arg("width") = 64, py::arg("height") = 64, py::arg("frames") = 900, py::arg("fps") = 30.0,
        py::arg("amplitude_px") = 1.5, py::arg("freq_hz") = 0.2, py::arg("noise_sigma") = 0.005,
        py::arg("seed") = 0, "Synthetic (frames, displacement); frames is (T, H, W).");

    m.def("load_frames", [](const std::filesystem::path& manifest) {
        const auto seq = load_frames(read_manifest(manifest));
        return py::make_tuple(from_frames(seq), seq.fps);
    });

    m.def(
        "flow_matrix",
        [](const Array& frames, double fps, double eps) { return build_flow_matrix(to_frames(frames, fps), eps).values; },
        py::arg("frames"), py::arg("fps"), py::arg("eps") = kDefaultFlowEps, "2P x N normalized flow matrix.");

    m.def(
        "top_singular_triplet",
        [](const Eigen::MatrixXd& f, double tol, int max_iter, std::uint64_t seed) {
            const auto t = top_singular_triplet(f, {tol, max_iter, seed});
            py::dict d;
            d["sigma"] = t.sigma;
            d["u"] = t.u;
            d["v"] = t.v;
            d["iterations"] = t.iterations;
            d["residual"] = t.residual;
            d["gap_ratio"] = t.gap_ratio;
            return d;
        },
        py::arg("f"), py::arg("tol") = 1e-10, py::arg("max_iter") = 10000, py::arg("seed") = 0);

    m.def(
        "respiration_pattern",
        [](const Array& frames, double fps, double eps, bool integrate, bool filter, double low_bpm,
           double high_bpm, std::uint64_t seed) {
            RpOptions o;
            o.eps = eps;
            o.integrate = integrate;
            o.filter = filter;
            o.low_bpm = low_bpm;
            o.high_bpm = high_bpm;
            o.solver.seed = seed;
            return respiration_pattern(to_frames(frames, fps), o).samples;
        },
        py::arg("frames"), py::arg("fps"), py::arg("eps") = kDefaultFlowEps, py::arg("integrate") = true,
        py::arg("filter") = true, py::arg("low_bpm") = 5.0, py::arg("high_bpm") = 30.0, py::arg("seed") = 0);

    m.def(
        "bandpass",
        [](const Array& x, double fps, double low_bpm, double high_bpm) {
            return bandpass({vec(x), fps, false}, low_bpm, high_bpm).samples;
        },
        py::arg("x"), py::arg("fps"), py::arg("low_bpm") = 5.0, py::arg("high_bpm") = 30.0);

    m.def(
        "chunk",
        [](const Array& x, std::size_t w, const std::string& mode) {
            const auto set = chunk_signal(vec(x), w, parse_chunk_mode(mode));
            Array out({static_cast<py::ssize_t>(set.size()), static_cast<py::ssize_t>(w)});
            double* p = out.mutable_data();
            for (const auto& c : set.chunks) {
                p = std::copy(c.input.begin(), c.input.end(), p);
            }
            return out;
        },
        py::arg("x"), py::arg("w"), py::arg("mode") = "overlap", "Chunks as a (count, w) array.");

    m.def(
        "reassemble",
        [](const Array& values, std::size_t n, const std::string& mode) {
            if (values.ndim() != 2) {
                throw Error("values must be a (count, w) array");
            }
            const auto w = static_cast<std::size_t>(values.shape(1));
            const auto set = chunk_signal(std::vector<double>(n, 0.0), w, parse_chunk_mode(mode));
            std::vector<std::vector<double>> rows;
            for (py::ssize_t k = 0; k < values.shape(0); ++k) {
                rows.emplace_back(values.data() + k * w, values.data() + (k + 1) * w);
            }
            return reassemble(set, rows, n);
        },
        py::arg("values"), py::arg("n"), py::arg("mode") = "overlap");

    m.def(
        "synth_rp_dataset",
        [](std::size_t n_speakers, double fps, double distortion, double noise_sigma, std::uint64_t seed) {
            SynthRPParams p;
            p.n_speakers = n_speakers;
            p.fps = fps;
            p.distortion = distortion;
            p.noise_sigma = noise_sigma;
            p.seed = seed;
            py::list out;
            for (const auto& s : synth_rp_dataset(p)) {
                out.append(py::make_tuple(s.speaker_id, py::array(py::cast(s.rp.samples)),
                                          py::array(py::cast(s.labels))));
            }
            return out;
        },
        py::arg("n_speakers") = 32, py::arg("fps") = 10.0, py::arg("distortion") = 1.0,
        py::arg("noise_sigma") = 0.05, py::arg("seed") = 0, "List of (speaker_id, rp, labels).");

    py::class_<Model>(m, "Model")
        .def(py::init([](const std::string& arch, std::size_t w, std::uint64_t seed) {
                 return Model::build({parse_arch(arch), w}, seed);
             }),
             py::arg("arch") = "convlstm", py::arg("w") = 100, py::arg("seed") = 0)
        .def_static("load", &Model::load)
        .def("save", &Model::save)
        .def_property_readonly("arch", [](const Model& self) { return std::string(to_string(self.spec().arch)); })
        .def_property_readonly("w", [](const Model& self) { return self.spec().w; })
        .def_property_readonly("parameter_count", &Model::parameter_count)
        .def(
            "forward", [](Model& self, const nn::Matrix& windows) { return self.forward(windows, false); },
            "batch x w windows -> batch x w probabilities")
        .def(
            "train",
            [](Model& self, const std::vector<std::pair<Array, Labels8>>& sequences, const std::string& mode,
               int epochs, int batch_size, double lr, std::size_t chunks_per_epoch, std::uint64_t seed) {
                std::vector<LabeledSequence> seqs;
                for (const auto& [x, y] : sequences) {
                    seqs.push_back({"", {vec(x), 1.0, false}, bits(y)});
                }
                TrainConfig cfg;
                cfg.epochs = epochs;
                cfg.batch_size = batch_size;
                cfg.lr = lr;
                cfg.seed = seed;
                cfg.mode = parse_chunk_mode(mode);
                cfg.chunks_per_epoch = chunks_per_epoch;
                cfg.weights = class_weights(seqs);
                return train(self, chunk_all(seqs, self.spec().w, cfg.mode), cfg);
            },
            py::arg("sequences"), py::arg("mode") = "overlap", py::arg("epochs") = 50, py::arg("batch_size") = 32,
            py::arg("lr") = 1e-3, py::arg("chunks_per_epoch") = 0, py::arg("seed") = 0,
            "Train on [(rp, labels)]; returns the per-epoch loss.")
        .def(
            "predict",
            [](Model& self, const Array& rp, const std::string& mode) {
                return predict_sequence(self, vec(rp), parse_chunk_mode(mode), 64);
            },
            py::arg("rp"), py::arg("mode") = "overlap");

    m.def(
        "metrics",
        [](const Array& probs, const Labels8& labels, double threshold) {
            return metrics_dict(metrics(vec(probs), bits(labels), threshold));
        },
        py::arg("probs"), py::arg("labels"), py::arg("threshold") = 0.5);

    m.def("auroc", [](const Array& s, const Labels8& y) { return auroc(vec(s), bits(y)); });

    m.def("roc_curve", [](const Array& s, const Labels8& y) {
        std::vector<std::tuple<double, double, double>> out;
        for (const auto& p : roc_curve(vec(s), bits(y))) {
            out.emplace_back(p.fpr, p.tpr, p.threshold);
        }
        return out;
    });

    m.def(
        "transition_errors",
        [](const Labels8& pred, const Labels8& labels, double fps, double window) {
            const auto e = transition_errors(bits(pred), bits(labels), fps, window);
            py::dict d;
            d["onset_errors_s"] = e.onset_errors_s();
            d["offset_errors_s"] = e.offset_errors_s();
            d["onset_misses"] = e.onset_misses;
            d["offset_misses"] = e.offset_misses;
            return d;
        },
        py::arg("pred"), py::arg("labels"), py::arg("fps"), py::arg("match_window_s") = kDefaultMatchWindowS);

    m.def(
        "cli", [](std::vector<std::string> args) {
            args.insert(args.begin(), "respvad");
            return cli_main(args);
        },
        "Run a respvad subcommand; returns the exit code.");
}
