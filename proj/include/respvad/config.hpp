#pragma once

#include "respvad/dataset.hpp"
#include "respvad/eval.hpp"
#include "respvad/models.hpp"
#include "respvad/rp.hpp"
#include "respvad/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace respvad {

// Every tunable default of the pipeline in one override set.
struct RunConfig {
    std::uint64_t seed = 0;

    // rp
    double eps = kDefaultFlowEps;
    double tol = 1e-10;
    int max_iter = 10000;
    bool integrate = true;
    bool filter = true;
    double low_bpm = 5.0;
    double high_bpm = 30.0;

    // dataset / models
    std::size_t w = 100;
    ChunkMode mode = ChunkMode::overlap;
    Arch arch = Arch::convlstm;
    int n_splits = 4;
    int epochs = 50;
    int batch_size = 32;
    double lr = 1e-3;
    std::size_t chunks_per_epoch = 0;
    double w_pos = 0.0; // 0 means balanced weights from the training labels
    double w_neg = 0.0;

    // eval
    double threshold = 0.5;
    double match_window_s = kDefaultMatchWindowS;

    SynthVideoParams video;
    SynthRPParams rp;

    // Key names in file order.
    static const std::vector<std::string>& keys();
    static std::string describe(const std::string& key);

    std::string get(const std::string& key) const;
    // Throws respvad::Error for an unknown key or a malformed value.
    void set(const std::string& key, const std::string& value);
    void validate() const;

    void load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    RpOptions rp_options() const;
    TrainConfig train_config() const;
};

} // namespace respvad
