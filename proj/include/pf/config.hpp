#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "pf/dataio.hpp"
#include "pf/network.hpp"

namespace pf {

// Flat experiment configuration: "key = value" lines, '#' comments, unknown
// keys rejected, values type-checked while parsing. Covers the model and
// training fields plus generator parameters and paths.
struct RunConfig {
    // model
    std::string task = "classify";
    int num_classes = 2;
    int k = 16;
    std::vector<int> sample_sizes = {128, 64};
    int c_k = 32;
    int c_v = 16;
    int c_h = 16;
    int heads = 8;
    int depth = 2;
    std::string mgr_mode = "multi_graph";
    bool rpe = true;
    std::vector<int> head_widths = {64};

    // training
    int epochs = 250;
    int batch_size_train = 32;
    int batch_size_test = 16;
    double learning_rate = 1e-2;
    double weight_decay = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double lr_min = 1e-4;
    bool augment = true;
    std::uint64_t seed = 0;
    double stop_at_accuracy = -1.0;
    double stop_at_class1_iou = -1.0;

    // generation
    int n_points = 256;
    int per_class = 100;
    double noise_sigma = 0.02;
    std::vector<std::string> kinds = {"sphere", "torus"};
    int count = 100; // segmentation sample count

    // paths / formats
    std::string data_dir;
    std::string checkpoint;
    std::string format = "binary";

    ModelConfig model_config() const;
    TrainConfig train_config() const;
    CloudFormat cloud_format() const { return parse_cloud_format(format); }
};

RunConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");
RunConfig parse_config_file(const std::string& path);

// One "key = value" assignment (flag overrides use the same path as files).
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);

// Canonical render; parsing it back reproduces the config.
std::string config_text(const RunConfig& cfg);

} // namespace pf
