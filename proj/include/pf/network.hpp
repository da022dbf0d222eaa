#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "pf/attention.hpp"
#include "pf/dataio.hpp"
#include "pf/metrics.hpp"
#include "pf/mgr.hpp"

namespace pf {

enum class Task { Classify, Segment };
Task parse_task(const std::string& s);
const char* task_name(Task t);

struct ModelConfig {
    Task task = Task::Classify;
    int num_classes = 2;
    int k_neighbors = 16;
    std::vector<int> sample_sizes = {128, 64}; // classification only
    int c_k = 32;
    int c_v = 16;
    int c_h = 16;
    int heads = 8;
    int depth = 2;
    MgrMode mgr_mode = MgrMode::MultiGraph;
    bool use_rpe = true; // positional MLPs at q/k/v (ablation switch)
    std::vector<int> head_widths = {64};

    void validate() const;
};

struct TrainConfig {
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

    // optional early exit once the test metric reaches a target (<= 0 disables)
    double stop_at_accuracy = -1.0;
    double stop_at_class1_iou = -1.0;

    void validate() const;
};

// Batch-statistics standardization with learned scale/shift; running
// statistics (stored on the model) serve evaluation.
struct BatchNormRef {
    int gamma = -1, beta = -1;
    int slot = -1; // index into the model's running stats
};

struct MlpBlockRef {
    int w = -1, b = -1;
    BatchNormRef bn;
};

// One stage of the backbone. When `mgr` is active the positional path is
// dropped and a channel-graph branch over directly-projected values is added
// to the attention output, together with a residual from the block input.
struct BlockRef {
    AttentionLayerRef attn;
    bool has_mgr = false;
    int w_vdir = -1;  // C_in x C_v, value projection without neighborhood context
    MgrRef mgr;
    int w_res = -1;   // residual projection when input width != output width
};

struct Model {
    ModelConfig cfg;
    ParamStore store;
    std::vector<BlockRef> blocks;
    std::vector<MlpBlockRef> head;
    int head_out_w = -1, head_out_b = -1;

    std::vector<Tensor> running_mean, running_var;
    double bn_eps = 1e-5;
    double bn_momentum = 0.1;

    // Classification: [B, num_classes]. Segmentation: [B*N, num_classes].
    Value forward(Tape& tape, const std::vector<Value>& p,
                  const std::vector<const PointCloud*>& batch, bool train_mode);
};

Model build_model(const ModelConfig& cfg, std::uint64_t seed);

// Mean over rows of -log softmax(logits)[label], computed via log-sum-exp.
Value cross_entropy_loss(Tape& tape, Value logits, const std::vector<int>& labels);

struct AdamState {
    std::vector<Tensor> m, v;
};

// Classic Adam with bias correction; weight decay enters as an L2 gradient
// term. `grads` aligns with the store by index.
void adam_step(ParamStore& params, const std::vector<Tensor>& grads, AdamState& state, int t,
               double lr, double beta1, double beta2, double weight_decay, double eps = 1e-8);

double cosine_lr(int epoch, int total_epochs, double lr_max, double lr_min);

struct TrainLogRow {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double test_acc = 0.0;
    double test_f1 = 0.0;
    double test_iou = 0.0; // segmentation only (class 1)
    double test_dsc = 0.0;
};

struct TrainLog {
    Task task = Task::Classify;
    std::vector<TrainLogRow> rows;
};

// epoch,lr,train_loss,test_acc,test_f1[,test_iou,test_dsc]
std::string train_log_csv(const TrainLog& log);

TrainLog train(Model& model, const Dataset& dataset, const TrainConfig& cfg);

MetricsReport evaluate(Model& model, const Dataset& dataset, Split split, int batch_size);

// Max relative error between reverse-mode and central-difference gradients
// of the training loss, taken over every coordinate of every parameter.
double gradcheck_max_rel_error(Model& model, const std::vector<const PointCloud*>& batch,
                               double eps);

} // namespace pf
