#include "pf/network.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace pf {

Task parse_task(const std::string& s) {
    if (s == "classify") return Task::Classify;
    if (s == "segment") return Task::Segment;
    throw ArgumentError("unknown task '" + s + "' (expected classify|segment)");
}

const char* task_name(Task t) { return t == Task::Classify ? "classify" : "segment"; }

void ModelConfig::validate() const {
    if (depth < 1) throw ConfigError("depth must be >= 1");
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
    if (k_neighbors < 1) throw ConfigError("k must be >= 1");
    if (c_k < 1 || c_v < 1 || c_h < 1 || heads < 1) throw ConfigError("widths must be >= 1");
    if (task == Task::Classify) {
        if (static_cast<int>(sample_sizes.size()) != depth)
            throw ConfigError("sample_sizes must list one count per layer (depth=" +
                              std::to_string(depth) + ", got " +
                              std::to_string(sample_sizes.size()) + ")");
        for (size_t i = 0; i < sample_sizes.size(); ++i) {
            if (sample_sizes[i] < 1) throw ConfigError("sample_sizes entries must be >= 1");
            if (i > 0 && sample_sizes[i] > sample_sizes[i - 1])
                throw ConfigError("sample_sizes must be non-increasing");
        }
    }
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ArgumentError("epochs must be >= 1");
    if (batch_size_train < 1 || batch_size_test < 1) throw ConfigError("batch sizes must be >= 1");
    if (learning_rate <= 0 || lr_min <= 0) throw ConfigError("learning rates must be > 0");
    if (weight_decay < 0) throw ConfigError("weight_decay must be >= 0");
    if (adam_beta1 <= 0 || adam_beta1 >= 1 || adam_beta2 <= 0 || adam_beta2 >= 1)
        throw ConfigError("adam betas must lie in (0, 1)");
}

// -- model assembly -------------------------------------------------------

namespace {

BatchNormRef make_bn(Model& model, const std::string& prefix, int width) {
    BatchNormRef bn;
    bn.gamma = model.store.add(prefix + ".gamma", Tensor::full({width}, 1.0));
    bn.beta = model.store.add(prefix + ".beta", Tensor({width}));
    bn.slot = static_cast<int>(model.running_mean.size());
    model.running_mean.push_back(Tensor({width}));
    model.running_var.push_back(Tensor::full({width}, 1.0));
    return bn;
}

Value batch_norm(Model& model, Tape& tape, const std::vector<Value>& p, const BatchNormRef& bn,
                 Value x, bool train_mode) {
    Value gamma = p[static_cast<size_t>(bn.gamma)];
    Value beta = p[static_cast<size_t>(bn.beta)];
    const int width = x.val().dim(1);
    Value eps = tape.leaf(Tensor::full({width}, model.bn_eps));

    if (train_mode) {
        Value mu = mean_over_axis(x, 0);
        Value centered = x - mu;
        Value var = mean_over_axis(centered * centered, 0);
        Value inv_std = exp_of(scale(log_of(var + eps), -0.5));
        Value y = centered * inv_std * gamma + beta;

        Tensor& rm = model.running_mean[static_cast<size_t>(bn.slot)];
        Tensor& rv = model.running_var[static_cast<size_t>(bn.slot)];
        for (int c = 0; c < width; ++c) {
            rm[c] = (1.0 - model.bn_momentum) * rm[c] + model.bn_momentum * mu.val()[c];
            rv[c] = (1.0 - model.bn_momentum) * rv[c] + model.bn_momentum * var.val()[c];
        }
        return y;
    }
    Value rm = tape.leaf(model.running_mean[static_cast<size_t>(bn.slot)]);
    Value rv = tape.leaf(model.running_var[static_cast<size_t>(bn.slot)]);
    Value inv_std = exp_of(scale(log_of(rv + eps), -0.5));
    return (x - rm) * inv_std * gamma + beta;
}

Value mlp_block(Model& model, Tape& tape, const std::vector<Value>& p, const MlpBlockRef& blk,
                Value x, bool train_mode) {
    Value lin = matmul(x, p[static_cast<size_t>(blk.w)]) + p[static_cast<size_t>(blk.b)];
    return relu(batch_norm(model, tape, p, blk.bn, lin, train_mode));
}

// Attention stage with the positional path swapped for channel-graph
// reasoning on directly-projected values, plus the block-input residual.
Value mgr_block_forward(Tape& tape, const std::vector<Value>& p, const BlockRef& blk,
                        Value source_features, const Tensor& positions,
                        const NeighborhoodIndex& nbr) {
    Value attn = attention_block_forward(tape, p, blk.attn, source_features, positions, nbr);

    std::vector<int> center_rows(nbr.centers.begin(), nbr.centers.end());
    Value centers = gather_rows(source_features, center_rows);
    Value v_dir = matmul(centers, p[static_cast<size_t>(blk.w_vdir)]);
    Value graphs = mgr_forward(tape, p, blk.mgr, v_dir);

    Value out = attn + graphs;
    Value resid = blk.w_res >= 0 ? matmul(centers, p[static_cast<size_t>(blk.w_res)]) : centers;
    return out + resid;
}

} // namespace

Model build_model(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Model model;
    model.cfg = cfg;
    Rng rng(seed);

    int c_in = 3; // xyz positions stand in when no feature channels exist
    for (int l = 0; l < cfg.depth; ++l) {
        const std::string prefix = "block" + std::to_string(l);
        BlockRef blk;
        const bool final_layer = (l == cfg.depth - 1);
        blk.has_mgr = final_layer && cfg.mgr_mode != MgrMode::Off;
        blk.attn = make_attention_layer(model.store, prefix + ".attn", c_in, cfg.c_h, cfg.c_k,
                                        cfg.c_v, cfg.heads, cfg.use_rpe && !blk.has_mgr, rng);
        const int out_w = blk.attn.out_width();
        if (blk.has_mgr) {
            const int graphs = cfg.mgr_mode == MgrMode::SingleGraph ? 1 : cfg.c_k;
            blk.w_vdir = model.store.add(prefix + ".w_vdir", init_weight(c_in, cfg.c_v, rng));
            blk.mgr = make_mgr(model.store, prefix + ".mgr", graphs, cfg.c_v, out_w, rng);
            if (c_in != out_w)
                blk.w_res = model.store.add(prefix + ".w_res", init_weight(c_in, out_w, rng));
        }
        model.blocks.push_back(std::move(blk));
        c_in = out_w;
    }

    int head_in = c_in;
    if (cfg.task == Task::Segment) head_in = c_in * cfg.depth + c_in; // per-layer concat + global
    for (size_t i = 0; i < cfg.head_widths.size(); ++i) {
        const std::string prefix = "head" + std::to_string(i);
        MlpBlockRef blk;
        blk.w = model.store.add(prefix + ".w", init_weight(head_in, cfg.head_widths[i], rng));
        blk.b = model.store.add(prefix + ".b", Tensor({cfg.head_widths[i]}));
        blk.bn = make_bn(model, prefix + ".bn", cfg.head_widths[i]);
        model.head.push_back(blk);
        head_in = cfg.head_widths[i];
    }
    model.head_out_w = model.store.add("head_out.w", init_weight(head_in, cfg.num_classes, rng));
    model.head_out_b = model.store.add("head_out.b", Tensor({cfg.num_classes}));
    return model;
}

Value Model::forward(Tape& tape, const std::vector<Value>& p,
                     const std::vector<const PointCloud*>& batch, bool train_mode) {
    if (batch.empty()) throw ArgumentError("forward: empty batch");
    std::vector<Value> per_sample;
    per_sample.reserve(batch.size());

    for (const PointCloud* sample : batch) {
        sample->validate();
        Value feats = tape.leaf(sample->features.empty() ? sample->positions : sample->features);
        Tensor positions = sample->positions;

        if (cfg.task == Task::Classify) {
            for (size_t l = 0; l < blocks.size(); ++l) {
                PointCloud level;
                level.positions = positions;
                const std::vector<int> centers =
                    farthest_point_sample(level, cfg.sample_sizes[l]);
                const NeighborhoodIndex nbr = knn(level, centers, cfg.k_neighbors);
                const BlockRef& blk = blocks[l];
                feats = blk.has_mgr
                            ? mgr_block_forward(tape, p, blk, feats, positions, nbr)
                            : attention_block_forward(tape, p, blk.attn, feats, positions, nbr);
                Tensor next({static_cast<int>(centers.size()), 3});
                for (size_t i = 0; i < centers.size(); ++i)
                    for (int a = 0; a < 3; ++a)
                        next.at(static_cast<int>(i), a) = positions.at(centers[i], a);
                positions = std::move(next);
            }
            Value pooled = max_over_axis(feats, 0); // [width]
            per_sample.push_back(reshape(pooled, {1, feats.val().dim(1)}));
        } else {
            const int n = sample->size();
            std::vector<int> all(static_cast<size_t>(n));
            for (int i = 0; i < n; ++i) all[static_cast<size_t>(i)] = i;
            PointCloud level;
            level.positions = positions;
            const NeighborhoodIndex nbr = knn(level, all, cfg.k_neighbors);

            std::vector<Value> stages;
            for (const BlockRef& blk : blocks) {
                feats = blk.has_mgr
                            ? mgr_block_forward(tape, p, blk, feats, positions, nbr)
                            : attention_block_forward(tape, p, blk.attn, feats, positions, nbr);
                stages.push_back(feats);
            }
            Value global = reshape(max_over_axis(feats, 0), {1, feats.val().dim(1)});
            stages.push_back(gather_rows(global, std::vector<int>(static_cast<size_t>(n), 0)));
            per_sample.push_back(concat_axis(stages, 1));
        }
    }

    Value x = per_sample.size() == 1 ? per_sample[0] : concat_axis(per_sample, 0);
    for (const MlpBlockRef& blk : head) x = mlp_block(*this, tape, p, blk, x, train_mode);
    return matmul(x, p[static_cast<size_t>(head_out_w)]) + p[static_cast<size_t>(head_out_b)];
}

// -- loss / optimizer -----------------------------------------------------

Value cross_entropy_loss(Tape& tape, Value logits, const std::vector<int>& labels) {
    const Tensor& t = logits.val();
    if (t.rank() != 2 || static_cast<size_t>(t.dim(0)) != labels.size())
        throw DimensionError("cross_entropy_loss: logits " + shape_str(t.shape()) + " vs " +
                             std::to_string(labels.size()) + " labels");
    const int rows = t.dim(0), classes = t.dim(1);
    Tensor onehot({rows, classes});
    for (int i = 0; i < rows; ++i) {
        const int label = labels[static_cast<size_t>(i)];
        if (label < 0 || label >= classes)
            throw ArgumentError("cross_entropy_loss: label " + std::to_string(label) +
                                " outside [0, " + std::to_string(classes) + ")");
        onehot.at(i, label) = 1.0;
    }
    Value m = max_over_axis(logits, 1);                     // [rows]
    Value m_col = reshape(m, {rows, 1});
    Value e = exp_of(logits - m_col);
    Value lse = log_of(sum_over_axis(e, 1)) + m;            // [rows]
    Value picked = sum_over_axis(logits * tape.leaf(std::move(onehot)), 1);
    return mean_over_axis(lse - picked, 0);
}

void adam_step(ParamStore& params, const std::vector<Tensor>& grads, AdamState& state, int t,
               double lr, double beta1, double beta2, double weight_decay, double eps) {
    if (t < 1) throw ArgumentError("adam_step: step index must be >= 1");
    if (static_cast<int>(grads.size()) != params.count())
        throw ArgumentError("adam_step: gradient count " + std::to_string(grads.size()) +
                            " does not match parameter count " + std::to_string(params.count()));
    if (state.m.empty()) {
        for (int i = 0; i < params.count(); ++i) {
            state.m.push_back(Tensor(params.tensor(i).shape()));
            state.v.push_back(Tensor(params.tensor(i).shape()));
        }
    }
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    for (int i = 0; i < params.count(); ++i) {
        Tensor& theta = params.tensor(i);
        const Tensor& grad = grads[static_cast<size_t>(i)];
        if (!grad.same_shape(theta))
            throw ArgumentError("adam_step: gradient shape " + shape_str(grad.shape()) +
                                " does not match parameter " + params.name(i) + " " +
                                shape_str(theta.shape()));
        Tensor& m = state.m[static_cast<size_t>(i)];
        Tensor& v = state.v[static_cast<size_t>(i)];
        for (std::int64_t j = 0; j < theta.numel(); ++j) {
            const double g = grad[j] + weight_decay * theta[j];
            m[j] = beta1 * m[j] + (1.0 - beta1) * g;
            v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            theta[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

double cosine_lr(int epoch, int total_epochs, double lr_max, double lr_min) {
    if (epoch < 0 || epoch > total_epochs) throw ArgumentError("cosine_lr: epoch outside [0, total]");
    const double c = std::cos(3.14159265358979323846 * epoch / total_epochs);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + c);
}

// -- training loop --------------------------------------------------------

namespace {

std::vector<int> labels_for(const std::vector<const PointCloud*>& batch, Task task) {
    std::vector<int> labels;
    for (const PointCloud* c : batch) {
        if (task == Task::Classify) {
            if (c->class_label < 0) throw ArgumentError("sample is missing its class label");
            labels.push_back(c->class_label);
        } else {
            if (c->labels.empty()) throw ArgumentError("sample is missing per-point labels");
            labels.insert(labels.end(), c->labels.begin(), c->labels.end());
        }
    }
    return labels;
}

std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

MetricsReport evaluate(Model& model, const Dataset& dataset, Split split, int batch_size) {
    const std::vector<int> idx = dataset.indices(split);
    if (idx.empty()) throw ArgumentError("evaluate: no samples in the requested split");
    std::vector<int> pred, truth;
    for (size_t start = 0; start < idx.size(); start += static_cast<size_t>(batch_size)) {
        std::vector<const PointCloud*> batch;
        for (size_t i = start; i < std::min(idx.size(), start + static_cast<size_t>(batch_size)); ++i)
            batch.push_back(&dataset.samples[static_cast<size_t>(idx[i])]);
        Tape tape;
        auto p = bind_params(tape, model.store);
        Value logits = model.forward(tape, p, batch, /*train_mode=*/false);
        const Tensor& t = logits.val();
        for (int r = 0; r < t.dim(0); ++r) {
            int best = 0;
            for (int c = 1; c < t.dim(1); ++c)
                if (t.at(r, c) > t.at(r, best)) best = c;
            pred.push_back(best);
        }
        const std::vector<int> batch_truth = labels_for(batch, model.cfg.task);
        truth.insert(truth.end(), batch_truth.begin(), batch_truth.end());
    }
    return compute_metrics(pred, truth, model.cfg.num_classes);
}

TrainLog train(Model& model, const Dataset& dataset, const TrainConfig& cfg) {
    cfg.validate();
    if (dataset.samples.empty()) throw ArgumentError("train: empty dataset");
    const std::vector<int> train_idx = dataset.indices(Split::Train);
    if (train_idx.empty()) throw ArgumentError("train: no training samples");

    Rng rng(cfg.seed);
    AdamState adam;
    TrainLog log;
    log.task = model.cfg.task;
    int step = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr_t = cosine_lr(epoch, cfg.epochs, cfg.learning_rate, cfg.lr_min);
        std::vector<int> order = train_idx;
        rng.shuffle(order);

        double loss_sum = 0.0;
        int batch_count = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size_train)) {
            std::vector<PointCloud> storage;
            std::vector<const PointCloud*> batch;
            for (size_t i = start;
                 i < std::min(order.size(), start + static_cast<size_t>(cfg.batch_size_train)); ++i) {
                const PointCloud& src = dataset.samples[static_cast<size_t>(order[i])];
                if (cfg.augment) storage.push_back(augment(src, rng.fork()));
                else storage.push_back(src);
            }
            for (const PointCloud& c : storage) batch.push_back(&c);

            Tape tape;
            auto p = bind_params(tape, model.store);
            Value logits = model.forward(tape, p, batch, /*train_mode=*/true);
            Value loss = cross_entropy_loss(tape, logits, labels_for(batch, model.cfg.task));
            const double loss_val = loss.val()[0];
            if (!std::isfinite(loss_val))
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(batch_count));
            auto grads = tape.backward(loss.id);
            std::vector<Tensor> aligned;
            aligned.reserve(p.size());
            for (const Value& v : p) aligned.push_back(std::move(grads.at(v.id)));
            ++step;
            adam_step(model.store, aligned, adam, step, lr_t, cfg.adam_beta1, cfg.adam_beta2,
                      cfg.weight_decay);
            loss_sum += loss_val;
            ++batch_count;
        }

        MetricsReport report = evaluate(model, dataset, Split::Test, cfg.batch_size_test);
        TrainLogRow row;
        row.epoch = epoch;
        row.lr = lr_t;
        row.train_loss = loss_sum / batch_count;
        row.test_acc = report.accuracy;
        row.test_f1 = report.f1_summary;
        if (model.cfg.task == Task::Segment) {
            row.test_iou = report.class_iou(1);
            row.test_dsc = report.dsc[1];
        }
        log.rows.push_back(row);

        if (cfg.stop_at_accuracy > 0 && row.test_acc >= cfg.stop_at_accuracy) break;
        if (cfg.stop_at_class1_iou > 0 && model.cfg.task == Task::Segment &&
            row.test_iou >= cfg.stop_at_class1_iou)
            break;
    }
    return log;
}

double gradcheck_max_rel_error(Model& model, const std::vector<const PointCloud*>& batch,
                               double eps) {
    const std::vector<int> labels = labels_for(batch, model.cfg.task);
    Tape tape;
    auto p = bind_params(tape, model.store);
    Value logits = model.forward(tape, p, batch, /*train_mode=*/true);
    Value loss = cross_entropy_loss(tape, logits, labels);
    auto grads = tape.backward(loss.id);

    double worst = 0.0;
    for (int i = 0; i < model.store.count(); ++i) {
        const Tensor theta = model.store.tensor(i);
        auto f = [&](const Tensor& t) {
            Tensor saved = model.store.tensor(i);
            model.store.tensor(i) = t;
            Tape probe;
            auto pp = bind_params(probe, model.store);
            Value lg = model.forward(probe, pp, batch, /*train_mode=*/true);
            const double v = cross_entropy_loss(probe, lg, labels).val()[0];
            model.store.tensor(i) = std::move(saved);
            return v;
        };
        worst = std::max(worst,
                         finite_difference_check(f, theta, eps,
                                                 grads.at(p[static_cast<size_t>(i)].id)));
    }
    return worst;
}

std::string train_log_csv(const TrainLog& log) {
    std::ostringstream out;
    out << "epoch,lr,train_loss,test_acc,test_f1";
    if (log.task == Task::Segment) out << ",test_iou,test_dsc";
    out << "\n";
    for (const TrainLogRow& r : log.rows) {
        out << r.epoch << ',' << fmt_g17(r.lr) << ',' << fmt_g17(r.train_loss) << ','
            << fmt_g17(r.test_acc) << ',' << fmt_g17(r.test_f1);
        if (log.task == Task::Segment) out << ',' << fmt_g17(r.test_iou) << ',' << fmt_g17(r.test_dsc);
        out << "\n";
    }
    return out.str();
}

} // namespace pf
