// Command-line front end: dataset generation, training, evaluation,
// attention-core benchmarking, and whole-model gradient verification.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure. Every failure
// prints a single machine-parsable line "ERROR:<code>: message".

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pf/complexity.hpp"
#include "pf/config.hpp"
#include "pf/network.hpp"

namespace {

using namespace pf;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CliArgs {
    std::string command;
    std::string config_path;
    std::string out_dir;
    std::string data_dir;
    std::string checkpoint_path;
    std::string n_list;
    std::string mode;
    std::optional<std::uint64_t> seed;
    std::vector<std::pair<std::string, std::string>> overrides;
};

const char* kUsage =
    "usage: pointformer <gen|train|eval|bench|gradcheck> --seed <u64> --out <dir>\n"
    "                   [--config <file>] [--set key=value ...] [--data <dir>]\n"
    "                   [--checkpoint <file>] [--n-list 256,512,...] [--mode lambda|naive]\n";

CliArgs parse_args(int argc, char** argv) {
    if (argc < 2) throw UsageError("missing subcommand");
    CliArgs args;
    args.command = argv[1];
    if (args.command != "gen" && args.command != "train" && args.command != "eval" &&
        args.command != "bench" && args.command != "gradcheck")
        throw UsageError("unknown subcommand '" + args.command + "'");

    auto need_value = [&](int& i, const char* flag) -> std::string {
        if (i + 1 >= argc) throw UsageError(std::string("flag '") + flag + "' needs a value");
        return argv[++i];
    };
    for (int i = 2; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config") args.config_path = need_value(i, "--config");
        else if (a == "--out") args.out_dir = need_value(i, "--out");
        else if (a == "--data") args.data_dir = need_value(i, "--data");
        else if (a == "--checkpoint") args.checkpoint_path = need_value(i, "--checkpoint");
        else if (a == "--n-list") args.n_list = need_value(i, "--n-list");
        else if (a == "--mode") args.mode = need_value(i, "--mode");
        else if (a == "--seed") {
            const std::string v = need_value(i, "--seed");
            try {
                size_t used = 0;
                args.seed = std::stoull(v, &used);
                if (used != v.size()) throw std::invalid_argument("");
            } catch (const std::exception&) {
                throw UsageError("--seed expects an unsigned integer, got '" + v + "'");
            }
        } else if (a == "--set") {
            const std::string v = need_value(i, "--set");
            const size_t eq = v.find('=');
            if (eq == std::string::npos)
                throw UsageError("--set expects key=value, got '" + v + "'");
            args.overrides.emplace_back(v.substr(0, eq), v.substr(eq + 1));
        } else {
            throw UsageError("unknown flag '" + a + "'");
        }
    }
    if (!args.seed) throw UsageError("--seed is required");
    if (args.out_dir.empty()) throw UsageError("--out is required");
    return args;
}

RunConfig load_config(const CliArgs& args) {
    RunConfig cfg = args.config_path.empty() ? RunConfig{} : parse_config_file(args.config_path);
    for (const auto& [key, value] : args.overrides) apply_config_entry(cfg, key, value);
    cfg.seed = *args.seed;
    if (!args.data_dir.empty()) cfg.data_dir = args.data_dir;
    if (!args.checkpoint_path.empty()) cfg.checkpoint = args.checkpoint_path;
    return cfg;
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << content;
}

std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Dataset generate_dataset(const RunConfig& cfg) {
    if (parse_task(cfg.task) == Task::Classify) {
        std::vector<ShapeKind> kinds;
        for (const std::string& k : cfg.kinds) kinds.push_back(parse_shape_kind(k));
        return gen_classification_set(kinds, cfg.per_class, cfg.n_points, cfg.noise_sigma, cfg.seed);
    }
    return gen_segmentation_set(cfg.count, cfg.n_points, cfg.seed);
}

int cmd_gen(const CliArgs& args) {
    RunConfig cfg = load_config(args);
    ensure_out_dir(args.out_dir);
    Dataset ds = generate_dataset(cfg);
    write_dataset(args.out_dir, ds, cfg.cloud_format());
    std::cout << "wrote " << ds.samples.size() << " samples (" << ds.indices(Split::Train).size()
              << " train / " << ds.indices(Split::Test).size() << " test) to " << args.out_dir
              << "\n";
    return 0;
}

std::vector<std::pair<std::string, Tensor>> running_stats_aux(const Model& model) {
    std::vector<std::pair<std::string, Tensor>> aux;
    for (size_t i = 0; i < model.running_mean.size(); ++i) {
        aux.emplace_back("running_mean." + std::to_string(i), model.running_mean[i]);
        aux.emplace_back("running_var." + std::to_string(i), model.running_var[i]);
    }
    return aux;
}

int cmd_train(const CliArgs& args) {
    RunConfig cfg = load_config(args);
    if (cfg.data_dir.empty()) throw UsageError("train needs --data or a data_dir config key");
    ensure_out_dir(args.out_dir);
    Dataset ds = read_dataset(cfg.data_dir);

    Model model = build_model(cfg.model_config(), cfg.seed);
    TrainLog log = train(model, ds, cfg.train_config());
    write_text(args.out_dir + "/train_log.csv", train_log_csv(log));
    write_checkpoint(args.out_dir + "/checkpoint.bin", model.store, running_stats_aux(model),
                     config_text(cfg));

    const TrainLogRow& last = log.rows.back();
    std::cout << "trained " << log.rows.size() << " epochs; final test_acc="
              << fmt_g17(last.test_acc) << " test_f1=" << fmt_g17(last.test_f1);
    if (model.cfg.task == Task::Segment)
        std::cout << " test_iou=" << fmt_g17(last.test_iou) << " test_dsc=" << fmt_g17(last.test_dsc);
    std::cout << "\n";
    return 0;
}

std::string metrics_csv(const MetricsReport& r, Task task) {
    std::ostringstream out;
    out << "metric,class,value\n";
    out << "accuracy,," << fmt_g17(r.accuracy) << "\n";
    out << "f1,summary," << fmt_g17(r.f1_summary) << "\n";
    for (int c = 0; c < r.num_classes; ++c) {
        out << "per_class_accuracy," << c << ','
            << (metric_defined(r.per_class_accuracy[static_cast<size_t>(c)])
                    ? fmt_g17(r.per_class_accuracy[static_cast<size_t>(c)])
                    : "undefined")
            << "\n";
        out << "f1," << c << ','
            << (metric_defined(r.f1[static_cast<size_t>(c)]) ? fmt_g17(r.f1[static_cast<size_t>(c)])
                                                             : "undefined")
            << "\n";
    }
    if (task == Task::Segment) {
        for (int c = 0; c < r.num_classes; ++c) {
            out << "iou," << c << ','
                << (metric_defined(r.iou[static_cast<size_t>(c)])
                        ? fmt_g17(r.iou[static_cast<size_t>(c)])
                        : "undefined")
                << "\n";
            out << "dsc," << c << ','
                << (metric_defined(r.dsc[static_cast<size_t>(c)])
                        ? fmt_g17(r.dsc[static_cast<size_t>(c)])
                        : "undefined")
                << "\n";
        }
        out << "iou,mean," << fmt_g17(r.mean_iou) << "\n";
        out << "dsc,mean," << fmt_g17(r.mean_dsc) << "\n";
    }
    return out.str();
}

int cmd_eval(const CliArgs& args) {
    RunConfig cli_cfg = load_config(args);
    if (cli_cfg.checkpoint.empty()) throw UsageError("eval needs --checkpoint or a checkpoint config key");
    Checkpoint ck = read_checkpoint(cli_cfg.checkpoint);
    RunConfig cfg = parse_config_text(ck.config_text, cli_cfg.checkpoint + "#config");
    if (!cli_cfg.data_dir.empty()) cfg.data_dir = cli_cfg.data_dir;
    if (cfg.data_dir.empty()) throw UsageError("eval needs --data or a data_dir config key");
    ensure_out_dir(args.out_dir);

    Model model = build_model(cfg.model_config(), cfg.seed);
    for (const auto& [name, tensor] : ck.tensors) {
        if (name.rfind("running_mean.", 0) == 0) {
            model.running_mean.at(std::stoul(name.substr(13))) = tensor;
        } else if (name.rfind("running_var.", 0) == 0) {
            model.running_var.at(std::stoul(name.substr(12))) = tensor;
        } else {
            const int idx = model.store.find(name);
            if (idx < 0) throw ParseError(cli_cfg.checkpoint + ": unknown tensor '" + name + "'");
            if (!model.store.tensor(idx).same_shape(tensor))
                throw ParseError(cli_cfg.checkpoint + ": tensor '" + name + "' shape mismatch");
            model.store.tensor(idx) = tensor;
        }
    }

    Dataset ds = read_dataset(cfg.data_dir);
    MetricsReport report = evaluate(model, ds, Split::Test, cfg.batch_size_test);
    const std::string csv = metrics_csv(report, model.cfg.task);
    write_text(args.out_dir + "/metrics.csv", csv);
    std::cout << csv;
    return 0;
}

int cmd_bench(const CliArgs& args) {
    RunConfig cfg = load_config(args);
    if (args.n_list.empty()) throw UsageError("bench needs --n-list (e.g. 256,512,1024)");
    if (args.mode != "lambda" && args.mode != "naive")
        throw UsageError("bench needs --mode lambda|naive, got '" + args.mode + "'");
    ensure_out_dir(args.out_dir);

    std::vector<int> n_list;
    std::istringstream in(args.n_list);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        try {
            size_t used = 0;
            const int n = std::stoi(tok, &used);
            if (used != tok.size() || n < 1) throw std::invalid_argument("");
            n_list.push_back(n);
        } catch (const std::exception&) {
            throw UsageError("--n-list expects positive integers, got '" + tok + "'");
        }
    }

    BenchConfig bc;
    bc.k = cfg.k;
    bc.c_k = cfg.c_k;
    bc.c_v = cfg.c_v;
    bc.heads = cfg.heads;
    const std::vector<BenchRow> rows = run_bench(n_list, args.mode == "lambda", bc, cfg.seed);

    std::ostringstream out;
    out << "N,mode,flops,wall_ms\n";
    for (const BenchRow& r : rows)
        out << r.n << ',' << (r.lambda_mode ? "lambda" : "naive") << ',' << r.flops << ','
            << fmt_g17(r.wall_ms) << "\n";
    write_text(args.out_dir + "/bench.csv", out.str());
    std::cout << out.str();
    return 0;
}

int cmd_gradcheck(const CliArgs& args) {
    RunConfig cfg = load_config(args);
    ensure_out_dir(args.out_dir);

    // tiny verification model over a two-sample batch
    ModelConfig mc;
    mc.task = Task::Classify;
    mc.num_classes = 2;
    mc.k_neighbors = 4;
    mc.sample_sizes = {16, 8};
    mc.c_k = 4;
    mc.c_v = 4;
    mc.c_h = 4;
    mc.heads = 2;
    mc.depth = 2;
    mc.mgr_mode = MgrMode::MultiGraph;
    mc.head_widths = {8};
    Model model = build_model(mc, cfg.seed);
    perturb_params(model.store, 0.05, cfg.seed + 1);

    Dataset ds = gen_classification_set({ShapeKind::Sphere, ShapeKind::Torus}, 2, 32, 0.01, cfg.seed);
    std::vector<const PointCloud*> batch = {&ds.samples[0], &ds.samples[2]};
    const double err = gradcheck_max_rel_error(model, batch, 1e-5);

    const std::string line = "max_relative_error=" + fmt_g17(err) + "\n";
    write_text(args.out_dir + "/gradcheck.txt", line);
    std::cout << line;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        const CliArgs args = parse_args(argc, argv);
        if (args.command == "gen") return cmd_gen(args);
        if (args.command == "train") return cmd_train(args);
        if (args.command == "eval") return cmd_eval(args);
        if (args.command == "bench") return cmd_bench(args);
        return cmd_gradcheck(args);
    } catch (const UsageError& e) {
        std::cerr << "ERROR:usage: " << e.what() << "\n" << kUsage;
        return 1;
    } catch (const pf::ConfigError& e) {
        std::cerr << "ERROR:config: " << e.what() << "\n";
        return 1;
    } catch (const pf::ArgumentError& e) {
        std::cerr << "ERROR:usage: " << e.what() << "\n";
        return 1;
    } catch (const pf::IoError& e) {
        std::cerr << "ERROR:io: " << e.what() << "\n";
        return 2;
    } catch (const pf::ParseError& e) {
        std::cerr << "ERROR:parse: " << e.what() << "\n";
        return 2;
    } catch (const pf::NumericError& e) {
        std::cerr << "ERROR:numeric: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "ERROR:internal: " << e.what() << "\n";
        return 2;
    }
}
