#include "pf/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace pf {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

int parse_int(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const int x = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected integer, got '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const unsigned long long x = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return static_cast<std::uint64_t>(x);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected unsigned integer, got '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "on" || v == "1") return true;
    if (v == "false" || v == "off" || v == "0") return false;
    throw ConfigError("key '" + key + "': expected boolean, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(v);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    for (const std::string& item : split_list(v)) out.push_back(parse_int(key, item));
    if (out.empty()) throw ConfigError("key '" + key + "': expected a comma-separated list");
    return out;
}

std::string join_ints(const std::vector<int>& xs) {
    std::string s;
    for (size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
    return s;
}

std::string join_strs(const std::vector<std::string>& xs) {
    std::string s;
    for (size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + xs[i];
    return s;
}

std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "task") {
        parse_task(value); // validates
        cfg.task = value;
    } else if (key == "num_classes") cfg.num_classes = parse_int(key, value);
    else if (key == "k") cfg.k = parse_int(key, value);
    else if (key == "sample_sizes") cfg.sample_sizes = parse_int_list(key, value);
    else if (key == "c_k") cfg.c_k = parse_int(key, value);
    else if (key == "c_v") cfg.c_v = parse_int(key, value);
    else if (key == "c_h") cfg.c_h = parse_int(key, value);
    else if (key == "heads") cfg.heads = parse_int(key, value);
    else if (key == "depth") cfg.depth = parse_int(key, value);
    else if (key == "mgr_mode") {
        parse_mgr_mode(value);
        cfg.mgr_mode = value;
    } else if (key == "rpe") cfg.rpe = parse_bool(key, value);
    else if (key == "head_widths") cfg.head_widths = parse_int_list(key, value);
    else if (key == "epochs") cfg.epochs = parse_int(key, value);
    else if (key == "batch_size_train") cfg.batch_size_train = parse_int(key, value);
    else if (key == "batch_size_test") cfg.batch_size_test = parse_int(key, value);
    else if (key == "learning_rate") cfg.learning_rate = parse_double(key, value);
    else if (key == "weight_decay") cfg.weight_decay = parse_double(key, value);
    else if (key == "adam_beta1") cfg.adam_beta1 = parse_double(key, value);
    else if (key == "adam_beta2") cfg.adam_beta2 = parse_double(key, value);
    else if (key == "lr_min") cfg.lr_min = parse_double(key, value);
    else if (key == "augment") cfg.augment = parse_bool(key, value);
    else if (key == "seed") cfg.seed = parse_u64(key, value);
    else if (key == "stop_at_accuracy") cfg.stop_at_accuracy = parse_double(key, value);
    else if (key == "stop_at_class1_iou") cfg.stop_at_class1_iou = parse_double(key, value);
    else if (key == "n_points") cfg.n_points = parse_int(key, value);
    else if (key == "per_class") cfg.per_class = parse_int(key, value);
    else if (key == "noise_sigma") cfg.noise_sigma = parse_double(key, value);
    else if (key == "kinds") {
        cfg.kinds = split_list(value);
        if (cfg.kinds.empty()) throw ConfigError("key 'kinds': expected a comma-separated list");
        for (const std::string& k : cfg.kinds) parse_shape_kind(k);
    } else if (key == "count") cfg.count = parse_int(key, value);
    else if (key == "data_dir") cfg.data_dir = value;
    else if (key == "checkpoint") cfg.checkpoint = value;
    else if (key == "format") {
        parse_cloud_format(value);
        cfg.format = value;
    } else {
        throw ConfigError("unknown key '" + key + "'");
    }
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key or value");
        try {
            apply_config_entry(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const ArgumentError& e) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

ModelConfig RunConfig::model_config() const {
    ModelConfig m;
    m.task = parse_task(task);
    m.num_classes = num_classes;
    m.k_neighbors = k;
    m.sample_sizes = sample_sizes;
    m.c_k = c_k;
    m.c_v = c_v;
    m.c_h = c_h;
    m.heads = heads;
    m.depth = depth;
    m.mgr_mode = parse_mgr_mode(mgr_mode);
    m.use_rpe = rpe;
    m.head_widths = head_widths;
    return m;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.epochs = epochs;
    t.batch_size_train = batch_size_train;
    t.batch_size_test = batch_size_test;
    t.learning_rate = learning_rate;
    t.weight_decay = weight_decay;
    t.adam_beta1 = adam_beta1;
    t.adam_beta2 = adam_beta2;
    t.lr_min = lr_min;
    t.augment = augment;
    t.seed = seed;
    t.stop_at_accuracy = stop_at_accuracy;
    t.stop_at_class1_iou = stop_at_class1_iou;
    return t;
}

std::string config_text(const RunConfig& c) {
    std::ostringstream out;
    out << "task = " << c.task << "\n";
    out << "num_classes = " << c.num_classes << "\n";
    out << "k = " << c.k << "\n";
    out << "sample_sizes = " << join_ints(c.sample_sizes) << "\n";
    out << "c_k = " << c.c_k << "\n";
    out << "c_v = " << c.c_v << "\n";
    out << "c_h = " << c.c_h << "\n";
    out << "heads = " << c.heads << "\n";
    out << "depth = " << c.depth << "\n";
    out << "mgr_mode = " << c.mgr_mode << "\n";
    out << "rpe = " << (c.rpe ? "true" : "false") << "\n";
    out << "head_widths = " << join_ints(c.head_widths) << "\n";
    out << "epochs = " << c.epochs << "\n";
    out << "batch_size_train = " << c.batch_size_train << "\n";
    out << "batch_size_test = " << c.batch_size_test << "\n";
    out << "learning_rate = " << fmt_g17(c.learning_rate) << "\n";
    out << "weight_decay = " << fmt_g17(c.weight_decay) << "\n";
    out << "adam_beta1 = " << fmt_g17(c.adam_beta1) << "\n";
    out << "adam_beta2 = " << fmt_g17(c.adam_beta2) << "\n";
    out << "lr_min = " << fmt_g17(c.lr_min) << "\n";
    out << "augment = " << (c.augment ? "true" : "false") << "\n";
    out << "seed = " << c.seed << "\n";
    out << "stop_at_accuracy = " << fmt_g17(c.stop_at_accuracy) << "\n";
    out << "stop_at_class1_iou = " << fmt_g17(c.stop_at_class1_iou) << "\n";
    out << "n_points = " << c.n_points << "\n";
    out << "per_class = " << c.per_class << "\n";
    out << "noise_sigma = " << fmt_g17(c.noise_sigma) << "\n";
    out << "kinds = " << join_strs(c.kinds) << "\n";
    out << "count = " << c.count << "\n";
    if (!c.data_dir.empty()) out << "data_dir = " << c.data_dir << "\n";
    if (!c.checkpoint.empty()) out << "checkpoint = " << c.checkpoint << "\n";
    out << "format = " << c.format << "\n";
    return out.str();
}

} // namespace pf
