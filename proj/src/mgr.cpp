#include "pf/mgr.hpp"

namespace pf {

MgrMode parse_mgr_mode(const std::string& s) {
    if (s == "off") return MgrMode::Off;
    if (s == "single_graph") return MgrMode::SingleGraph;
    if (s == "multi_graph") return MgrMode::MultiGraph;
    throw ArgumentError("unknown mgr mode '" + s + "' (expected off|single_graph|multi_graph)");
}

const char* mgr_mode_name(MgrMode mode) {
    switch (mode) {
        case MgrMode::Off: return "off";
        case MgrMode::SingleGraph: return "single_graph";
        case MgrMode::MultiGraph: return "multi_graph";
    }
    return "?";
}

MgrRef make_mgr(ParamStore& store, const std::string& prefix, int graphs, int c_v, int out_width,
                Rng& rng) {
    if (graphs < 1) throw ArgumentError("make_mgr: graph count must be >= 1");
    MgrRef mgr;
    mgr.graphs = graphs;
    mgr.c_v = c_v;
    mgr.out_width = out_width;
    for (int g = 0; g < graphs; ++g)
        mgr.adjacency.push_back(store.add(prefix + ".adj" + std::to_string(g), Tensor({c_v, c_v})));
    mgr.proj_w = store.add(prefix + ".proj.w", init_weight(graphs * c_v, out_width, rng));
    mgr.proj_b = store.add(prefix + ".proj.b", Tensor({out_width}));
    return mgr;
}

Value mgr_graphs_concat(Tape& tape, const std::vector<Value>& p, const MgrRef& mgr, Value v_t) {
    if (v_t.val().rank() != 2 || v_t.val().dim(1) != mgr.c_v)
        throw DimensionError("mgr: value tensor " + shape_str(v_t.val().shape()) +
                             " does not match C_v=" + std::to_string(mgr.c_v));
    Value eye = tape.leaf(Tensor::identity(mgr.c_v));
    std::vector<Value> branches;
    branches.reserve(static_cast<size_t>(mgr.graphs));
    for (int g = 0; g < mgr.graphs; ++g) {
        Value adj = p[static_cast<size_t>(mgr.adjacency[static_cast<size_t>(g)])];
        branches.push_back(relu(matmul(v_t, adj + eye)));
    }
    return branches.size() == 1 ? branches[0] : concat_axis(branches, 1);
}

Value mgr_forward(Tape& tape, const std::vector<Value>& p, const MgrRef& mgr, Value v_t) {
    Value cat = mgr_graphs_concat(tape, p, mgr, v_t);
    return matmul(cat, p[static_cast<size_t>(mgr.proj_w)]) + p[static_cast<size_t>(mgr.proj_b)];
}

} // namespace pf
