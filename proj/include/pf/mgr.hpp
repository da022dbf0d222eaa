#pragma once
#include <string>
#include <vector>

#include "pf/params.hpp"
#include "pf/tape.hpp"

namespace pf {

// Final-layer variants: keep the positional path, or replace it with one or
// C_k channel-graph branches over the value tensor.
enum class MgrMode { Off, SingleGraph, MultiGraph };

MgrMode parse_mgr_mode(const std::string& s);
const char* mgr_mode_name(MgrMode mode);

// Channel-graph reasoning over per-point values: graph i computes
// ReLU(V (a_i + I)) with a learnable C_v x C_v adjacency (self-loop folded
// into the adjacency as the identity), branches concatenated and projected
// back to the block width. Adjacencies start at zero so the branch begins
// as a plain ReLU pass-through.
struct MgrRef {
    int graphs = 0;
    int c_v = 0;
    int out_width = 0;
    std::vector<int> adjacency; // per graph, C_v x C_v
    int proj_w = -1, proj_b = -1;
};

MgrRef make_mgr(ParamStore& store, const std::string& prefix, int graphs, int c_v, int out_width,
                Rng& rng);

// Concatenated graph branches, pre-projection: [M, C_v] -> [M, graphs*C_v].
Value mgr_graphs_concat(Tape& tape, const std::vector<Value>& p, const MgrRef& mgr, Value v_t);

// Branches + output projection: [M, C_v] -> [M, out_width].
Value mgr_forward(Tape& tape, const std::vector<Value>& p, const MgrRef& mgr, Value v_t);

} // namespace pf
