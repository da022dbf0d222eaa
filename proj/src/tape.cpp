#include "pf/tape.hpp"

#include <cmath>
#include <cstring>

namespace pf {

const Tensor& Value::val() const { return tape->val(id); }
const std::vector<int>& Value::shape() const { return tape->val(id).shape(); }

namespace {

// Right-aligned broadcast of b onto a's shape: missing leading axes and
// axes of length 1 in b repeat. b must broadcast exactly to a's shape.
struct Broadcast {
    bool same = false;
    std::vector<std::int64_t> bstride; // per a-axis; 0 where b repeats
    std::vector<int> ashape;

    std::int64_t bindex(std::int64_t i) const {
        std::int64_t bi = 0, rem = i;
        for (int ax = static_cast<int>(ashape.size()) - 1; ax >= 0; --ax) {
            std::int64_t q = rem % ashape[static_cast<size_t>(ax)];
            rem /= ashape[static_cast<size_t>(ax)];
            bi += q * bstride[static_cast<size_t>(ax)];
        }
        return bi;
    }
};

Broadcast make_broadcast(const Tensor& a, const Tensor& b, const char* opname) {
    Broadcast bc;
    bc.ashape = a.shape();
    if (a.same_shape(b)) {
        bc.same = true;
        return bc;
    }
    const int ra = a.rank(), rb = b.rank();
    if (rb > ra)
        throw DimensionError(std::string(opname) + " shape mismatch: " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    bc.bstride.assign(static_cast<size_t>(ra), 0);
    std::int64_t stride = 1;
    for (int ax = rb - 1; ax >= 0; --ax) {
        const int aax = ax + (ra - rb);
        const int bd = b.dim(ax);
        if (bd != 1 && bd != a.dim(aax))
            throw DimensionError(std::string(opname) + " shape mismatch: " + shape_str(a.shape()) +
                                 " vs " + shape_str(b.shape()));
        bc.bstride[static_cast<size_t>(aax)] = (bd == 1) ? 0 : stride;
        stride *= bd;
    }
    return bc;
}

// outer * len * inner decomposition around one axis.
struct AxisSplit {
    std::int64_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_axis(const std::vector<int>& shape, int axis, const char* opname) {
    if (axis < 0 || axis >= static_cast<int>(shape.size()))
        throw DimensionError(std::string(opname) + ": axis " + std::to_string(axis) +
                             " out of range for shape " + shape_str(shape));
    AxisSplit s;
    for (int i = 0; i < axis; ++i) s.outer *= shape[static_cast<size_t>(i)];
    s.len = shape[static_cast<size_t>(axis)];
    for (size_t i = static_cast<size_t>(axis) + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

std::vector<int> drop_axis(const std::vector<int>& shape, int axis) {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(shape.size()); ++i)
        if (i != axis) out.push_back(shape[static_cast<size_t>(i)]);
    if (out.empty()) out.push_back(1);
    return out;
}

} // namespace

Value Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return Value{this, static_cast<int>(nodes_.size()) - 1};
}

Value Tape::leaf(Tensor v) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(v);
    return push(std::move(n));
}

Value Tape::param(Tensor v) {
    Node n;
    n.op = Op::Leaf;
    n.trainable = true;
    n.value = std::move(v);
    Value out = push(std::move(n));
    params_.push_back(out.id);
    return out;
}

Value Tape::add(Value a, Value b) {
    const Tensor& ta = val(a.id);
    const Tensor& tb = val(b.id);
    Broadcast bc = make_broadcast(ta, tb, "add");
    Tensor out(ta.shape());
    const std::int64_t n = ta.numel();
    if (bc.same) {
        for (std::int64_t i = 0; i < n; ++i) out[i] = ta[i] + tb[i];
    } else {
        for (std::int64_t i = 0; i < n; ++i) out[i] = ta[i] + tb[bc.bindex(i)];
    }
    Node nd;
    nd.op = Op::Add;
    nd.inputs = {a.id, b.id};
    nd.value = std::move(out);
    return push(std::move(nd));
}

Value Tape::sub(Value a, Value b) {
    const Tensor& ta = val(a.id);
    const Tensor& tb = val(b.id);
    Broadcast bc = make_broadcast(ta, tb, "sub");
    Tensor out(ta.shape());
    const std::int64_t n = ta.numel();
    if (bc.same) {
        for (std::int64_t i = 0; i < n; ++i) out[i] = ta[i] - tb[i];
    } else {
        for (std::int64_t i = 0; i < n; ++i) out[i] = ta[i] - tb[bc.bindex(i)];
    }
    Node nd;
    nd.op = Op::Sub;
    nd.inputs = {a.id, b.id};
    nd.value = std::move(out);
    return push(std::move(nd));
}

Value Tape::mul(Value a, Value b) {
    const Tensor& ta = val(a.id);
    const Tensor& tb = val(b.id);
    Broadcast bc = make_broadcast(ta, tb, "mul");
    Tensor out(ta.shape());
    const std::int64_t n = ta.numel();
    if (bc.same) {
        for (std::int64_t i = 0; i < n; ++i) out[i] = ta[i] * tb[i];
    } else {
        for (std::int64_t i = 0; i < n; ++i) out[i] = ta[i] * tb[bc.bindex(i)];
    }
    Node nd;
    nd.op = Op::Mul;
    nd.inputs = {a.id, b.id};
    nd.value = std::move(out);
    return push(std::move(nd));
}

Value Tape::scale(Value a, double s) {
    const Tensor& ta = val(a.id);
    Tensor out(ta.shape());
    const std::int64_t n = ta.numel();
    for (std::int64_t i = 0; i < n; ++i) out[i] = ta[i] * s;
    Node nd;
    nd.op = Op::Scale;
    nd.inputs = {a.id};
    nd.scalar = s;
    nd.value = std::move(out);
    return push(std::move(nd));
}

Value Tape::matmul(Value a, Value b) {
    const Tensor& ta = val(a.id);
    const Tensor& tb = val(b.id);
    const auto bad = [&] {
        return DimensionError("matmul shape mismatch: " + shape_str(ta.shape()) + " x " +
                              shape_str(tb.shape()));
    };
    Tensor out;
    if (ta.rank() >= 2 && tb.rank() == 2) {
        // trailing axis of a contracts with b; leading axes are row batches
        const int k = ta.dim(ta.rank() - 1);
        if (k != tb.dim(0)) throw bad();
        const int n = tb.dim(1);
        const std::int64_t rows = ta.numel() / k;
        std::vector<int> oshape(ta.shape());
        oshape.back() = n;
        out = Tensor(oshape);
        mm_nn_acc(ta.data(), tb.data(), out.data(), static_cast<int>(rows), k, n);
    } else if (ta.rank() == 3 && tb.rank() == 3 && ta.dim(0) == tb.dim(0)) {
        const int bsz = ta.dim(0), m = ta.dim(1), k = ta.dim(2);
        if (k != tb.dim(1)) throw bad();
        const int n = tb.dim(2);
        out = Tensor({bsz, m, n});
        for (int bi = 0; bi < bsz; ++bi)
            mm_nn_acc(ta.data() + static_cast<std::int64_t>(bi) * m * k,
                      tb.data() + static_cast<std::int64_t>(bi) * k * n,
                      out.data() + static_cast<std::int64_t>(bi) * m * n, m, k, n);
    } else {
        throw bad();
    }
    Node nd;
    nd.op = Op::MatMul;
    nd.inputs = {a.id, b.id};
    nd.value = std::move(out);
    return push(std::move(nd));
}

Value Tape::softmax_axis(Value x, int axis) {
    const Tensor& tx = val(x.id);
    AxisSplit s = split_axis(tx.shape(), axis, "softmax_axis");
    Tensor out(tx.shape());
    for (std::int64_t o = 0; o < s.outer; ++o) {
        for (std::int64_t in = 0; in < s.inner; ++in) {
            const std::int64_t base = (o * s.len) * s.inner + in;
            double m = tx[base];
            for (std::int64_t l = 1; l < s.len; ++l)
                m = std::max(m, tx[base + l * s.inner]);
            double sum = 0.0;
            for (std::int64_t l = 0; l < s.len; ++l) {
                const double e = std::exp(tx[base + l * s.inner] - m);
                out[base + l * s.inner] = e;
                sum += e;
            }
            for (std::int64_t l = 0; l < s.len; ++l) out[base + l * s.inner] /= sum;
        }
    }
    Node nd;
    nd.op = Op::Softmax;
    nd.inputs = {x.id};
    nd.axis = axis;
    nd.value = std::move(out);
    return push(std::move(nd));
}

Value Tape::relu(Value x) {
    const Tensor& tx = val(x.id);
    Tensor out(tx.shape());
    const std::int64_t n = tx.numel();
    for (std::int64_t i = 0; i < n; ++i) out[i] = tx[i] > 0.0 ? tx[i] : 0.0;
    Node nd;
    nd.op = Op::Relu;
    nd.inputs = {x.id};
    nd.value = std::move(out);
    return push(std::move(nd));
}

Value Tape::log(Value x) {
    const Tensor& tx = val(x.id);
    Tensor out(tx.shape());
    const std::int64_t n = tx.numel();
    for (std::int64_t i = 0; i < n; ++i) out[i] = std::log(tx[i]);
    Node nd;
    nd.op = Op::Log;
    nd.inputs = {x.id};
    nd.value = std::move(out);
    return push(std::move(nd));
}

Value Tape::exp(Value x) {
    const Tensor& tx = val(x.id);
    Tensor out(tx.shape());
    const std::int64_t n = tx.numel();
    for (std::int64_t i = 0; i < n; ++i) out[i] = std::exp(tx[i]);
    Node nd;
    nd.op = Op::Exp;
    nd.inputs = {x.id};
    nd.value = std::move(out);
    return push(std::move(nd));
}

Value Tape::max_over_axis(Value x, int axis) {
    const Tensor& tx = val(x.id);
    AxisSplit s = split_axis(tx.shape(), axis, "max_over_axis");
    Tensor out(drop_axis(tx.shape(), axis));
    std::vector<std::int64_t> arg(static_cast<size_t>(out.numel()));
    std::int64_t oi = 0;
    for (std::int64_t o = 0; o < s.outer; ++o) {
        for (std::int64_t in = 0; in < s.inner; ++in, ++oi) {
            const std::int64_t base = (o * s.len) * s.inner + in;
            double m = tx[base];
            std::int64_t am = base;
            // ties keep the first maximal element
            for (std::int64_t l = 1; l < s.len; ++l) {
                const double v = tx[base + l * s.inner];
                if (v > m) {
                    m = v;
                    am = base + l * s.inner;
                }
            }
            out[oi] = m;
            arg[static_cast<size_t>(oi)] = am;
        }
    }
    Node nd;
    nd.op = Op::MaxReduce;
    nd.inputs = {x.id};
    nd.axis = axis;
    nd.arg = std::move(arg);
    nd.value = std::move(out);
    return push(std::move(nd));
}

Value Tape::mean_over_axis(Value x, int axis) {
    const Tensor& tx = val(x.id);
    AxisSplit s = split_axis(tx.shape(), axis, "mean_over_axis");
    Tensor out(drop_axis(tx.shape(), axis));
    std::int64_t oi = 0;
    for (std::int64_t o = 0; o < s.outer; ++o) {
        for (std::int64_t in = 0; in < s.inner; ++in, ++oi) {
            const std::int64_t base = (o * s.len) * s.inner + in;
            double acc = 0.0;
            for (std::int64_t l = 0; l < s.len; ++l) acc += tx[base + l * s.inner];
            out[oi] = acc / static_cast<double>(s.len);
        }
    }
    Node nd;
    nd.op = Op::MeanReduce;
    nd.inputs = {x.id};
    nd.axis = axis;
    nd.value = std::move(out);
    return push(std::move(nd));
}

Value Tape::concat_axis(const std::vector<Value>& xs, int axis) {
    if (xs.empty()) throw ArgumentError("concat_axis: no inputs");
    const Tensor& t0 = val(xs[0].id);
    AxisSplit s0 = split_axis(t0.shape(), axis, "concat_axis");
    int total = 0;
    for (const Value& v : xs) {
        const Tensor& t = val(v.id);
        if (t.rank() != t0.rank())
            throw DimensionError("concat_axis rank mismatch: " + shape_str(t0.shape()) + " vs " +
                                 shape_str(t.shape()));
        for (int ax = 0; ax < t.rank(); ++ax)
            if (ax != axis && t.dim(ax) != t0.dim(ax))
                throw DimensionError("concat_axis shape mismatch: " + shape_str(t0.shape()) +
                                     " vs " + shape_str(t.shape()));
        total += t.dim(axis);
    }
    std::vector<int> oshape(t0.shape());
    oshape[static_cast<size_t>(axis)] = total;
    Tensor out(oshape);
    const std::int64_t orow = static_cast<std::int64_t>(total) * s0.inner;
    std::int64_t off = 0;
    Node nd;
    nd.op = Op::Concat;
    nd.axis = axis;
    for (const Value& v : xs) {
        const Tensor& t = val(v.id);
        const std::int64_t len = t.dim(axis);
        for (std::int64_t o = 0; o < s0.outer; ++o)
            std::memcpy(out.data() + o * orow + off * s0.inner,
                        t.data() + o * len * s0.inner,
                        static_cast<size_t>(len * s0.inner) * sizeof(double));
        off += len;
        nd.inputs.push_back(v.id);
    }
    nd.value = std::move(out);
    return push(std::move(nd));
}

Value Tape::gather_rows(Value x, const std::vector<int>& rows) {
    const Tensor& tx = val(x.id);
    if (tx.rank() < 1) throw DimensionError("gather_rows: rank-0 input");
    const std::int64_t nrows = tx.dim(0);
    const std::int64_t rowsz = tx.numel() / nrows;
    std::vector<int> oshape(tx.shape());
    oshape[0] = static_cast<int>(rows.size());
    Tensor out(oshape);
    Node nd;
    nd.op = Op::GatherRows;
    nd.inputs = {x.id};
    nd.arg.reserve(rows.size());
    for (size_t r = 0; r < rows.size(); ++r) {
        const int src = rows[r];
        if (src < 0 || src >= nrows)
            throw ArgumentError("gather_rows: index " + std::to_string(src) + " out of range [0, " +
                                std::to_string(nrows) + ")");
        std::memcpy(out.data() + static_cast<std::int64_t>(r) * rowsz,
                    tx.data() + static_cast<std::int64_t>(src) * rowsz,
                    static_cast<size_t>(rowsz) * sizeof(double));
        nd.arg.push_back(src);
    }
    nd.value = std::move(out);
    return push(std::move(nd));
}

Value Tape::reshape(Value x, std::vector<int> new_shape) {
    const Tensor& tx = val(x.id);
    if (shape_numel(new_shape) != tx.numel())
        throw DimensionError("reshape: cannot view " + shape_str(tx.shape()) + " as " +
                             shape_str(new_shape));
    Node nd;
    nd.op = Op::Reshape;
    nd.inputs = {x.id};
    nd.value = Tensor(std::move(new_shape), tx.vec());
    return push(std::move(nd));
}

Value Tape::transpose_last2(Value x) {
    const Tensor& tx = val(x.id);
    if (tx.rank() < 2) throw DimensionError("transpose_last2: needs rank >= 2, got " + shape_str(tx.shape()));
    const int p = tx.dim(tx.rank() - 2);
    const int q = tx.dim(tx.rank() - 1);
    std::vector<int> oshape(tx.shape());
    std::swap(oshape[oshape.size() - 2], oshape[oshape.size() - 1]);
    Tensor out(oshape);
    const std::int64_t batches = tx.numel() / (static_cast<std::int64_t>(p) * q);
    for (std::int64_t b = 0; b < batches; ++b) {
        const double* src = tx.data() + b * p * q;
        double* dst = out.data() + b * p * q;
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < q; ++j)
                dst[static_cast<std::int64_t>(j) * p + i] = src[static_cast<std::int64_t>(i) * q + j];
    }
    Node nd;
    nd.op = Op::Transpose2;
    nd.inputs = {x.id};
    nd.value = std::move(out);
    return push(std::move(nd));
}

std::map<int, Tensor> Tape::backward(int loss_id) const {
    if (loss_id < 0 || loss_id >= size())
        throw ArgumentError("backward: loss node " + std::to_string(loss_id) + " not on tape");
    if (nodes_[static_cast<size_t>(loss_id)].value.numel() != 1)
        throw ArgumentError("backward: loss must be scalar, got shape " +
                            shape_str(nodes_[static_cast<size_t>(loss_id)].value.shape()));

    std::vector<Tensor> adj(nodes_.size());
    auto grad_of = [&](int id) -> Tensor& {
        Tensor& g = adj[static_cast<size_t>(id)];
        if (g.empty()) g = Tensor(nodes_[static_cast<size_t>(id)].value.shape());
        return g;
    };
    grad_of(loss_id)[0] = 1.0;

    for (int id = loss_id; id >= 0; --id) {
        const Node& nd = nodes_[static_cast<size_t>(id)];
        const Tensor& g = adj[static_cast<size_t>(id)];
        if (g.empty()) continue;
        switch (nd.op) {
            case Op::Leaf:
                break;
            case Op::Add: {
                const Tensor& ta = nodes_[static_cast<size_t>(nd.inputs[0])].value;
                const Tensor& tb = nodes_[static_cast<size_t>(nd.inputs[1])].value;
                Tensor& ga = grad_of(nd.inputs[0]);
                Tensor& gb = grad_of(nd.inputs[1]);
                Broadcast bc = make_broadcast(ta, tb, "add");
                const std::int64_t n = ta.numel();
                if (bc.same) {
                    for (std::int64_t i = 0; i < n; ++i) { ga[i] += g[i]; gb[i] += g[i]; }
                } else {
                    for (std::int64_t i = 0; i < n; ++i) { ga[i] += g[i]; gb[bc.bindex(i)] += g[i]; }
                }
                break;
            }
            case Op::Sub: {
                const Tensor& ta = nodes_[static_cast<size_t>(nd.inputs[0])].value;
                const Tensor& tb = nodes_[static_cast<size_t>(nd.inputs[1])].value;
                Tensor& ga = grad_of(nd.inputs[0]);
                Tensor& gb = grad_of(nd.inputs[1]);
                Broadcast bc = make_broadcast(ta, tb, "sub");
                const std::int64_t n = ta.numel();
                if (bc.same) {
                    for (std::int64_t i = 0; i < n; ++i) { ga[i] += g[i]; gb[i] -= g[i]; }
                } else {
                    for (std::int64_t i = 0; i < n; ++i) { ga[i] += g[i]; gb[bc.bindex(i)] -= g[i]; }
                }
                break;
            }
            case Op::Mul: {
                const Tensor& ta = nodes_[static_cast<size_t>(nd.inputs[0])].value;
                const Tensor& tb = nodes_[static_cast<size_t>(nd.inputs[1])].value;
                Tensor& ga = grad_of(nd.inputs[0]);
                Tensor& gb = grad_of(nd.inputs[1]);
                Broadcast bc = make_broadcast(ta, tb, "mul");
                const std::int64_t n = ta.numel();
                if (bc.same) {
                    for (std::int64_t i = 0; i < n; ++i) { ga[i] += g[i] * tb[i]; gb[i] += g[i] * ta[i]; }
                } else {
                    for (std::int64_t i = 0; i < n; ++i) {
                        const std::int64_t bi = bc.bindex(i);
                        ga[i] += g[i] * tb[bi];
                        gb[bi] += g[i] * ta[i];
                    }
                }
                break;
            }
            case Op::Scale: {
                Tensor& ga = grad_of(nd.inputs[0]);
                const std::int64_t n = ga.numel();
                for (std::int64_t i = 0; i < n; ++i) ga[i] += g[i] * nd.scalar;
                break;
            }
            case Op::MatMul: {
                const Tensor& ta = nodes_[static_cast<size_t>(nd.inputs[0])].value;
                const Tensor& tb = nodes_[static_cast<size_t>(nd.inputs[1])].value;
                Tensor& ga = grad_of(nd.inputs[0]);
                Tensor& gb = grad_of(nd.inputs[1]);
                if (tb.rank() == 2) {
                    const int k = ta.dim(ta.rank() - 1);
                    const int n = tb.dim(1);
                    const int rows = static_cast<int>(ta.numel() / k);
                    mm_nt_acc(g.data(), tb.data(), ga.data(), rows, n, k);
                    mm_tn_acc(ta.data(), g.data(), gb.data(), rows, k, n);
                } else {
                    const int bsz = ta.dim(0), m = ta.dim(1), k = ta.dim(2), n = tb.dim(2);
                    for (int bi = 0; bi < bsz; ++bi) {
                        const std::int64_t ao = static_cast<std::int64_t>(bi) * m * k;
                        const std::int64_t bo = static_cast<std::int64_t>(bi) * k * n;
                        const std::int64_t co = static_cast<std::int64_t>(bi) * m * n;
                        mm_nt_acc(g.data() + co, tb.data() + bo, ga.data() + ao, m, n, k);
                        mm_tn_acc(ta.data() + ao, g.data() + co, gb.data() + bo, m, k, n);
                    }
                }
                break;
            }
            case Op::Softmax: {
                const Tensor& y = nd.value;
                Tensor& gx = grad_of(nd.inputs[0]);
                AxisSplit s = split_axis(y.shape(), nd.axis, "softmax_axis");
                for (std::int64_t o = 0; o < s.outer; ++o) {
                    for (std::int64_t in = 0; in < s.inner; ++in) {
                        const std::int64_t base = (o * s.len) * s.inner + in;
                        double dot = 0.0;
                        for (std::int64_t l = 0; l < s.len; ++l)
                            dot += g[base + l * s.inner] * y[base + l * s.inner];
                        for (std::int64_t l = 0; l < s.len; ++l) {
                            const std::int64_t ix = base + l * s.inner;
                            gx[ix] += y[ix] * (g[ix] - dot);
                        }
                    }
                }
                break;
            }
            case Op::Relu: {
                const Tensor& tx = nodes_[static_cast<size_t>(nd.inputs[0])].value;
                Tensor& gx = grad_of(nd.inputs[0]);
                const std::int64_t n = tx.numel();
                for (std::int64_t i = 0; i < n; ++i)
                    if (tx[i] > 0.0) gx[i] += g[i];
                break;
            }
            case Op::Log: {
                const Tensor& tx = nodes_[static_cast<size_t>(nd.inputs[0])].value;
                Tensor& gx = grad_of(nd.inputs[0]);
                const std::int64_t n = tx.numel();
                for (std::int64_t i = 0; i < n; ++i) gx[i] += g[i] / tx[i];
                break;
            }
            case Op::Exp: {
                const Tensor& y = nd.value;
                Tensor& gx = grad_of(nd.inputs[0]);
                const std::int64_t n = y.numel();
                for (std::int64_t i = 0; i < n; ++i) gx[i] += g[i] * y[i];
                break;
            }
            case Op::MaxReduce: {
                Tensor& gx = grad_of(nd.inputs[0]);
                for (std::int64_t oi = 0; oi < nd.value.numel(); ++oi)
                    gx[nd.arg[static_cast<size_t>(oi)]] += g[oi];
                break;
            }
            case Op::MeanReduce: {
                const Tensor& tx = nodes_[static_cast<size_t>(nd.inputs[0])].value;
                Tensor& gx = grad_of(nd.inputs[0]);
                AxisSplit s = split_axis(tx.shape(), nd.axis, "mean_over_axis");
                const double inv = 1.0 / static_cast<double>(s.len);
                std::int64_t oi = 0;
                for (std::int64_t o = 0; o < s.outer; ++o) {
                    for (std::int64_t in = 0; in < s.inner; ++in, ++oi) {
                        const std::int64_t base = (o * s.len) * s.inner + in;
                        const double gv = g[oi] * inv;
                        for (std::int64_t l = 0; l < s.len; ++l) gx[base + l * s.inner] += gv;
                    }
                }
                break;
            }
            case Op::Concat: {
                AxisSplit s = split_axis(nd.value.shape(), nd.axis, "concat_axis");
                std::int64_t off = 0;
                for (int input : nd.inputs) {
                    const Tensor& t = nodes_[static_cast<size_t>(input)].value;
                    Tensor& gi = grad_of(input);
                    const std::int64_t len = t.dim(nd.axis);
                    const std::int64_t irow = len * s.inner;
                    const std::int64_t orow = static_cast<std::int64_t>(nd.value.dim(nd.axis)) * s.inner;
                    for (std::int64_t o = 0; o < s.outer; ++o) {
                        const double* src = g.data() + o * orow + off * s.inner;
                        double* dst = gi.data() + o * irow;
                        for (std::int64_t j = 0; j < irow; ++j) dst[j] += src[j];
                    }
                    off += len;
                }
                break;
            }
            case Op::GatherRows: {
                const Tensor& tx = nodes_[static_cast<size_t>(nd.inputs[0])].value;
                Tensor& gx = grad_of(nd.inputs[0]);
                const std::int64_t rowsz = tx.numel() / tx.dim(0);
                for (size_t r = 0; r < nd.arg.size(); ++r) {
                    const double* src = g.data() + static_cast<std::int64_t>(r) * rowsz;
                    double* dst = gx.data() + nd.arg[r] * rowsz;
                    for (std::int64_t j = 0; j < rowsz; ++j) dst[j] += src[j];
                }
                break;
            }
            case Op::Reshape: {
                Tensor& gx = grad_of(nd.inputs[0]);
                const std::int64_t n = gx.numel();
                for (std::int64_t i = 0; i < n; ++i) gx[i] += g[i];
                break;
            }
            case Op::Transpose2: {
                const Tensor& tx = nodes_[static_cast<size_t>(nd.inputs[0])].value;
                Tensor& gx = grad_of(nd.inputs[0]);
                const int p = tx.dim(tx.rank() - 2);
                const int q = tx.dim(tx.rank() - 1);
                const std::int64_t batches = tx.numel() / (static_cast<std::int64_t>(p) * q);
                for (std::int64_t b = 0; b < batches; ++b) {
                    const double* src = g.data() + b * p * q; // [q, p]
                    double* dst = gx.data() + b * p * q;      // [p, q]
                    for (int j = 0; j < q; ++j)
                        for (int i = 0; i < p; ++i)
                            dst[static_cast<std::int64_t>(i) * q + j] +=
                                src[static_cast<std::int64_t>(j) * p + i];
                }
                break;
            }
        }
    }

    std::map<int, Tensor> grads;
    for (int pid : params_) {
        if (pid > loss_id || adj[static_cast<size_t>(pid)].empty())
            grads[pid] = Tensor(nodes_[static_cast<size_t>(pid)].value.shape());
        else
            grads[pid] = std::move(adj[static_cast<size_t>(pid)]);
    }
    return grads;
}

// -- free helpers --------------------------------------------------------

namespace {
Tape* same_tape(Value a, Value b) {
    if (a.tape != b.tape) throw ArgumentError("values belong to different tapes");
    return a.tape;
}
} // namespace

Value operator+(Value a, Value b) { return same_tape(a, b)->add(a, b); }
Value operator-(Value a, Value b) { return same_tape(a, b)->sub(a, b); }
Value operator*(Value a, Value b) { return same_tape(a, b)->mul(a, b); }

Value matmul(Value a, Value b) { return same_tape(a, b)->matmul(a, b); }
Value softmax_axis(Value x, int axis) { return x.tape->softmax_axis(x, axis); }
Value relu(Value x) { return x.tape->relu(x); }
Value log_of(Value x) { return x.tape->log(x); }
Value exp_of(Value x) { return x.tape->exp(x); }
Value max_over_axis(Value x, int axis) { return x.tape->max_over_axis(x, axis); }
Value mean_over_axis(Value x, int axis) { return x.tape->mean_over_axis(x, axis); }
Value sum_over_axis(Value x, int axis) {
    const double len = x.val().dim(axis);
    return x.tape->scale(x.tape->mean_over_axis(x, axis), len);
}
Value concat_axis(const std::vector<Value>& xs, int axis) {
    if (xs.empty()) throw ArgumentError("concat_axis: no inputs");
    return xs[0].tape->concat_axis(xs, axis);
}
Value gather_rows(Value x, const std::vector<int>& rows) { return x.tape->gather_rows(x, rows); }
Value reshape(Value x, std::vector<int> new_shape) { return x.tape->reshape(x, std::move(new_shape)); }
Value transpose_last2(Value x) { return x.tape->transpose_last2(x); }
Value scale(Value x, double s) { return x.tape->scale(x, s); }

Value mean_all(Value x) {
    Value flat = x.val().rank() == 1 ? x : reshape(x, {static_cast<int>(x.val().numel())});
    return mean_over_axis(flat, 0);
}

Value sum_all(Value x) {
    Value flat = x.val().rank() == 1 ? x : reshape(x, {static_cast<int>(x.val().numel())});
    return sum_over_axis(flat, 0);
}

double finite_difference_check(const std::function<double(const Tensor&)>& f,
                               const Tensor& theta, double eps,
                               const Tensor& grad_ad) {
    if (eps <= 0.0) throw ArgumentError("finite_difference_check: eps must be > 0");
    if (!theta.same_shape(grad_ad))
        throw ArgumentError("finite_difference_check: gradient shape " + shape_str(grad_ad.shape()) +
                            " does not match parameter shape " + shape_str(theta.shape()));
    Tensor probe = theta;
    double worst = 0.0;
    for (std::int64_t i = 0; i < theta.numel(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + eps;
        const double fp = f(probe);
        probe[i] = orig - eps;
        const double fm = f(probe);
        probe[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("finite_difference_check: non-finite function value at coordinate " +
                               std::to_string(i));
        const double g_fd = (fp - fm) / (2.0 * eps);
        const double g_ad = grad_ad[i];
        const double denom = std::max({1.0, std::abs(g_ad), std::abs(g_fd)});
        worst = std::max(worst, std::abs(g_ad - g_fd) / denom);
    }
    return worst;
}

} // namespace pf
