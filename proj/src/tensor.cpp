#include "ddacdn/tensor.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ddacdn {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) {
        if (d < 0) throw std::invalid_argument("negative extent in shape " + shape_str(s));
        n *= d;
    }
    return n;
}

Tensor::Tensor(Shape s, std::vector<double> v) : shape(std::move(s)) {
    if (shape_numel(shape) != static_cast<int64_t>(v.size()))
        throw std::invalid_argument("shape " + shape_str(shape) + " does not match data length " +
                                    std::to_string(v.size()));
    data = std::make_shared<std::vector<double>>(std::move(v));
}

Tensor::Tensor(double scalar_value) : shape{1} {
    data = std::make_shared<std::vector<double>>(1, scalar_value);
}

Tensor Tensor::zeros(Shape s) { return full(std::move(s), 0.0); }

Tensor Tensor::full(Shape s, double v) {
    int64_t n = shape_numel(s);
    Tensor t;
    t.shape = std::move(s);
    t.data = std::make_shared<std::vector<double>>(static_cast<size_t>(n), v);
    return t;
}

double Tensor::scalar() const {
    if (size() != 1)
        throw std::invalid_argument("scalar() on tensor of shape " + shape_str(shape));
    return (*data)[0];
}

Tensor Graph::leaf(Shape s, std::vector<double> v) {
    Tensor t(std::move(s), std::move(v));
    record(t, {}, nullptr);
    return t;
}

Tensor Graph::leaf(const Tensor& value) {
    Tensor t(value.shape, *value.data);
    record(t, {}, nullptr);
    return t;
}

void Graph::record(Tensor& out, const std::vector<int>& inputs, BackwardFn back) {
    out.node = static_cast<int>(nodes_.size());
    out.graph = this;
    nodes_.push_back(Node{inputs, std::move(back), out.shape});
}

void Graph::accumulate(int node_id, const std::vector<double>& g) {
    auto& buf = grads_[static_cast<size_t>(node_id)];
    if (buf.empty()) buf.assign(g.begin(), g.end());
    else {
        if (buf.size() != g.size())
            throw std::runtime_error("gradient size mismatch in accumulate");
        for (size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
    }
}

void Graph::accumulate(int node_id, int64_t flat_index, double g) {
    auto& buf = grads_[static_cast<size_t>(node_id)];
    if (buf.empty())
        buf.assign(static_cast<size_t>(shape_numel(nodes_[static_cast<size_t>(node_id)].shape)), 0.0);
    buf[static_cast<size_t>(flat_index)] += g;
}

bool Graph::has_grad(int node_id) const {
    return node_id >= 0 && !grads_[static_cast<size_t>(node_id)].empty();
}

void Graph::backward(const Tensor& loss) {
    if (loss.graph != this || loss.node < 0)
        throw std::invalid_argument("backward: loss does not belong to this graph");
    if (loss.size() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                    shape_str(loss.shape));
    grads_.assign(nodes_.size(), {});
    grads_[static_cast<size_t>(loss.node)] = {1.0};
    for (int id = loss.node; id >= 0; --id) {
        auto& g = grads_[static_cast<size_t>(id)];
        if (g.empty()) continue;
        auto& node = nodes_[static_cast<size_t>(id)];
        if (node.back) node.back(*this, g);
    }
}

Tensor Graph::grad(const Tensor& t) const {
    if (t.graph != this || t.node < 0)
        throw std::invalid_argument("grad: tensor does not belong to this graph");
    const auto& g = grads_[static_cast<size_t>(t.node)];
    if (g.empty()) return Tensor::zeros(t.shape);
    return Tensor(t.shape, g);
}

namespace {

Graph* active_graph(const Tensor& a, const Tensor& b) {
    if (a.graph && b.graph && a.graph != b.graph)
        throw std::invalid_argument("operands belong to different graphs");
    return a.graph ? a.graph : b.graph;
}

void check_same_or_scalar(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape == b.shape || a.size() == 1 || b.size() == 1) return;
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                                " vs " + shape_str(b.shape));
}

inline double bval(const Tensor& t, int64_t i) {
    return t.size() == 1 ? (*t.data)[0] : (*t.data)[static_cast<size_t>(i)];
}

// Elementwise binary with scalar broadcast. dfa/dfb give partials w.r.t. a, b.
template <class F, class Dfa, class Dfb>
Tensor ewise_binary(const Tensor& a, const Tensor& b, const char* name, F f, Dfa dfa, Dfb dfb) {
    check_same_or_scalar(a, b, name);
    const Tensor& big = a.size() >= b.size() ? a : b;
    Tensor out = Tensor::zeros(big.shape);
    int64_t n = out.size();
    for (int64_t i = 0; i < n; ++i) (*out.data)[i] = f(bval(a, i), bval(b, i));
    Graph* g = active_graph(a, b);
    if (!g) return out;
    Tensor ac = a, bc = b;
    g->record(out, {a.node, b.node}, [ac, bc, n, dfa, dfb](Graph& gr, const std::vector<double>& go) {
        if (ac.node >= 0) {
            if (ac.size() == 1) {
                double s = 0;
                for (int64_t i = 0; i < n; ++i) s += go[i] * dfa(bval(ac, i), bval(bc, i));
                gr.accumulate(ac.node, 0, s);
            } else {
                for (int64_t i = 0; i < n; ++i)
                    gr.accumulate(ac.node, i, go[i] * dfa(bval(ac, i), bval(bc, i)));
            }
        }
        if (bc.node >= 0) {
            if (bc.size() == 1) {
                double s = 0;
                for (int64_t i = 0; i < n; ++i) s += go[i] * dfb(bval(ac, i), bval(bc, i));
                gr.accumulate(bc.node, 0, s);
            } else {
                for (int64_t i = 0; i < n; ++i)
                    gr.accumulate(bc.node, i, go[i] * dfb(bval(ac, i), bval(bc, i)));
            }
        }
    });
    return out;
}

template <class F, class Df>
Tensor ewise_unary(const Tensor& a, F f, Df df) {
    Tensor out = Tensor::zeros(a.shape);
    int64_t n = a.size();
    for (int64_t i = 0; i < n; ++i) (*out.data)[i] = f((*a.data)[i]);
    if (!a.graph) return out;
    Tensor ac = a;
    a.graph->record(out, {a.node}, [ac, n, df](Graph& gr, const std::vector<double>& go) {
        if (ac.node < 0) return;
        for (int64_t i = 0; i < n; ++i) gr.accumulate(ac.node, i, go[i] * df((*ac.data)[i]));
    });
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return ewise_binary(a, b, "add", [](double x, double y) { return x + y; },
                        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return ewise_binary(a, b, "sub", [](double x, double y) { return x - y; },
                        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return ewise_binary(a, b, "mul", [](double x, double y) { return x * y; },
                        [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    for (int64_t i = 0; i < b.size(); ++i)
        if ((*b.data)[i] == 0.0) throw std::domain_error("div: division by zero");
    return ewise_binary(a, b, "div", [](double x, double y) { return x / y; },
                        [](double, double y) { return 1.0 / y; },
                        [](double x, double y) { return -x / (y * y); });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
    // subgradient: ties go to the first operand
    return ewise_binary(a, b, "maximum", [](double x, double y) { return x >= y ? x : y; },
                        [](double x, double y) { return x >= y ? 1.0 : 0.0; },
                        [](double x, double y) { return x >= y ? 0.0 : 1.0; });
}

Tensor add(const Tensor& a, double b) { return add(a, Tensor(b)); }
Tensor sub(double a, const Tensor& b) { return sub(Tensor(a), b); }
Tensor mul(const Tensor& a, double b) { return mul(a, Tensor(b)); }

Tensor neg(const Tensor& a) {
    return ewise_unary(a, [](double x) { return -x; }, [](double) { return -1.0; });
}

Tensor sigmoid(const Tensor& a) {
    auto sig = [](double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); };
    return ewise_unary(a, sig, [sig](double x) { double s = sig(x); return s * (1.0 - s); });
}

Tensor exp(const Tensor& a) {
    return ewise_unary(a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Tensor log(const Tensor& a) {
    for (int64_t i = 0; i < a.size(); ++i)
        if ((*a.data)[i] <= 0.0) throw std::domain_error("log: operand <= 0");
    return ewise_unary(a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Tensor pow_const(const Tensor& a, double p) {
    return ewise_unary(a, [p](double x) { return std::pow(x, p); },
                       [p](double x) { return x == 0.0 && p < 1.0 ? 0.0 : p * std::pow(x, p - 1.0); });
}

Tensor relu(const Tensor& a) {
    return ewise_unary(a, [](double x) { return x > 0 ? x : 0.0; },
                       [](double x) { return x > 0 ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& a) {
    double s = 0;
    for (int64_t i = 0; i < a.size(); ++i) s += (*a.data)[i];
    Tensor out(s);
    if (!a.graph) return out;
    Tensor ac = a;
    a.graph->record(out, {a.node}, [ac](Graph& gr, const std::vector<double>& go) {
        if (ac.node < 0) return;
        for (int64_t i = 0; i < ac.size(); ++i) gr.accumulate(ac.node, i, go[0]);
    });
    return out;
}

Tensor mean(const Tensor& a) {
    if (a.size() == 0) throw std::invalid_argument("mean of empty tensor");
    double inv = 1.0 / static_cast<double>(a.size());
    double s = 0;
    for (int64_t i = 0; i < a.size(); ++i) s += (*a.data)[i];
    Tensor out(s * inv);
    if (!a.graph) return out;
    Tensor ac = a;
    a.graph->record(out, {a.node}, [ac, inv](Graph& gr, const std::vector<double>& go) {
        if (ac.node < 0) return;
        for (int64_t i = 0; i < ac.size(); ++i) gr.accumulate(ac.node, i, go[0] * inv);
    });
    return out;
}

Tensor reduce_max(const Tensor& a) {
    if (a.size() == 0) throw std::invalid_argument("max of empty tensor");
    int64_t arg = 0;
    for (int64_t i = 1; i < a.size(); ++i)
        if ((*a.data)[i] > (*a.data)[arg]) arg = i;
    Tensor out((*a.data)[arg]);
    if (!a.graph) return out;
    Tensor ac = a;
    a.graph->record(out, {a.node}, [ac, arg](Graph& gr, const std::vector<double>& go) {
        if (ac.node >= 0) gr.accumulate(ac.node, arg, go[0]);
    });
    return out;
}

Tensor reshape(const Tensor& a, Shape s) {
    if (shape_numel(s) != a.size())
        throw std::invalid_argument("reshape: shape " + shape_str(s) + " incompatible with " +
                                    shape_str(a.shape));
    Tensor out(std::move(s), *a.data);
    if (!a.graph) return out;
    Tensor ac = a;
    a.graph->record(out, {a.node}, [ac](Graph& gr, const std::vector<double>& go) {
        if (ac.node >= 0) gr.accumulate(ac.node, go);
    });
    return out;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw std::invalid_argument("concat: empty input list");
    const Shape& base = parts[0].shape;
    int rank = static_cast<int>(base.size());
    if (axis < 0 || axis >= rank) throw std::invalid_argument("concat: bad axis");
    Shape out_shape = base;
    out_shape[axis] = 0;
    for (const auto& p : parts) {
        if (static_cast<int>(p.shape.size()) != rank)
            throw std::invalid_argument("concat: rank mismatch");
        for (int d = 0; d < rank; ++d)
            if (d != axis && p.shape[d] != base[d])
                throw std::invalid_argument("concat: shape mismatch " + shape_str(p.shape) +
                                            " vs " + shape_str(base));
        out_shape[axis] += p.shape[axis];
    }
    int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= base[d];
    for (int d = axis + 1; d < rank; ++d) inner *= base[d];

    Tensor out = Tensor::zeros(out_shape);
    int64_t out_row = static_cast<int64_t>(out_shape[axis]) * inner;
    int64_t off = 0;
    std::vector<int64_t> offsets;
    for (const auto& p : parts) {
        offsets.push_back(off);
        int64_t row = static_cast<int64_t>(p.shape[axis]) * inner;
        for (int64_t o = 0; o < outer; ++o)
            for (int64_t i = 0; i < row; ++i)
                (*out.data)[o * out_row + off + i] = (*p.data)[o * row + i];
        off += row;
    }
    Graph* g = nullptr;
    std::vector<int> inputs;
    for (const auto& p : parts) {
        inputs.push_back(p.node);
        if (p.graph) g = p.graph;
    }
    if (!g) return out;
    std::vector<Tensor> pc = parts;
    g->record(out, inputs, [pc, offsets, outer, inner, out_row](Graph& gr, const std::vector<double>& go) {
        for (size_t k = 0; k < pc.size(); ++k) {
            if (pc[k].node < 0) continue;
            int64_t row = pc[k].size() / outer;
            for (int64_t o = 0; o < outer; ++o)
                for (int64_t i = 0; i < row; ++i)
                    gr.accumulate(pc[k].node, o * row + i, go[o * out_row + offsets[k] + i]);
        }
    });
    return out;
}

Tensor select(const Tensor& a, int64_t flat_index) {
    if (flat_index < 0 || flat_index >= a.size())
        throw std::invalid_argument("select: index out of range");
    Tensor out((*a.data)[static_cast<size_t>(flat_index)]);
    if (!a.graph) return out;
    Tensor ac = a;
    a.graph->record(out, {a.node}, [ac, flat_index](Graph& gr, const std::vector<double>& go) {
        if (ac.node >= 0) gr.accumulate(ac.node, flat_index, go[0]);
    });
    return out;
}

Tensor slice_flat(const Tensor& a, int64_t start, int64_t len) {
    if (start < 0 || len < 0 || start + len > a.size())
        throw std::invalid_argument("slice_flat: range out of bounds");
    Tensor out({static_cast<int>(len)},
               std::vector<double>(a.data->begin() + start, a.data->begin() + start + len));
    if (!a.graph) return out;
    Tensor ac = a;
    a.graph->record(out, {a.node}, [ac, start, len](Graph& gr, const std::vector<double>& go) {
        if (ac.node < 0) return;
        for (int64_t i = 0; i < len; ++i) gr.accumulate(ac.node, start + i, go[static_cast<size_t>(i)]);
    });
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[1] != b.shape[0])
        throw std::invalid_argument("matmul: shape mismatch " + shape_str(a.shape) + " vs " +
                                    shape_str(b.shape));
    int m = a.shape[0], k = a.shape[1], n = b.shape[1];
    Tensor out = Tensor::zeros({m, n});
    ConstRowMap A(a.data->data(), m, k), B(b.data->data(), k, n);
    RowMap(out.data->data(), m, n) = A * B;
    Graph* g = active_graph(a, b);
    if (!g) return out;
    Tensor ac = a, bc = b;
    g->record(out, {a.node, b.node}, [ac, bc, m, k, n](Graph& gr, const std::vector<double>& go) {
        ConstRowMap G(go.data(), m, n);
        ConstRowMap A(ac.data->data(), m, k), B(bc.data->data(), k, n);
        if (ac.node >= 0) {
            std::vector<double> ga(static_cast<size_t>(m) * k);
            RowMap(ga.data(), m, k) = G * B.transpose();
            gr.accumulate(ac.node, ga);
        }
        if (bc.node >= 0) {
            std::vector<double> gb(static_cast<size_t>(k) * n);
            RowMap(gb.data(), k, n) = A.transpose() * G;
            gr.accumulate(bc.node, gb);
        }
    });
    return out;
}

namespace {

// im2col for one sample: (Cin*kh*kw) x (Ho*Wo), zero padding (k-1)/2.
void im2col(const double* x, int cin, int h, int w, int kh, int kw, int stride,
            int ho, int wo, double* col) {
    int ph = (kh - 1) / 2, pw = (kw - 1) / 2;
    int64_t ncols = static_cast<int64_t>(ho) * wo;
    int64_t r = 0;
    for (int c = 0; c < cin; ++c)
        for (int di = 0; di < kh; ++di)
            for (int dj = 0; dj < kw; ++dj, ++r)
                for (int oi = 0; oi < ho; ++oi)
                    for (int oj = 0; oj < wo; ++oj) {
                        int ii = oi * stride + di - ph;
                        int jj = oj * stride + dj - pw;
                        double v = (ii >= 0 && ii < h && jj >= 0 && jj < w)
                                       ? x[(static_cast<int64_t>(c) * h + ii) * w + jj]
                                       : 0.0;
                        col[r * ncols + oi * wo + oj] = v;
                    }
}

void col2im_add(const double* col, int cin, int h, int w, int kh, int kw, int stride,
                int ho, int wo, double* gx) {
    int ph = (kh - 1) / 2, pw = (kw - 1) / 2;
    int64_t ncols = static_cast<int64_t>(ho) * wo;
    int64_t r = 0;
    for (int c = 0; c < cin; ++c)
        for (int di = 0; di < kh; ++di)
            for (int dj = 0; dj < kw; ++dj, ++r)
                for (int oi = 0; oi < ho; ++oi)
                    for (int oj = 0; oj < wo; ++oj) {
                        int ii = oi * stride + di - ph;
                        int jj = oj * stride + dj - pw;
                        if (ii >= 0 && ii < h && jj >= 0 && jj < w)
                            gx[(static_cast<int64_t>(c) * h + ii) * w + jj] +=
                                col[r * ncols + oi * wo + oj];
                    }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride) {
    if (x.shape.size() != 4 || w.shape.size() != 4 || x.shape[1] != w.shape[1])
        throw std::invalid_argument("conv2d: shape mismatch " + shape_str(x.shape) + " vs " +
                                    shape_str(w.shape));
    if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
    int n = x.shape[0], cin = x.shape[1], h = x.shape[2], wd = x.shape[3];
    int cout = w.shape[0], kh = w.shape[2], kw = w.shape[3];
    bool has_bias = b.size() > 0;
    if (has_bias && (b.shape.size() != 1 || b.shape[0] != cout))
        throw std::invalid_argument("conv2d: bias shape " + shape_str(b.shape) +
                                    " does not match Cout " + std::to_string(cout));
    int ph = (kh - 1) / 2, pw = (kw - 1) / 2;
    int ho = (h + 2 * ph - kh) / stride + 1;
    int wo = (wd + 2 * pw - kw) / stride + 1;
    int64_t krows = static_cast<int64_t>(cin) * kh * kw;
    int64_t ncols = static_cast<int64_t>(ho) * wo;

    Tensor out = Tensor::zeros({n, cout, ho, wo});
    std::vector<double> col(static_cast<size_t>(krows * ncols));
    ConstRowMap W(w.data->data(), cout, krows);
    for (int s = 0; s < n; ++s) {
        im2col(x.data->data() + static_cast<int64_t>(s) * cin * h * wd, cin, h, wd, kh, kw,
               stride, ho, wo, col.data());
        ConstRowMap C(col.data(), krows, ncols);
        RowMap O(out.data->data() + static_cast<int64_t>(s) * cout * ncols, cout, ncols);
        O = W * C;
        if (has_bias)
            for (int c = 0; c < cout; ++c) O.row(c).array() += (*b.data)[c];
    }
    Graph* g = x.graph ? x.graph : (w.graph ? w.graph : b.graph);
    if (!g) return out;
    Tensor xc = x, wc = w, bc = b;
    g->record(out, {x.node, w.node, b.node},
              [xc, wc, bc, n, cin, h, wd, cout, kh, kw, stride, ho, wo, krows, ncols,
               has_bias](Graph& gr, const std::vector<double>& go) {
                  std::vector<double> col(static_cast<size_t>(krows * ncols));
                  std::vector<double> gw(static_cast<size_t>(cout) * krows, 0.0);
                  std::vector<double> gb(static_cast<size_t>(cout), 0.0);
                  std::vector<double> gx;
                  if (xc.node >= 0) gx.assign(xc.data->size(), 0.0);
                  std::vector<double> gcol(static_cast<size_t>(krows * ncols));
                  ConstRowMap W(wc.data->data(), cout, krows);
                  for (int s = 0; s < n; ++s) {
                      ConstRowMap G(go.data() + static_cast<int64_t>(s) * cout * ncols, cout, ncols);
                      if (wc.node >= 0 || xc.node >= 0)
                          im2col(xc.data->data() + static_cast<int64_t>(s) * cin * h * wd, cin, h,
                                 wd, kh, kw, stride, ho, wo, col.data());
                      if (wc.node >= 0) {
                          ConstRowMap C(col.data(), krows, ncols);
                          RowMap(gw.data(), cout, krows) += G * C.transpose();
                      }
                      if (xc.node >= 0) {
                          RowMap(gcol.data(), krows, ncols) = W.transpose() * G;
                          col2im_add(gcol.data(), cin, h, wd, kh, kw, stride, ho, wo,
                                     gx.data() + static_cast<int64_t>(s) * cin * h * wd);
                      }
                      if (has_bias && bc.node >= 0)
                          for (int c = 0; c < cout; ++c) gb[c] += G.row(c).sum();
                  }
                  if (wc.node >= 0) gr.accumulate(wc.node, gw);
                  if (xc.node >= 0) gr.accumulate(xc.node, gx);
                  if (has_bias && bc.node >= 0) gr.accumulate(bc.node, gb);
              });
    return out;
}

Tensor global_avg_pool(const Tensor& x) {
    if (x.shape.size() != 4)
        throw std::invalid_argument("global_avg_pool: expected rank-4, got " + shape_str(x.shape));
    int n = x.shape[0], c = x.shape[1];
    int64_t spatial = static_cast<int64_t>(x.shape[2]) * x.shape[3];
    if (spatial == 0) throw std::invalid_argument("global_avg_pool: empty spatial dims");
    double inv = 1.0 / static_cast<double>(spatial);
    Tensor out = Tensor::zeros({n, c});
    for (int s = 0; s < n; ++s)
        for (int ch = 0; ch < c; ++ch) {
            double acc = 0;
            const double* p = x.data->data() + (static_cast<int64_t>(s) * c + ch) * spatial;
            for (int64_t i = 0; i < spatial; ++i) acc += p[i];
            (*out.data)[static_cast<int64_t>(s) * c + ch] = acc * inv;
        }
    if (!x.graph) return out;
    Tensor xc = x;
    x.graph->record(out, {x.node}, [xc, n, c, spatial, inv](Graph& gr, const std::vector<double>& go) {
        if (xc.node < 0) return;
        for (int s = 0; s < n; ++s)
            for (int ch = 0; ch < c; ++ch) {
                double gv = go[static_cast<int64_t>(s) * c + ch] * inv;
                int64_t base = (static_cast<int64_t>(s) * c + ch) * spatial;
                for (int64_t i = 0; i < spatial; ++i) gr.accumulate(xc.node, base + i, gv);
            }
    });
    return out;
}

double grad_check(const std::function<Tensor(Graph&, const Tensor&)>& f, const Tensor& x,
                  double eps) {
    Graph g;
    Tensor xl = g.leaf(x);
    Tensor loss = f(g, xl);
    g.backward(loss);
    Tensor analytic = g.grad(xl);

    double worst = 0.0;
    Tensor xp(x.shape, *x.data);
    for (int64_t i = 0; i < x.size(); ++i) {
        double orig = (*xp.data)[i];
        (*xp.data)[i] = orig + eps;
        Graph gp;
        double fp = f(gp, gp.leaf(xp)).scalar();
        (*xp.data)[i] = orig - eps;
        Graph gm;
        double fm = f(gm, gm.leaf(xp)).scalar();
        (*xp.data)[i] = orig;
        double numeric = (fp - fm) / (2.0 * eps);
        double a = analytic[i];
        double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
        if (err > worst) worst = err;
    }
    return worst;
}

}  // namespace ddacdn
