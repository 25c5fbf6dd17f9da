#include "ghq/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace ghq::autodiff {

Value Graph::leaf(Tensor value, bool requires_grad) {
    return push(std::move(value), requires_grad, nullptr);
}

Value Graph::push(Tensor val, bool requires_grad, BackFn back) {
    Node n;
    n.val = std::move(val);
    n.requires_grad = requires_grad && grad_enabled_;
    if (n.requires_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Value{(int)nodes_.size() - 1};
}

Tensor Graph::grad(Value v) const {
    const Node& n = nodes_[v.id];
    if (n.grad.empty()) return Tensor::zeros(n.val.shape);
    return n.grad;
}

Tensor& Graph::grad_ref(Value v) {
    Node& n = nodes_[v.id];
    if (n.grad.empty()) n.grad = Tensor::zeros(n.val.shape);
    return n.grad;
}

void Graph::accum_grad(Value v, const Tensor& g) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return;
    Tensor& dst = grad_ref(v);
    for (std::size_t i = 0; i < g.data.size(); ++i) dst.data[i] += g.data[i];
    n.reached = true;
}

void Graph::accum_grad_rows(Value v, const Tensor& g, std::size_t row0) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return;
    Tensor& dst = grad_ref(v);
    std::size_t c = n.val.cols();
    double* out = dst.data.data() + row0 * c;
    for (std::size_t i = 0; i < g.data.size(); ++i) out[i] += g.data[i];
    n.reached = true;
}

void Graph::accum_grad_cols(Value v, const Tensor& g, std::size_t col0) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return;
    Tensor& dst = grad_ref(v);
    std::size_t rows = g.rows(), gc = g.cols(), c = n.val.cols();
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < gc; ++j) dst.data[i * c + col0 + j] += g.at(i, j);
    n.reached = true;
}

void Graph::backward(Value loss) {
    if (!grad_enabled_) throw std::logic_error("backward on a no-grad graph");
    if (val(loss).size() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got " +
                                    val(loss).shape_str());
    for (Node& n : nodes_) {
        n.reached = false;
        if (!n.grad.empty()) std::fill(n.grad.data.begin(), n.grad.data.end(), 0.0);
    }
    Node& top = nodes_[loss.id];
    if (!top.requires_grad) return;  // loss does not depend on any parameter
    grad_ref(loss).data[0] = 1.0;
    top.reached = true;
    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[id];
        if (n.reached && n.back) n.back(*this, Value{id});
    }
}

namespace {

bool rg(Graph& g, std::initializer_list<Value> vs) {
    if (!g.grad_enabled()) return false;
    for (Value v : vs)
        if (g.requires_grad(v)) return true;
    return false;
}

void check_same_shape(Graph& g, Value a, Value b, const char* op) {
    if (!g.val(a).same_shape(g.val(b)))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    g.val(a).shape_str() + " vs " +
                                    g.val(b).shape_str());
}

Tensor colsum(const Tensor& t) {
    Tensor out = Tensor::zeros({1, t.cols()});
    std::size_t c = t.cols();
    for (std::size_t i = 0; i < t.rows(); ++i)
        for (std::size_t j = 0; j < c; ++j) out.data[j] += t.data[i * c + j];
    return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= b.data[i];
    return out;
}

// out = f(x); backward: dx += dOut .* dval(x_i, y_i)
template <typename F, typename DF>
Value unary(Graph& g, Value a, F f, DF dval) {
    const Tensor& x = g.val(a);
    Tensor y = Tensor::zeros(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = f(x.data[i]);
    return g.push(std::move(y), rg(g, {a}), [a, dval](Graph& gg, Value self) {
        const Tensor& go = gg.grad_ref(self);
        const Tensor& x = gg.val(a);
        const Tensor& y = gg.val(self);
        Tensor d = Tensor::zeros(x.shape);
        for (std::size_t i = 0; i < x.size(); ++i)
            d.data[i] = go.data[i] * dval(x.data[i], y.data[i]);
        gg.accum_grad(a, d);
    });
}

}  // namespace

Value add(Graph& g, Value a, Value b) {
    check_same_shape(g, a, b, "add");
    Tensor y = g.val(a);
    const Tensor& tb = g.val(b);
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += tb.data[i];
    return g.push(std::move(y), rg(g, {a, b}), [a, b](Graph& gg, Value self) {
        const Tensor& go = gg.grad_ref(self);
        gg.accum_grad(a, go);
        gg.accum_grad(b, go);
    });
}

Value sub(Graph& g, Value a, Value b) {
    check_same_shape(g, a, b, "sub");
    Tensor y = g.val(a);
    const Tensor& tb = g.val(b);
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] -= tb.data[i];
    return g.push(std::move(y), rg(g, {a, b}), [a, b](Graph& gg, Value self) {
        const Tensor& go = gg.grad_ref(self);
        gg.accum_grad(a, go);
        Tensor neg = go;
        for (double& v : neg.data) v = -v;
        gg.accum_grad(b, neg);
    });
}

Value mul(Graph& g, Value a, Value b) {
    check_same_shape(g, a, b, "mul");
    Tensor y = hadamard(g.val(a), g.val(b));
    return g.push(std::move(y), rg(g, {a, b}), [a, b](Graph& gg, Value self) {
        const Tensor& go = gg.grad_ref(self);
        gg.accum_grad(a, hadamard(go, gg.val(b)));
        gg.accum_grad(b, hadamard(go, gg.val(a)));
    });
}

Value add_rowvec(Graph& g, Value m, Value v) {
    const Tensor& tm = g.val(m);
    const Tensor& tv = g.val(v);
    if (tv.size() != tm.cols())
        throw std::invalid_argument("add_rowvec: bias size mismatch " + tm.shape_str() +
                                    " + " + tv.shape_str());
    Tensor y = tm;
    std::size_t c = tm.cols();
    for (std::size_t i = 0; i < tm.rows(); ++i)
        for (std::size_t j = 0; j < c; ++j) y.data[i * c + j] += tv.data[j];
    return g.push(std::move(y), rg(g, {m, v}), [m, v](Graph& gg, Value self) {
        const Tensor& go = gg.grad_ref(self);
        gg.accum_grad(m, go);
        Tensor cs = colsum(go);
        cs.shape = gg.val(v).shape;
        gg.accum_grad(v, cs);
    });
}

Value scale(Graph& g, Value a, double s) {
    Tensor y = g.val(a);
    for (double& x : y.data) x *= s;
    return g.push(std::move(y), rg(g, {a}), [a, s](Graph& gg, Value self) {
        Tensor d = gg.grad_ref(self);
        for (double& x : d.data) x *= s;
        gg.accum_grad(a, d);
    });
}

Value add_scalar(Graph& g, Value a, double s) {
    Tensor y = g.val(a);
    for (double& x : y.data) x += s;
    return g.push(std::move(y), rg(g, {a}), [a](Graph& gg, Value self) {
        gg.accum_grad(a, gg.grad_ref(self));
    });
}

Value relu(Graph& g, Value a) {
    return unary(
        g, a, [](double x) { return x > 0 ? x : 0.0; },
        [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Value elu(Graph& g, Value a) {
    return unary(
        g, a, [](double x) { return x > 0 ? x : std::expm1(x); },
        [](double x, double y) { return x > 0 ? 1.0 : y + 1.0; });
}

Value tanh_op(Graph& g, Value a) {
    return unary(
        g, a, [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Value sigmoid(Graph& g, Value a) {
    return unary(
        g, a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double, double y) { return y * (1.0 - y); });
}

Value exp_op(Graph& g, Value a) {
    return unary(
        g, a, [](double x) { return std::exp(x); },
        [](double, double y) { return y; });
}

Value abs_op(Graph& g, Value a) {
    return unary(
        g, a, [](double x) { return std::abs(x); },
        [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Value square(Graph& g, Value a) {
    return unary(
        g, a, [](double x) { return x * x; },
        [](double x, double) { return 2.0 * x; });
}

Value clamp(Graph& g, Value a, double lo, double hi) {
    return unary(
        g, a, [lo, hi](double x) { return std::min(hi, std::max(lo, x)); },
        [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Value sum_all(Graph& g, Value a) {
    double s = 0;
    for (double v : g.val(a).data) s += v;
    return g.push(Tensor::scalar(s), rg(g, {a}), [a](Graph& gg, Value self) {
        double go = gg.grad_ref(self).data[0];
        gg.accum_grad(a, Tensor::full(gg.val(a).shape, go));
    });
}

Value mean_all(Graph& g, Value a) {
    std::size_t n = g.val(a).size();
    double s = 0;
    for (double v : g.val(a).data) s += v;
    return g.push(Tensor::scalar(s / (double)n), rg(g, {a}),
                  [a, n](Graph& gg, Value self) {
                      double go = gg.grad_ref(self).data[0] / (double)n;
                      gg.accum_grad(a, Tensor::full(gg.val(a).shape, go));
                  });
}

Value sum_cols(Graph& g, Value a) {
    const Tensor& x = g.val(a);
    std::size_t r = x.rows(), c = x.cols();
    Tensor y = Tensor::zeros({r, 1});
    for (std::size_t i = 0; i < r; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < c; ++j) s += x.data[i * c + j];
        y.data[i] = s;
    }
    return g.push(std::move(y), rg(g, {a}), [a](Graph& gg, Value self) {
        const Tensor& go = gg.grad_ref(self);
        const Tensor& x = gg.val(a);
        std::size_t r = x.rows(), c = x.cols();
        Tensor d = Tensor::zeros(x.shape);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) d.data[i * c + j] = go.data[i];
        gg.accum_grad(a, d);
    });
}

Value concat_cols(Graph& g, Value a, Value b) {
    const Tensor& ta = g.val(a);
    const Tensor& tb = g.val(b);
    if (ta.rows() != tb.rows())
        throw std::invalid_argument("concat_cols: row mismatch");
    std::size_t r = ta.rows(), ca = ta.cols(), cb = tb.cols();
    Tensor y = Tensor::zeros({r, ca + cb});
    for (std::size_t i = 0; i < r; ++i) {
        std::copy_n(&ta.data[i * ca], ca, &y.data[i * (ca + cb)]);
        std::copy_n(&tb.data[i * cb], cb, &y.data[i * (ca + cb) + ca]);
    }
    return g.push(std::move(y), rg(g, {a, b}), [a, b, ca, cb](Graph& gg, Value self) {
        const Tensor& go = gg.grad_ref(self);
        std::size_t r = go.rows();
        Tensor da = Tensor::zeros({r, ca}), db = Tensor::zeros({r, cb});
        for (std::size_t i = 0; i < r; ++i) {
            std::copy_n(&go.data[i * (ca + cb)], ca, &da.data[i * ca]);
            std::copy_n(&go.data[i * (ca + cb) + ca], cb, &db.data[i * cb]);
        }
        gg.accum_grad(a, da);
        gg.accum_grad(b, db);
    });
}

Value slice_cols(Graph& g, Value a, std::size_t c0, std::size_t c1) {
    const Tensor& x = g.val(a);
    std::size_t r = x.rows(), c = x.cols(), w = c1 - c0;
    Tensor y = Tensor::zeros({r, w});
    for (std::size_t i = 0; i < r; ++i)
        std::copy_n(&x.data[i * c + c0], w, &y.data[i * w]);
    return g.push(std::move(y), rg(g, {a}), [a, c0](Graph& gg, Value self) {
        gg.accum_grad_cols(a, gg.grad_ref(self), c0);
    });
}

Value concat_rows(Graph& g, const std::vector<Value>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
    std::size_t c = g.val(parts[0]).cols(), r = 0;
    bool req = false;
    for (Value p : parts) {
        if (g.val(p).cols() != c)
            throw std::invalid_argument("concat_rows: col mismatch");
        r += g.val(p).rows();
        req = req || g.requires_grad(p);
    }
    Tensor y = Tensor::zeros({r, c});
    std::size_t off = 0;
    std::vector<std::pair<Value, std::size_t>> spans;
    for (Value p : parts) {
        const Tensor& t = g.val(p);
        std::copy_n(t.data.data(), t.size(), &y.data[off * c]);
        spans.push_back({p, off});
        off += t.rows();
    }
    return g.push(std::move(y), req && g.grad_enabled(),
                  [spans, c](Graph& gg, Value self) {
                      const Tensor& go = gg.grad_ref(self);
                      for (auto& [p, off] : spans) {
                          std::size_t pr = gg.val(p).rows();
                          Tensor d = Tensor::zeros({pr, c});
                          std::copy_n(&go.data[off * c], pr * c, d.data.data());
                          gg.accum_grad(p, d);
                      }
                  });
}

Value slice_rows(Graph& g, Value a, std::size_t r0, std::size_t r1) {
    const Tensor& x = g.val(a);
    std::size_t c = x.cols(), h = r1 - r0;
    Tensor y = Tensor::zeros({h, c});
    std::copy_n(&x.data[r0 * c], h * c, y.data.data());
    return g.push(std::move(y), rg(g, {a}), [a, r0](Graph& gg, Value self) {
        gg.accum_grad_rows(a, gg.grad_ref(self), r0);
    });
}

Value reshape(Graph& g, Value a, std::vector<std::size_t> shape) {
    const Tensor& x = g.val(a);
    if (Tensor::numel(shape) != x.size())
        throw std::invalid_argument("reshape: size mismatch");
    Tensor y(std::move(shape), x.data);
    return g.push(std::move(y), rg(g, {a}), [a](Graph& gg, Value self) {
        Tensor d = gg.grad_ref(self);
        d.shape = gg.val(a).shape;
        gg.accum_grad(a, d);
    });
}

Value detach(Graph& g, Value a) { return g.constant(g.val(a)); }

Value matmul(Graph& g, Value a, Value b) {
    Tensor y = ghq::matmul(g.val(a), g.val(b));
    return g.push(std::move(y), rg(g, {a, b}), [a, b](Graph& gg, Value self) {
        const Tensor& go = gg.grad_ref(self);
        if (gg.requires_grad(a)) gg.accum_grad(a, matmul_nt(go, gg.val(b)));
        if (gg.requires_grad(b)) gg.accum_grad(b, matmul_tn(gg.val(a), go));
    });
}

Value rowwise_matvec(Graph& g, Value x, Value w, std::size_t n, std::size_t e) {
    const Tensor& tx = g.val(x);
    const Tensor& tw = g.val(w);
    std::size_t rows = tx.rows();
    if (tx.cols() != n || tw.cols() != n * e || tw.rows() != rows)
        throw std::invalid_argument("rowwise_matvec: shape mismatch");
    Tensor y = Tensor::zeros({rows, e});
    for (std::size_t b = 0; b < rows; ++b) {
        const double* xb = &tx.data[b * n];
        const double* wb = &tw.data[b * n * e];
        double* yb = &y.data[b * e];
        for (std::size_t i = 0; i < n; ++i) {
            double xv = xb[i];
            const double* wrow = wb + i * e;
            for (std::size_t j = 0; j < e; ++j) yb[j] += xv * wrow[j];
        }
    }
    return g.push(std::move(y), rg(g, {x, w}), [x, w, n, e](Graph& gg, Value self) {
        const Tensor& go = gg.grad_ref(self);
        const Tensor& tx = gg.val(x);
        const Tensor& tw = gg.val(w);
        std::size_t rows = tx.rows();
        Tensor dx = Tensor::zeros(tx.shape), dw = Tensor::zeros(tw.shape);
        for (std::size_t b = 0; b < rows; ++b) {
            const double* gb = &go.data[b * e];
            const double* xb = &tx.data[b * n];
            const double* wb = &tw.data[b * n * e];
            double* dxb = &dx.data[b * n];
            double* dwb = &dw.data[b * n * e];
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0;
                const double* wrow = wb + i * e;
                double* dwrow = dwb + i * e;
                for (std::size_t j = 0; j < e; ++j) {
                    acc += gb[j] * wrow[j];
                    dwrow[j] += xb[i] * gb[j];
                }
                dxb[i] = acc;
            }
        }
        gg.accum_grad(x, dx);
        gg.accum_grad(w, dw);
    });
}

Value rowgroup_mean(Graph& g, Value a, std::size_t group) {
    const Tensor& x = g.val(a);
    std::size_t rows = x.rows(), c = x.cols();
    if (group == 0 || rows % group != 0)
        throw std::invalid_argument("rowgroup_mean: rows not divisible by group");
    std::size_t q = rows / group;
    Tensor y = Tensor::zeros({q, c});
    for (std::size_t b = 0; b < q; ++b)
        for (std::size_t j = 0; j < group; ++j)
            for (std::size_t k = 0; k < c; ++k)
                y.data[b * c + k] += x.data[(b * group + j) * c + k];
    for (double& v : y.data) v /= (double)group;
    return g.push(std::move(y), rg(g, {a}), [a, group, c](Graph& gg, Value self) {
        const Tensor& go = gg.grad_ref(self);
        std::size_t q = go.rows();
        Tensor d = Tensor::zeros(gg.val(a).shape);
        for (std::size_t b = 0; b < q; ++b)
            for (std::size_t j = 0; j < group; ++j)
                for (std::size_t k = 0; k < c; ++k)
                    d.data[(b * group + j) * c + k] = go.data[b * c + k] / (double)group;
        gg.accum_grad(a, d);
    });
}

Value linear_forward(Graph& g, Value input, Value weights, Value bias) {
    const Tensor& x = g.val(input);
    const Tensor& w = g.val(weights);
    if (x.cols() != w.rows())
        throw std::invalid_argument("linear_forward: input dim " + x.shape_str() +
                                    " does not match weights " + w.shape_str());
    return add_rowvec(g, matmul(g, input, weights), bias);
}

Value gru_cell_from_gi(Graph& g, Value gi, Value h_prev, Value wh, Value bh) {
    const Tensor& tgi = g.val(gi);
    const Tensor& th = g.val(h_prev);
    std::size_t rows = th.rows(), hd = th.cols();
    if (tgi.cols() != 3 * hd || tgi.rows() != rows)
        throw std::invalid_argument("gru_cell: gi/hidden dim mismatch");

    Tensor gh = ghq::matmul(th, g.val(wh));
    const Tensor& tbh = g.val(bh);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < 3 * hd; ++j) gh.data[i * 3 * hd + j] += tbh.data[j];

    Tensor r = Tensor::zeros({rows, hd}), z = Tensor::zeros({rows, hd}),
           nn = Tensor::zeros({rows, hd}), ghn = Tensor::zeros({rows, hd}),
           out = Tensor::zeros({rows, hd});
    for (std::size_t i = 0; i < rows; ++i) {
        const double* gi_row = &tgi.data[i * 3 * hd];
        const double* gh_row = &gh.data[i * 3 * hd];
        const double* hp = &th.data[i * hd];
        for (std::size_t j = 0; j < hd; ++j) {
            double rv = 1.0 / (1.0 + std::exp(-(gi_row[j] + gh_row[j])));
            double zv = 1.0 / (1.0 + std::exp(-(gi_row[hd + j] + gh_row[hd + j])));
            double hn = gh_row[2 * hd + j];
            double nv = std::tanh(gi_row[2 * hd + j] + rv * hn);
            r.data[i * hd + j] = rv;
            z.data[i * hd + j] = zv;
            nn.data[i * hd + j] = nv;
            ghn.data[i * hd + j] = hn;
            out.data[i * hd + j] = (1.0 - zv) * nv + zv * hp[j];
        }
    }
    return g.push(std::move(out), rg(g, {gi, h_prev, wh, bh}),
                  [gi, h_prev, wh, bh, r, z, nn, ghn, hd](Graph& gg, Value self) {
                      const Tensor& go = gg.grad_ref(self);
                      const Tensor& th = gg.val(h_prev);
                      std::size_t rows = th.rows();
                      Tensor dgi = Tensor::zeros({rows, 3 * hd});
                      Tensor dgh = Tensor::zeros({rows, 3 * hd});
                      Tensor dh = Tensor::zeros({rows, hd});
                      for (std::size_t i = 0; i < rows; ++i) {
                          for (std::size_t j = 0; j < hd; ++j) {
                              std::size_t ij = i * hd + j;
                              double dy = go.data[ij];
                              double rv = r.data[ij], zv = z.data[ij],
                                     nv = nn.data[ij], hn = ghn.data[ij];
                              double hp = th.data[ij];
                              double d_pre_n = dy * (1.0 - zv) * (1.0 - nv * nv);
                              double d_pre_z = dy * (hp - nv) * zv * (1.0 - zv);
                              double d_pre_r = d_pre_n * hn * rv * (1.0 - rv);
                              dgi.data[i * 3 * hd + j] = d_pre_r;
                              dgi.data[i * 3 * hd + hd + j] = d_pre_z;
                              dgi.data[i * 3 * hd + 2 * hd + j] = d_pre_n;
                              dgh.data[i * 3 * hd + j] = d_pre_r;
                              dgh.data[i * 3 * hd + hd + j] = d_pre_z;
                              dgh.data[i * 3 * hd + 2 * hd + j] = d_pre_n * rv;
                              dh.data[ij] = dy * zv;
                          }
                      }
                      gg.accum_grad(gi, dgi);
                      if (gg.requires_grad(h_prev)) {
                          Tensor dh_mat = matmul_nt(dgh, gg.val(wh));
                          for (std::size_t k = 0; k < dh.size(); ++k)
                              dh.data[k] += dh_mat.data[k];
                          gg.accum_grad(h_prev, dh);
                      }
                      if (gg.requires_grad(wh))
                          gg.accum_grad(wh, matmul_tn(gg.val(h_prev), dgh));
                      if (gg.requires_grad(bh)) {
                          Tensor cs = colsum(dgh);
                          cs.shape = gg.val(bh).shape;
                          gg.accum_grad(bh, cs);
                      }
                  });
}

Value gru_cell_forward(Graph& g, Value input, Value hidden_prev, const GruParams& p) {
    const Tensor& x = g.val(input);
    const Tensor& wx = g.val(p.wx);
    if (x.cols() != wx.rows())
        throw std::invalid_argument("gru_cell_forward: input dim mismatch");
    Value gi = add_rowvec(g, matmul(g, input, p.wx), p.bx);
    return gru_cell_from_gi(g, gi, hidden_prev, p.wh, p.bh);
}

Value gaussian_sample(Graph& g, const GaussianValue& dist, const Tensor& noise) {
    if (!g.val(dist.mean).same_shape(noise))
        throw std::invalid_argument("gaussian_sample: noise shape mismatch");
    Value std = exp_op(g, dist.log_std);
    Value scaled = mul(g, std, g.constant(noise));
    return add(g, dist.mean, scaled);
}

Value gaussian_kl_rows(Graph& g, const GaussianValue& p, const GaussianValue& q) {
    check_same_shape(g, p.mean, q.mean, "gaussian_kl");
    check_same_shape(g, p.log_std, q.log_std, "gaussian_kl");
    // log(sq/sp) + (sp^2 + (mp-mq)^2) / (2 sq^2) - 1/2, summed over columns
    Value dl = sub(g, q.log_std, p.log_std);
    Value var_p = exp_op(g, scale(g, p.log_std, 2.0));
    Value inv_var_q = exp_op(g, scale(g, q.log_std, -2.0));
    Value d2 = square(g, sub(g, p.mean, q.mean));
    Value ratio = scale(g, mul(g, add(g, var_p, d2), inv_var_q), 0.5);
    Value elem = add_scalar(g, add(g, dl, ratio), -0.5);
    return sum_cols(g, elem);
}

Value gaussian_kl(Graph& g, const GaussianValue& p, const GaussianValue& q) {
    return mean_all(g, gaussian_kl_rows(g, p, q));
}

Value ParamBinding::use(Param& p) {
    auto it = map_.find(&p);
    if (it != map_.end()) return it->second;
    Value v = g_.leaf(p.value, true);
    map_.emplace(&p, v);
    order_.push_back({&p, v});
    return v;
}

Tensor ParamBinding::grad_of(const Param& p) const {
    auto it = map_.find(const_cast<Param*>(&p));
    if (it == map_.end()) return Tensor::zeros(p.value.shape);
    return g_.grad(it->second);
}

std::vector<std::pair<Param*, Value>> ParamBinding::bound() const { return order_; }

void Adam::step(const std::vector<Param*>& params, const std::vector<Tensor>& grads) {
    ++step_count_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, (double)step_count_);
    double bc2 = 1.0 - std::pow(cfg_.beta2, (double)step_count_);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Param& p = *params[i];
        if (p.m.empty()) {
            p.m = Tensor::zeros(p.value.shape);
            p.v = Tensor::zeros(p.value.shape);
        }
        const Tensor* gptr = &grads[i];
        Tensor zero;
        if (gptr->empty()) {
            zero = Tensor::zeros(p.value.shape);
            gptr = &zero;
        } else if (!gptr->same_shape(p.value)) {
            throw std::invalid_argument("adam_step: grad shape mismatch for " + p.name);
        }
        for (std::size_t k = 0; k < p.value.size(); ++k) {
            double gk = gptr->data[k];
            p.m.data[k] = cfg_.beta1 * p.m.data[k] + (1 - cfg_.beta1) * gk;
            p.v.data[k] = cfg_.beta2 * p.v.data[k] + (1 - cfg_.beta2) * gk * gk;
            double mh = p.m.data[k] / bc1;
            double vh = p.v.data[k] / bc2;
            p.value.data[k] -= cfg_.lr * mh / (std::sqrt(vh) + cfg_.epsilon);
        }
    }
}

double clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
    double sq = 0;
    for (const Tensor& t : grads)
        for (double v : t.data) sq += v * v;
    double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0) {
        double s = max_norm / norm;
        for (Tensor& t : grads)
            for (double& v : t.data) v *= s;
    }
    return norm;
}

void init_uniform_fanin(Tensor& t, std::size_t fan_in, Rng& rng) {
    double bound = 1.0 / std::sqrt((double)std::max<std::size_t>(1, fan_in));
    for (double& v : t.data) v = rng.uniform(-bound, bound);
}

double max_rel_grad_error(std::vector<Param*> params,
                          const std::function<Value(Graph&, ParamBinding&)>& f,
                          double h) {
    std::vector<Tensor> analytic;
    {
        Graph g;
        ParamBinding ctx(g);
        Value loss = f(g, ctx);
        g.backward(loss);
        for (Param* p : params) analytic.push_back(ctx.grad_of(*p));
    }
    auto eval = [&]() {
        Graph g(false);
        ParamBinding ctx(g);
        Value loss = f(g, ctx);
        return g.val(loss).data[0];
    };
    double worst = 0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Param& p = *params[pi];
        for (std::size_t k = 0; k < p.value.size(); ++k) {
            double orig = p.value.data[k];
            p.value.data[k] = orig + h;
            double up = eval();
            p.value.data[k] = orig - h;
            double dn = eval();
            p.value.data[k] = orig;
            double num = (up - dn) / (2 * h);
            double ana = analytic[pi].data[k];
            double err = std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-6});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace ghq::autodiff
