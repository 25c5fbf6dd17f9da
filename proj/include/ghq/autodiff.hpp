#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ghq/rng.hpp"
#include "ghq/tensor.hpp"

namespace ghq::autodiff {

class Graph;

// Handle to a node on a graph's tape.
struct Value {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Nodes are appended in topological order by construction,
// so backward() is a single reverse sweep that visits each node exactly once.
class Graph {
  public:
    explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    Value leaf(Tensor value, bool requires_grad = false);
    Value constant(Tensor value) { return leaf(std::move(value), false); }

    const Tensor& val(Value v) const { return nodes_[v.id].val; }
    bool requires_grad(Value v) const { return nodes_[v.id].requires_grad; }
    bool grad_enabled() const { return grad_enabled_; }

    // Gradient of the last backward() target w.r.t. v; zeros if v was not
    // reached by the sweep.
    Tensor grad(Value v) const;

    // loss must be scalar; throws std::invalid_argument otherwise.
    void backward(Value loss);

    std::size_t num_nodes() const { return nodes_.size(); }

    // --- internal plumbing used by op implementations ---
    // back(graph, self) reads grad(self) and accumulates into parents.
    using BackFn = std::function<void(Graph&, Value)>;
    Value push(Tensor val, bool requires_grad, BackFn back);
    void accum_grad(Value v, const Tensor& g);
    void accum_grad_rows(Value v, const Tensor& g, std::size_t row0);
    void accum_grad_cols(Value v, const Tensor& g, std::size_t col0);
    Tensor& grad_ref(Value v);
    bool reached(Value v) const { return nodes_[v.id].reached; }

  private:
    struct Node {
        Tensor val;
        Tensor grad;  // lazily sized on first accumulation
        bool requires_grad = false;
        bool reached = false;
        BackFn back;
    };
    std::vector<Node> nodes_;
    bool grad_enabled_;
};

// ---- elementwise / structural ops ----
Value add(Graph& g, Value a, Value b);
Value sub(Graph& g, Value a, Value b);
Value mul(Graph& g, Value a, Value b);
Value add_rowvec(Graph& g, Value m, Value v);  // broadcast [1,c] over rows
Value scale(Graph& g, Value a, double s);
Value add_scalar(Graph& g, Value a, double s);
Value relu(Graph& g, Value a);
Value elu(Graph& g, Value a);
Value tanh_op(Graph& g, Value a);
Value sigmoid(Graph& g, Value a);
Value exp_op(Graph& g, Value a);
Value abs_op(Graph& g, Value a);
Value square(Graph& g, Value a);
Value clamp(Graph& g, Value a, double lo, double hi);
Value sum_all(Graph& g, Value a);   // -> [1]
Value mean_all(Graph& g, Value a);  // -> [1]
Value sum_cols(Graph& g, Value a);  // [m,n] -> [m,1]
Value concat_cols(Graph& g, Value a, Value b);
Value slice_cols(Graph& g, Value a, std::size_t c0, std::size_t c1);
Value concat_rows(Graph& g, const std::vector<Value>& parts);
Value slice_rows(Graph& g, Value a, std::size_t r0, std::size_t r1);
Value reshape(Graph& g, Value a, std::vector<std::size_t> shape);
Value detach(Graph& g, Value a);

// ---- linear algebra ----
Value matmul(Graph& g, Value a, Value b);
// x:[B,n], w:[B,n*e] viewed per row as [n,e]; out[b,j] = sum_i x[b,i]*w[b,i*e+j]
Value rowwise_matvec(Graph& g, Value x, Value w, std::size_t n, std::size_t e);
// [q*group, d] -> [q, d], mean over each block of `group` consecutive rows
Value rowgroup_mean(Graph& g, Value a, std::size_t group);

// input [rows,in] * W [in,out] + b [1,out]
Value linear_forward(Graph& g, Value input, Value weights, Value bias);

// ---- recurrent / distribution ops ----
struct GruParams {
    Value wx;  // [in, 3H] gate order r, z, n
    Value wh;  // [H, 3H]
    Value bx;  // [1, 3H]
    Value bh;  // [1, 3H]
};
// Fused cell taking the precomputed input-side pre-activation gi = x*wx + bx.
Value gru_cell_from_gi(Graph& g, Value gi, Value h_prev, Value wh, Value bh);
Value gru_cell_forward(Graph& g, Value input, Value hidden_prev, const GruParams& p);

struct GaussianValue {
    Value mean;
    Value log_std;  // clamped by the producing layer
};
// Reparameterized sample: mean + exp(log_std) .* noise
Value gaussian_sample(Graph& g, const GaussianValue& dist, const Tensor& noise);
// KL(p||q) per row (summed over latent dims) -> [rows,1]
Value gaussian_kl_rows(Graph& g, const GaussianValue& p, const GaussianValue& q);
// Summed over latent dims, meaned over batch rows -> scalar
Value gaussian_kl(Graph& g, const GaussianValue& p, const GaussianValue& q);

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

// ---- parameters and optimizer ----
struct Param {
    std::string name;
    Tensor value;
    // Adam moments, sized on first optimizer step.
    Tensor m;
    Tensor v;
};

// Binds parameters into a graph (once per graph) so gradients can be read
// back after backward().
class ParamBinding {
  public:
    explicit ParamBinding(Graph& g) : g_(g) {}
    Value use(Param& p);
    Tensor grad_of(const Param& p) const;
    std::vector<std::pair<Param*, Value>> bound() const;

  private:
    Graph& g_;
    std::unordered_map<Param*, Value> map_;
    std::vector<std::pair<Param*, Value>> order_;
};

struct AdamConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class Adam {
  public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
    // grads[i] pairs with params[i]; an empty grad means zero.
    void step(const std::vector<Param*>& params, const std::vector<Tensor>& grads);
    long step_count() const { return step_count_; }
    double lr() const { return cfg_.lr; }
    void set_lr(double lr) { cfg_.lr = lr; }
    const AdamConfig& config() const { return cfg_; }

  private:
    AdamConfig cfg_;
    long step_count_ = 0;
};

// Scales grads in place so their global L2 norm is at most max_norm.
double clip_global_norm(std::vector<Tensor>& grads, double max_norm);

// Uniform init in +-1/sqrt(fan_in).
void init_uniform_fanin(Tensor& t, std::size_t fan_in, Rng& rng);

// ---- finite-difference checking (shared by tests and `validate`) ----
// Builds the loss with `f` on a fresh graph each call; returns the maximum
// relative error between analytic and central-difference gradients.
double max_rel_grad_error(std::vector<Param*> params,
                          const std::function<Value(Graph&, ParamBinding&)>& f,
                          double h = 1e-5);

}  // namespace ghq::autodiff
