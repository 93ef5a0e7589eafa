#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "fhoi/common.hpp"
#include "fhoi/rng.hpp"

namespace fhoi {

namespace detail {
struct Node {
    std::vector<std::size_t> shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;

    std::size_t numel() const {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return n;
    }
    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
    }
};
}  // namespace detail

// Dense 64-bit tensor, rank <= 3, row-major. Value-semantic handle: copies
// share storage, which is what the autodiff tape needs.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<std::size_t> shape, double v, bool requires_grad = false);
    static Tensor from(std::vector<std::size_t> shape, std::vector<double> data,
                       bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);
    static Tensor uniform(std::vector<std::size_t> shape, double lo, double hi,
                          SplitMix64& rng, bool requires_grad = false);

    bool valid() const { return n_ != nullptr; }
    std::size_t rank() const { return n_->shape.size(); }
    std::size_t extent(std::size_t axis) const { return n_->shape.at(axis); }
    const std::vector<std::size_t>& shape() const { return n_->shape; }
    std::size_t numel() const { return n_->numel(); }
    std::size_t rows() const { return n_->shape[0]; }
    std::size_t cols() const { return rank() >= 2 ? n_->shape[1] : 1; }

    double at(std::size_t i) const { return n_->value[i]; }
    double at(std::size_t i, std::size_t j) const { return n_->value[i * cols() + j]; }
    double& mut(std::size_t i) { return n_->value[i]; }
    double& mut(std::size_t i, std::size_t j) { return n_->value[i * cols() + j]; }

    const std::vector<double>& data() const { return n_->value; }
    std::vector<double>& data_mut() { return n_->value; }
    const std::vector<double>& grad() const {
        n_->ensure_grad();
        return n_->grad;
    }
    void zero_grad() {
        if (!n_->grad.empty()) n_->grad.assign(n_->grad.size(), 0.0);
    }
    bool requires_grad() const { return n_->requires_grad; }
    void set_requires_grad(bool b) { n_->requires_grad = b; }

    std::string shape_str() const;

    std::shared_ptr<detail::Node> node() const { return n_; }

private:
    explicit Tensor(std::shared_ptr<detail::Node> n) : n_(std::move(n)) {}
    std::shared_ptr<detail::Node> n_;
    friend class Graph;
};

enum class ReduceKind { Sum, Mean };

// Tape of executed operations; backward() replays adjoints in exact reverse
// order. Single-threaded by design; independent Graphs may run in parallel.
class Graph {
public:
    Tensor matmul(const Tensor& a, const Tensor& b);
    Tensor transpose(const Tensor& a);

    Tensor add(const Tensor& a, const Tensor& b);
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);
    Tensor div(const Tensor& a, const Tensor& b);

    Tensor softmax(const Tensor& x, std::size_t axis);
    Tensor log_softmax(const Tensor& x, std::size_t axis);
    Tensor layer_norm(const Tensor& x, std::size_t axis, double eps = 1e-5);
    Tensor reduce(const Tensor& x, std::size_t axis, ReduceKind kind);
    Tensor sum_all(const Tensor& x);

    Tensor tanh(const Tensor& x);
    Tensor sigmoid(const Tensor& x);
    Tensor exp(const Tensor& x);
    Tensor log1p(const Tensor& x);
    Tensor log(const Tensor& x);
    Tensor neg(const Tensor& x);
    Tensor relu(const Tensor& x);
    Tensor softplus(const Tensor& x);
    Tensor abs(const Tensor& x);
    Tensor scale(const Tensor& x, double c);
    Tensor add_const(const Tensor& x, double c);
    Tensor pow_const(const Tensor& x, double p);
    Tensor max_const(const Tensor& x, double c);
    Tensor min_const(const Tensor& x, double c);

    Tensor slice(const Tensor& x, std::size_t axis, std::size_t i0, std::size_t i1);
    Tensor concat_rows(const std::vector<Tensor>& parts);
    Tensor reshape(const Tensor& x, std::vector<std::size_t> shape);

    // Sets d(loss)/d(leaf) for every leaf reachable on the tape. Repeated
    // backward on the same graph is an error.
    void backward(const Tensor& loss);

    std::size_t size() const { return steps_.size(); }

private:
    Tensor make(std::vector<std::size_t> shape);
    void record(std::function<void()> back) { steps_.push_back(std::move(back)); }
    static void check_finite(const Tensor& t, const char* op);

    Tensor unary(const Tensor& x, const char* name,
                 const std::function<double(double)>& f,
                 const std::function<double(double, double)>& dfdx_from_xy);

    std::vector<std::function<void()>> steps_;
    bool backward_done_ = false;
};

struct GradCheckEntry {
    std::string name;
    double rel_err = 0.0;
    std::size_t index = 0;
};

struct GradCheckReport {
    bool pass = false;
    double max_rel_err = 0.0;
    std::string worst_name;
    std::size_t worst_index = 0;
    std::vector<GradCheckEntry> per_param;
};

// Central-difference oracle. The analytic gradients must already sit in the
// params' grad slots; `eval` recomputes the scalar objective at the params'
// current values (and must be deterministic).
GradCheckReport finite_diff_check(const std::function<double()>& eval,
                                  const std::vector<std::pair<std::string, Tensor>>& params,
                                  double h = 1e-5, double rel_tol = 1e-4);

}  // namespace fhoi
