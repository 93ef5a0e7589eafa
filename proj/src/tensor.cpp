#include "fhoi/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fhoi {

namespace {

std::string shape_to_str(const std::vector<std::size_t>& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << "x";
        os << s[i];
    }
    os << "]";
    return os.str();
}

// Decompose indexing around `axis` so slice ops work for any rank <= 3.
struct AxisView {
    std::size_t pre = 1, n = 1, post = 1;
};

AxisView axis_view(const std::vector<std::size_t>& shape, std::size_t axis) {
    if (axis >= shape.size())
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_to_str(shape));
    AxisView v;
    for (std::size_t i = 0; i < axis; ++i) v.pre *= shape[i];
    v.n = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) v.post *= shape[i];
    return v;
}

}  // namespace

std::string Tensor::shape_str() const { return shape_to_str(n_->shape); }

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double v, bool requires_grad) {
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    if (n->shape.empty() || n->shape.size() > 3)
        throw ShapeError("tensor rank must be 1..3, got " + shape_to_str(n->shape));
    n->value.assign(n->numel(), v);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> data,
                    bool requires_grad) {
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    if (n->shape.empty() || n->shape.size() > 3)
        throw ShapeError("tensor rank must be 1..3, got " + shape_to_str(n->shape));
    if (n->numel() != data.size())
        throw ShapeError("data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_to_str(n->shape));
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from({1}, {v}, requires_grad);
}

Tensor Tensor::uniform(std::vector<std::size_t> shape, double lo, double hi,
                       SplitMix64& rng, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (double& x : t.data_mut()) x = rng.uniform(lo, hi);
    return t;
}

Tensor Graph::make(std::vector<std::size_t> shape) {
    return Tensor::zeros(std::move(shape));
}

void Graph::check_finite(const Tensor& t, const char* op) {
    const auto& v = t.data();
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i]))
            throw NumericError(std::string(op) + " produced non-finite value at index " +
                               std::to_string(i));
    }
}

Tensor Graph::matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul needs rank-2 operands, got " + a.shape_str() + " and " +
                         b.shape_str());
    if (a.cols() != b.rows())
        throw ShapeError("matmul shape mismatch: " + a.shape_str() + " x " + b.shape_str());
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor c = make({m, n});
    const double* A = a.data().data();
    const double* B = b.data().data();
    double* C = c.data_mut().data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t t = 0; t < k; ++t) {
            const double av = A[i * k + t];
            if (av == 0.0) continue;
            const double* Brow = B + t * n;
            double* Crow = C + i * n;
            for (std::size_t j = 0; j < n; ++j) Crow[j] += av * Brow[j];
        }
    }
    check_finite(c, "matmul");
    auto an = a.node(), bn = b.node(), cn = c.node();
    record([an, bn, cn, m, k, n]() {
        cn->ensure_grad();
        an->ensure_grad();
        bn->ensure_grad();
        const double* G = cn->grad.data();
        // dA += G * B^T ; dB += A^T * G
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t t = 0; t < k; ++t) {
                double s = 0.0;
                for (std::size_t j = 0; j < n; ++j)
                    s += G[i * n + j] * bn->value[t * n + j];
                an->grad[i * k + t] += s;
            }
        for (std::size_t t = 0; t < k; ++t)
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t i = 0; i < m; ++i)
                    s += an->value[i * k + t] * G[i * n + j];
                bn->grad[t * n + j] += s;
            }
    });
    return c;
}

Tensor Graph::transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose needs rank-2, got " + a.shape_str());
    const std::size_t m = a.rows(), n = a.cols();
    Tensor c = make({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) c.mut(j, i) = a.at(i, j);
    auto an = a.node(), cn = c.node();
    record([an, cn, m, n]() {
        cn->ensure_grad();
        an->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                an->grad[i * n + j] += cn->grad[j * m + i];
    });
    return c;
}

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + " shape mismatch: " + a.shape_str() + " vs " +
                         b.shape_str());
}
}  // namespace

Tensor Graph::add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor c = make(a.shape());
    for (std::size_t i = 0; i < c.numel(); ++i) c.mut(i) = a.at(i) + b.at(i);
    check_finite(c, "add");
    auto an = a.node(), bn = b.node(), cn = c.node();
    record([an, bn, cn]() {
        cn->ensure_grad();
        an->ensure_grad();
        bn->ensure_grad();
        for (std::size_t i = 0; i < cn->grad.size(); ++i) {
            an->grad[i] += cn->grad[i];
            bn->grad[i] += cn->grad[i];
        }
    });
    return c;
}

Tensor Graph::sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor c = make(a.shape());
    for (std::size_t i = 0; i < c.numel(); ++i) c.mut(i) = a.at(i) - b.at(i);
    check_finite(c, "sub");
    auto an = a.node(), bn = b.node(), cn = c.node();
    record([an, bn, cn]() {
        cn->ensure_grad();
        an->ensure_grad();
        bn->ensure_grad();
        for (std::size_t i = 0; i < cn->grad.size(); ++i) {
            an->grad[i] += cn->grad[i];
            bn->grad[i] -= cn->grad[i];
        }
    });
    return c;
}

Tensor Graph::mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor c = make(a.shape());
    for (std::size_t i = 0; i < c.numel(); ++i) c.mut(i) = a.at(i) * b.at(i);
    check_finite(c, "mul");
    auto an = a.node(), bn = b.node(), cn = c.node();
    record([an, bn, cn]() {
        cn->ensure_grad();
        an->ensure_grad();
        bn->ensure_grad();
        for (std::size_t i = 0; i < cn->grad.size(); ++i) {
            an->grad[i] += cn->grad[i] * bn->value[i];
            bn->grad[i] += cn->grad[i] * an->value[i];
        }
    });
    return c;
}

Tensor Graph::div(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "div");
    Tensor c = make(a.shape());
    for (std::size_t i = 0; i < c.numel(); ++i) c.mut(i) = a.at(i) / b.at(i);
    check_finite(c, "div");
    auto an = a.node(), bn = b.node(), cn = c.node();
    record([an, bn, cn]() {
        cn->ensure_grad();
        an->ensure_grad();
        bn->ensure_grad();
        for (std::size_t i = 0; i < cn->grad.size(); ++i) {
            const double inv = 1.0 / bn->value[i];
            an->grad[i] += cn->grad[i] * inv;
            bn->grad[i] -= cn->grad[i] * an->value[i] * inv * inv;
        }
    });
    return c;
}

Tensor Graph::softmax(const Tensor& x, std::size_t axis) {
    const AxisView v = axis_view(x.shape(), axis);
    Tensor y = make(x.shape());
    for (std::size_t p = 0; p < v.pre; ++p)
        for (std::size_t q = 0; q < v.post; ++q) {
            double mx = -1e308;
            for (std::size_t i = 0; i < v.n; ++i)
                mx = std::max(mx, x.at((p * v.n + i) * v.post + q));
            double s = 0.0;
            for (std::size_t i = 0; i < v.n; ++i) {
                const double e = std::exp(x.at((p * v.n + i) * v.post + q) - mx);
                y.mut((p * v.n + i) * v.post + q) = e;
                s += e;
            }
            for (std::size_t i = 0; i < v.n; ++i)
                y.mut((p * v.n + i) * v.post + q) /= s;
        }
    check_finite(y, "softmax");
    auto xn = x.node(), yn = y.node();
    record([xn, yn, v]() {
        yn->ensure_grad();
        xn->ensure_grad();
        for (std::size_t p = 0; p < v.pre; ++p)
            for (std::size_t q = 0; q < v.post; ++q) {
                double dot = 0.0;
                for (std::size_t i = 0; i < v.n; ++i) {
                    const std::size_t k = (p * v.n + i) * v.post + q;
                    dot += yn->grad[k] * yn->value[k];
                }
                for (std::size_t i = 0; i < v.n; ++i) {
                    const std::size_t k = (p * v.n + i) * v.post + q;
                    xn->grad[k] += yn->value[k] * (yn->grad[k] - dot);
                }
            }
    });
    return y;
}

Tensor Graph::log_softmax(const Tensor& x, std::size_t axis) {
    const AxisView v = axis_view(x.shape(), axis);
    Tensor y = make(x.shape());
    for (std::size_t p = 0; p < v.pre; ++p)
        for (std::size_t q = 0; q < v.post; ++q) {
            double mx = -1e308;
            for (std::size_t i = 0; i < v.n; ++i)
                mx = std::max(mx, x.at((p * v.n + i) * v.post + q));
            double s = 0.0;
            for (std::size_t i = 0; i < v.n; ++i)
                s += std::exp(x.at((p * v.n + i) * v.post + q) - mx);
            const double lse = mx + std::log(s);
            for (std::size_t i = 0; i < v.n; ++i) {
                const std::size_t k = (p * v.n + i) * v.post + q;
                y.mut(k) = x.at(k) - lse;
            }
        }
    check_finite(y, "log_softmax");
    auto xn = x.node(), yn = y.node();
    record([xn, yn, v]() {
        yn->ensure_grad();
        xn->ensure_grad();
        for (std::size_t p = 0; p < v.pre; ++p)
            for (std::size_t q = 0; q < v.post; ++q) {
                double gsum = 0.0;
                for (std::size_t i = 0; i < v.n; ++i)
                    gsum += yn->grad[(p * v.n + i) * v.post + q];
                for (std::size_t i = 0; i < v.n; ++i) {
                    const std::size_t k = (p * v.n + i) * v.post + q;
                    xn->grad[k] += yn->grad[k] - std::exp(yn->value[k]) * gsum;
                }
            }
    });
    return y;
}

Tensor Graph::layer_norm(const Tensor& x, std::size_t axis, double eps) {
    if (eps <= 0.0) throw NumericError("layer_norm eps must be > 0");
    const AxisView v = axis_view(x.shape(), axis);
    if (v.n < 2) throw ShapeError("layer_norm slice length must be >= 2");
    Tensor y = make(x.shape());
    // Cache 1/s per slice for the adjoint.
    auto inv_s = std::make_shared<std::vector<double>>(v.pre * v.post);
    for (std::size_t p = 0; p < v.pre; ++p)
        for (std::size_t q = 0; q < v.post; ++q) {
            double mu = 0.0;
            for (std::size_t i = 0; i < v.n; ++i)
                mu += x.at((p * v.n + i) * v.post + q);
            mu /= static_cast<double>(v.n);
            double var = 0.0;
            for (std::size_t i = 0; i < v.n; ++i) {
                const double d = x.at((p * v.n + i) * v.post + q) - mu;
                var += d * d;
            }
            var /= static_cast<double>(v.n);
            const double s = std::sqrt(var + eps);
            (*inv_s)[p * v.post + q] = 1.0 / s;
            for (std::size_t i = 0; i < v.n; ++i) {
                const std::size_t k = (p * v.n + i) * v.post + q;
                y.mut(k) = (x.at(k) - mu) / s;
            }
        }
    check_finite(y, "layer_norm");
    auto xn = x.node(), yn = y.node();
    record([xn, yn, v, inv_s]() {
        yn->ensure_grad();
        xn->ensure_grad();
        const double n = static_cast<double>(v.n);
        for (std::size_t p = 0; p < v.pre; ++p)
            for (std::size_t q = 0; q < v.post; ++q) {
                double gm = 0.0, gym = 0.0;
                for (std::size_t i = 0; i < v.n; ++i) {
                    const std::size_t k = (p * v.n + i) * v.post + q;
                    gm += yn->grad[k];
                    gym += yn->grad[k] * yn->value[k];
                }
                gm /= n;
                gym /= n;
                const double is = (*inv_s)[p * v.post + q];
                for (std::size_t i = 0; i < v.n; ++i) {
                    const std::size_t k = (p * v.n + i) * v.post + q;
                    xn->grad[k] += is * (yn->grad[k] - gm - yn->value[k] * gym);
                }
            }
    });
    return y;
}

Tensor Graph::reduce(const Tensor& x, std::size_t axis, ReduceKind kind) {
    const AxisView v = axis_view(x.shape(), axis);
    std::vector<std::size_t> oshape;
    for (std::size_t i = 0; i < x.rank(); ++i)
        if (i != axis) oshape.push_back(x.shape()[i]);
    if (oshape.empty()) oshape.push_back(1);
    Tensor y = make(oshape);
    const double scale = kind == ReduceKind::Mean ? 1.0 / static_cast<double>(v.n) : 1.0;
    for (std::size_t p = 0; p < v.pre; ++p)
        for (std::size_t q = 0; q < v.post; ++q) {
            double s = 0.0;
            for (std::size_t i = 0; i < v.n; ++i)
                s += x.at((p * v.n + i) * v.post + q);
            y.mut(p * v.post + q) = s * scale;
        }
    check_finite(y, "reduce");
    auto xn = x.node(), yn = y.node();
    record([xn, yn, v, scale]() {
        yn->ensure_grad();
        xn->ensure_grad();
        for (std::size_t p = 0; p < v.pre; ++p)
            for (std::size_t q = 0; q < v.post; ++q) {
                const double g = yn->grad[p * v.post + q] * scale;
                for (std::size_t i = 0; i < v.n; ++i)
                    xn->grad[(p * v.n + i) * v.post + q] += g;
            }
    });
    return y;
}

Tensor Graph::sum_all(const Tensor& x) {
    Tensor y = make({1});
    double s = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) s += x.at(i);
    y.mut(0) = s;
    check_finite(y, "sum_all");
    auto xn = x.node(), yn = y.node();
    record([xn, yn]() {
        yn->ensure_grad();
        xn->ensure_grad();
        const double g = yn->grad[0];
        for (double& gi : xn->grad) gi += g;
    });
    return y;
}

Tensor Graph::unary(const Tensor& x, const char* name,
                    const std::function<double(double)>& f,
                    const std::function<double(double, double)>& dfdx_from_xy) {
    Tensor y = make(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y.mut(i) = f(x.at(i));
    check_finite(y, name);
    auto xn = x.node(), yn = y.node();
    record([xn, yn, dfdx_from_xy]() {
        yn->ensure_grad();
        xn->ensure_grad();
        for (std::size_t i = 0; i < yn->grad.size(); ++i)
            xn->grad[i] += yn->grad[i] * dfdx_from_xy(xn->value[i], yn->value[i]);
    });
    return y;
}

Tensor Graph::tanh(const Tensor& x) {
    return unary(x, "tanh", [](double v) { return std::tanh(v); },
                 [](double, double y) { return 1.0 - y * y; });
}

Tensor Graph::sigmoid(const Tensor& x) {
    return unary(
        x, "sigmoid",
        [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v))
                                     : std::exp(v) / (1.0 + std::exp(v)); },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor Graph::exp(const Tensor& x) {
    return unary(x, "exp", [](double v) { return std::exp(v); },
                 [](double, double y) { return y; });
}

Tensor Graph::log1p(const Tensor& x) {
    for (std::size_t i = 0; i < x.numel(); ++i)
        if (x.at(i) <= -1.0)
            throw NumericError("log1p domain violation at index " + std::to_string(i));
    return unary(x, "log1p", [](double v) { return std::log1p(v); },
                 [](double v, double) { return 1.0 / (1.0 + v); });
}

Tensor Graph::log(const Tensor& x) {
    for (std::size_t i = 0; i < x.numel(); ++i)
        if (x.at(i) <= 0.0)
            throw NumericError("log domain violation at index " + std::to_string(i));
    return unary(x, "log", [](double v) { return std::log(v); },
                 [](double v, double) { return 1.0 / v; });
}

Tensor Graph::neg(const Tensor& x) {
    return unary(x, "neg", [](double v) { return -v; },
                 [](double, double) { return -1.0; });
}

Tensor Graph::relu(const Tensor& x) {
    return unary(x, "relu", [](double v) { return v > 0 ? v : 0.0; },
                 [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor Graph::softplus(const Tensor& x) {
    return unary(x, "softplus",
                 [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); },
                 [](double v, double) {
                     return v >= 0 ? 1.0 / (1.0 + std::exp(-v))
                                   : std::exp(v) / (1.0 + std::exp(v));
                 });
}

Tensor Graph::abs(const Tensor& x) {
    return unary(x, "abs", [](double v) { return std::abs(v); },
                 [](double v, double) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}

Tensor Graph::scale(const Tensor& x, double c) {
    return unary(x, "scale", [c](double v) { return c * v; },
                 [c](double, double) { return c; });
}

Tensor Graph::add_const(const Tensor& x, double c) {
    return unary(x, "add_const", [c](double v) { return v + c; },
                 [](double, double) { return 1.0; });
}

Tensor Graph::pow_const(const Tensor& x, double p) {
    if (p == 0.0)
        return unary(x, "pow_const", [](double) { return 1.0; },
                     [](double, double) { return 0.0; });
    return unary(x, "pow_const", [p](double v) { return std::pow(v, p); },
                 [p](double v, double) {
                     return v == 0.0 && p < 1.0 ? 0.0 : p * std::pow(v, p - 1.0);
                 });
}

Tensor Graph::max_const(const Tensor& x, double c) {
    return unary(x, "max_const", [c](double v) { return std::max(v, c); },
                 [c](double v, double) { return v >= c ? 1.0 : 0.0; });
}

Tensor Graph::min_const(const Tensor& x, double c) {
    return unary(x, "min_const", [c](double v) { return std::min(v, c); },
                 [c](double v, double) { return v <= c ? 1.0 : 0.0; });
}

Tensor Graph::slice(const Tensor& x, std::size_t axis, std::size_t i0, std::size_t i1) {
    if (x.rank() != 2) throw ShapeError("slice needs rank-2, got " + x.shape_str());
    if (axis > 1 || i0 >= i1 || i1 > x.shape()[axis])
        throw ShapeError("slice range [" + std::to_string(i0) + "," + std::to_string(i1) +
                         ") invalid for axis " + std::to_string(axis) + " of " + x.shape_str());
    const std::size_t m = x.rows(), n = x.cols();
    Tensor y = axis == 0 ? make({i1 - i0, n}) : make({m, i1 - i0});
    if (axis == 0) {
        for (std::size_t i = i0; i < i1; ++i)
            for (std::size_t j = 0; j < n; ++j) y.mut(i - i0, j) = x.at(i, j);
    } else {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i0; j < i1; ++j) y.mut(i, j - i0) = x.at(i, j);
    }
    auto xn = x.node(), yn = y.node();
    record([xn, yn, axis, i0, i1, m, n]() {
        yn->ensure_grad();
        xn->ensure_grad();
        if (axis == 0) {
            for (std::size_t i = i0; i < i1; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    xn->grad[i * n + j] += yn->grad[(i - i0) * n + j];
        } else {
            const std::size_t w = i1 - i0;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = i0; j < i1; ++j)
                    xn->grad[i * n + j] += yn->grad[i * w + (j - i0)];
        }
    });
    return y;
}

Tensor Graph::concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows of empty list");
    const std::size_t n = parts[0].cols();
    std::size_t m = 0;
    for (const Tensor& p : parts) {
        if (p.rank() != 2 || p.cols() != n)
            throw ShapeError("concat_rows column mismatch");
        m += p.rows();
    }
    Tensor y = make({m, n});
    std::size_t r = 0;
    for (const Tensor& p : parts) {
        for (std::size_t i = 0; i < p.rows(); ++i)
            for (std::size_t j = 0; j < n; ++j) y.mut(r + i, j) = p.at(i, j);
        r += p.rows();
    }
    std::vector<std::shared_ptr<detail::Node>> pn;
    pn.reserve(parts.size());
    for (const Tensor& p : parts) pn.push_back(p.node());
    auto yn = y.node();
    record([pn, yn, n]() {
        yn->ensure_grad();
        std::size_t r = 0;
        for (const auto& p : pn) {
            p->ensure_grad();
            const std::size_t rows = p->shape[0];
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    p->grad[i * n + j] += yn->grad[(r + i) * n + j];
            r += rows;
        }
    });
    return y;
}

Tensor Graph::reshape(const Tensor& x, std::vector<std::size_t> shape) {
    Tensor y = Tensor::from(std::move(shape), x.data());
    if (y.numel() != x.numel())
        throw ShapeError("reshape element count mismatch: " + x.shape_str() + " -> " +
                         y.shape_str());
    auto xn = x.node(), yn = y.node();
    record([xn, yn]() {
        yn->ensure_grad();
        xn->ensure_grad();
        for (std::size_t i = 0; i < yn->grad.size(); ++i) xn->grad[i] += yn->grad[i];
    });
    return y;
}

void Graph::backward(const Tensor& loss) {
    if (backward_done_)
        throw NumericError("backward already ran on this graph; build a fresh graph");
    if (loss.numel() != 1)
        throw ShapeError("backward root must be scalar, got " + loss.shape_str());
    if (steps_.empty()) throw NumericError("backward on empty graph");
    backward_done_ = true;
    loss.node()->ensure_grad();
    loss.node()->grad[0] = 1.0;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

GradCheckReport finite_diff_check(const std::function<double()>& eval,
                                  const std::vector<std::pair<std::string, Tensor>>& params,
                                  double h, double rel_tol) {
    if (h <= 0.0) throw NumericError("finite_diff_check requires h > 0");
    GradCheckReport rep;
    rep.pass = true;
    for (const auto& [name, t] : params) {
        GradCheckEntry entry;
        entry.name = name;
        Tensor tt = t;
        const std::vector<double>& g = tt.grad();
        for (std::size_t i = 0; i < tt.numel(); ++i) {
            const double saved = tt.at(i);
            tt.mut(i) = saved + h;
            const double fp = eval();
            tt.mut(i) = saved - h;
            const double fm = eval();
            tt.mut(i) = saved;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw NumericError("finite_diff_check: objective non-finite at " + name);
            const double fd = (fp - fm) / (2.0 * h);
            const double an = g[i];
            const double scale = std::max({std::abs(fd), std::abs(an), 1e-2});
            const double rel = std::abs(fd - an) / scale;
            if (rel > entry.rel_err) {
                entry.rel_err = rel;
                entry.index = i;
            }
        }
        if (entry.rel_err > rep.max_rel_err) {
            rep.max_rel_err = entry.rel_err;
            rep.worst_name = entry.name;
            rep.worst_index = entry.index;
        }
        rep.per_param.push_back(std::move(entry));
    }
    rep.pass = rep.max_rel_err <= rel_tol;
    return rep;
}

}  // namespace fhoi
