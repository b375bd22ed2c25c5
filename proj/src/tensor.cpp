#include "bessgnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <Eigen/Core>

#include "bessgnn/errors.hpp"
#include "bessgnn/random.hpp"

namespace bessgnn::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

std::size_t rows_of(const Shape& s) {
    if (s.empty()) return 1;
    return s[0];
}
std::size_t cols_of(const Shape& s) {
    if (s.size() < 2) return 1;
    return shape_size(s) / s[0];
}

std::shared_ptr<TapeNode> make_node(Shape shape, std::vector<double> value, const char* op,
                                    std::vector<std::shared_ptr<TapeNode>> inputs) {
    auto n = std::make_shared<TapeNode>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->op = op;
    n->requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                   [](const auto& in) { return in->requires_grad; });
    if (n->requires_grad) n->inputs = std::move(inputs);
    return n;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    }
}

void require_2d(const Tensor& a, const char* op) {
    if (a.shape().size() != 2) {
        throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_str(a.shape()));
    }
}

} // namespace

std::size_t shape_size(const Shape& shape) noexcept {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_size(shape) != data.size()) {
        throw DimensionError("tensor: shape " + shape_str(shape) + " holds " +
                             std::to_string(shape_size(shape)) + " values, got " +
                             std::to_string(data.size()));
    }
    node_ = std::make_shared<TapeNode>();
    node_->shape = std::move(shape);
    node_->value = std::move(data);
    node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
    auto n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(n, v), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) { return Tensor({}, {v}, requires_grad); }

Tensor Tensor::column(std::vector<double> v) {
    auto n = v.size();
    return Tensor({n, 1}, std::move(v));
}

Tensor Tensor::row(std::vector<double> v) {
    auto n = v.size();
    return Tensor({1, n}, std::move(v));
}

Tensor Tensor::from_node(std::shared_ptr<TapeNode> n) {
    Tensor t;
    t.node_ = std::move(n);
    return t;
}

std::size_t Tensor::rows() const { return rows_of(node_->shape); }
std::size_t Tensor::cols() const { return cols_of(node_->shape); }

double Tensor::item() const {
    if (size() != 1) throw DimensionError("item: tensor " + shape_str(shape()) + " is not a scalar");
    return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

void Tensor::zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

namespace {

std::vector<TapeNode*> topo_order(TapeNode* root) {
    // Iterative post-order DFS; each node is emitted exactly once.
    std::vector<TapeNode*> order;
    std::unordered_set<TapeNode*> seen;
    std::vector<std::pair<TapeNode*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    seen.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            TapeNode* child = node->inputs[next++].get();
            if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;
}

} // namespace

void Tensor::backward() const {
    if (size() != 1) {
        throw DimensionError("backward: root must be a scalar, got " + shape_str(shape()));
    }
    if (!node_->requires_grad) return;
    auto order = topo_order(node_.get());
    node_->accumulate(0, 1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TapeNode* n = *it;
        if (n->backward && !n->grad.empty()) n->backward(*n);
    }
}

std::size_t Tensor::tape_size() const { return topo_order(node_.get()).size(); }

Tensor Tensor::detach() const { return Tensor(shape(), node_->value, false); }

// ---- ops -------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul");
    require_2d(b, "matmul");
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    if (b.shape()[0] != k) {
        throw DimensionError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    }
    std::vector<double> out(m * n);
    const ConstMap A(a.data().data(), m, k);
    const ConstMap B(b.data().data(), k, n);
    MutMap C(out.data(), m, n);
    // row by row so a row's value never depends on its position in the batch
    for (std::size_t i = 0; i < m; ++i) C.row(i).noalias() = A.row(i) * B;
    auto node = make_node({m, n}, std::move(out), "matmul", {a.node(), b.node()});
    if (node->requires_grad) {
        node->backward = [m, k, n](TapeNode& self) {
            auto& an = *self.inputs[0];
            auto& bn = *self.inputs[1];
            const ConstMap G(self.grad.data(), m, n);
            if (an.requires_grad) {
                MutMap dA(an.grad_buffer().data(), m, k);
                dA.noalias() += G * ConstMap(bn.value.data(), k, n).transpose();
            }
            if (bn.requires_grad) {
                MutMap dB(bn.grad_buffer().data(), k, n);
                dB.noalias() += ConstMap(an.value.data(), m, k).transpose() * G;
            }
        };
    }
    return Tensor::from_node(std::move(node));
}

namespace {

template <typename Fwd, typename DA, typename DB>
Tensor binary_elementwise(const Tensor& a, const Tensor& b, const char* op, Fwd fwd, DA da, DB db) {
    require_same_shape(a, b, op);
    std::vector<double> out(a.size());
    auto av = a.data();
    auto bv = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
    auto node = make_node(a.shape(), std::move(out), op, {a.node(), b.node()});
    if (node->requires_grad) {
        node->backward = [da, db](TapeNode& self) {
            auto& an = *self.inputs[0];
            auto& bn = *self.inputs[1];
            const std::size_t n = self.value.size();
            if (an.requires_grad) {
                auto& g = an.grad_buffer();
                for (std::size_t i = 0; i < n; ++i) g[i] += da(self.grad[i], an.value[i], bn.value[i]);
            }
            if (bn.requires_grad) {
                auto& g = bn.grad_buffer();
                for (std::size_t i = 0; i < n; ++i) g[i] += db(self.grad[i], an.value[i], bn.value[i]);
            }
        };
    }
    return Tensor::from_node(std::move(node));
}

template <typename Fwd, typename D>
Tensor unary_elementwise(const Tensor& x, const char* op, Fwd fwd, D d) {
    std::vector<double> out(x.size());
    auto xv = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
    auto node = make_node(x.shape(), std::move(out), op, {x.node()});
    if (node->requires_grad) {
        node->backward = [d](TapeNode& self) {
            auto& xn = *self.inputs[0];
            auto& g = xn.grad_buffer();
            for (std::size_t i = 0; i < self.value.size(); ++i) g[i] += self.grad[i] * d(xn.value[i]);
        };
    }
    return Tensor::from_node(std::move(node));
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double g, double, double) { return g; }, [](double g, double, double) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double g, double, double) { return g; }, [](double g, double, double) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double g, double, double y) { return g * y; },
        [](double g, double x, double) { return g * x; });
}

Tensor scale(const Tensor& a, double c) {
    return unary_elementwise(
        a, "scale", [c](double x) { return c * x; }, [c](double) { return c; });
}

Tensor add_scalar(const Tensor& a, double c) {
    return unary_elementwise(
        a, "add_scalar", [c](double x) { return x + c; }, [](double) { return 1.0; });
}

Tensor relu(const Tensor& x) {
    return unary_elementwise(
        x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& x, double slope) {
    return unary_elementwise(
        x, "leaky_relu", [slope](double v) { return v > 0.0 ? v : slope * v; },
        [slope](double v) { return v > 0.0 ? 1.0 : slope; });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
    require_2d(a, "add_row");
    const std::size_t m = a.rows(), n = a.cols();
    if (row.size() != n) {
        throw DimensionError("add_row: " + shape_str(a.shape()) + " vs row " + shape_str(row.shape()));
    }
    std::vector<double> out(a.data().begin(), a.data().end());
    auto rv = row.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] += rv[j];
    auto node = make_node(a.shape(), std::move(out), "add_row", {a.node(), row.node()});
    if (node->requires_grad) {
        node->backward = [m, n](TapeNode& self) {
            auto& an = *self.inputs[0];
            auto& rn = *self.inputs[1];
            if (an.requires_grad) {
                auto& g = an.grad_buffer();
                for (std::size_t i = 0; i < m * n; ++i) g[i] += self.grad[i];
            }
            if (rn.requires_grad) {
                auto& g = rn.grad_buffer();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
            }
        };
    }
    return Tensor::from_node(std::move(node));
}

Tensor mul_row(const Tensor& a, const Tensor& row) {
    require_2d(a, "mul_row");
    const std::size_t m = a.rows(), n = a.cols();
    if (row.size() != n) {
        throw DimensionError("mul_row: " + shape_str(a.shape()) + " vs row " + shape_str(row.shape()));
    }
    std::vector<double> out(m * n);
    auto av = a.data();
    auto rv = row.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = av[i * n + j] * rv[j];
    auto node = make_node(a.shape(), std::move(out), "mul_row", {a.node(), row.node()});
    if (node->requires_grad) {
        node->backward = [m, n](TapeNode& self) {
            auto& an = *self.inputs[0];
            auto& rn = *self.inputs[1];
            if (an.requires_grad) {
                auto& g = an.grad_buffer();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i * n + j] * rn.value[j];
            }
            if (rn.requires_grad) {
                auto& g = rn.grad_buffer();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j] * an.value[i * n + j];
            }
        };
    }
    return Tensor::from_node(std::move(node));
}

Tensor mul_col(const Tensor& a, const Tensor& col) {
    require_2d(a, "mul_col");
    const std::size_t m = a.rows(), n = a.cols();
    if (col.size() != m) {
        throw DimensionError("mul_col: " + shape_str(a.shape()) + " vs column " + shape_str(col.shape()));
    }
    std::vector<double> out(m * n);
    auto av = a.data();
    auto cv = col.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = av[i * n + j] * cv[i];
    auto node = make_node(a.shape(), std::move(out), "mul_col", {a.node(), col.node()});
    if (node->requires_grad) {
        node->backward = [m, n](TapeNode& self) {
            auto& an = *self.inputs[0];
            auto& cn = *self.inputs[1];
            if (an.requires_grad) {
                auto& g = an.grad_buffer();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i * n + j] * cn.value[i];
            }
            if (cn.requires_grad) {
                auto& g = cn.grad_buffer();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) g[i] += self.grad[i * n + j] * an.value[i * n + j];
            }
        };
    }
    return Tensor::from_node(std::move(node));
}

Tensor sum(const Tensor& x) {
    auto xv = x.data();
    double s = std::accumulate(xv.begin(), xv.end(), 0.0);
    auto node = make_node({}, {s}, "sum", {x.node()});
    if (node->requires_grad) {
        node->backward = [](TapeNode& self) {
            auto& g = self.inputs[0]->grad_buffer();
            for (auto& v : g) v += self.grad[0];
        };
    }
    return Tensor::from_node(std::move(node));
}

Tensor mean(const Tensor& x) {
    if (x.size() == 0) throw DimensionError("mean: empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor row_sum(const Tensor& x) {
    require_2d(x, "row_sum");
    const std::size_t m = x.rows(), n = x.cols();
    std::vector<double> out(m, 0.0);
    auto xv = x.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i] += xv[i * n + j];
    auto node = make_node({m, 1}, std::move(out), "row_sum", {x.node()});
    if (node->requires_grad) {
        node->backward = [m, n](TapeNode& self) {
            auto& g = self.inputs[0]->grad_buffer();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i];
        };
    }
    return Tensor::from_node(std::move(node));
}

Tensor select_cols(const Tensor& x, std::span<const std::size_t> cols) {
    require_2d(x, "select_cols");
    const std::size_t m = x.rows(), n = x.cols(), k = cols.size();
    for (auto c : cols) {
        if (c >= n) throw DimensionError("select_cols: column " + std::to_string(c) + " out of range for " + shape_str(x.shape()));
    }
    std::vector<std::size_t> idx(cols.begin(), cols.end());
    std::vector<double> out(m * k);
    auto xv = x.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < k; ++j) out[i * k + j] = xv[i * n + idx[j]];
    auto node = make_node({m, k}, std::move(out), "select_cols", {x.node()});
    if (node->requires_grad) {
        node->backward = [m, n, k, idx = std::move(idx)](TapeNode& self) {
            auto& g = self.inputs[0]->grad_buffer();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < k; ++j) g[i * n + idx[j]] += self.grad[i * k + j];
        };
    }
    return Tensor::from_node(std::move(node));
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> idx) {
    require_2d(a, "gather_rows");
    const std::size_t m = a.rows(), n = a.cols(), e = idx.size();
    for (auto r : idx) {
        if (r >= m) throw DimensionError("gather_rows: row " + std::to_string(r) + " out of range for " + shape_str(a.shape()));
    }
    std::vector<std::size_t> rows(idx.begin(), idx.end());
    std::vector<double> out(e * n);
    auto av = a.data();
    for (std::size_t i = 0; i < e; ++i)
        std::copy_n(av.begin() + static_cast<std::ptrdiff_t>(rows[i] * n), n, out.begin() + static_cast<std::ptrdiff_t>(i * n));
    auto node = make_node({e, n}, std::move(out), "gather_rows", {a.node()});
    if (node->requires_grad) {
        node->backward = [n, e, rows = std::move(rows)](TapeNode& self) {
            auto& g = self.inputs[0]->grad_buffer();
            for (std::size_t i = 0; i < e; ++i)
                for (std::size_t j = 0; j < n; ++j) g[rows[i] * n + j] += self.grad[i * n + j];
        };
    }
    return Tensor::from_node(std::move(node));
}

Tensor scatter_add_rows(const Tensor& a, std::span<const std::size_t> idx, std::size_t n_rows) {
    require_2d(a, "scatter_add_rows");
    const std::size_t e = a.rows(), n = a.cols();
    if (idx.size() != e) {
        throw DimensionError("scatter_add_rows: " + std::to_string(idx.size()) + " indices for " + shape_str(a.shape()));
    }
    for (auto r : idx) {
        if (r >= n_rows) throw DimensionError("scatter_add_rows: target row " + std::to_string(r) + " >= " + std::to_string(n_rows));
    }
    std::vector<std::size_t> rows(idx.begin(), idx.end());
    std::vector<double> out(n_rows * n, 0.0);
    auto av = a.data();
    for (std::size_t i = 0; i < e; ++i)
        for (std::size_t j = 0; j < n; ++j) out[rows[i] * n + j] += av[i * n + j];
    auto node = make_node({n_rows, n}, std::move(out), "scatter_add_rows", {a.node()});
    if (node->requires_grad) {
        node->backward = [n, e, rows = std::move(rows)](TapeNode& self) {
            auto& g = self.inputs[0]->grad_buffer();
            for (std::size_t i = 0; i < e; ++i)
                for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[rows[i] * n + j];
        };
    }
    return Tensor::from_node(std::move(node));
}

Tensor segment_softmax(const Tensor& a, std::span<const std::size_t> segment, std::size_t n_segments) {
    require_2d(a, "segment_softmax");
    const std::size_t e = a.rows(), h = a.cols();
    if (segment.size() != e) {
        throw DimensionError("segment_softmax: " + std::to_string(segment.size()) + " segment ids for " + shape_str(a.shape()));
    }
    std::vector<std::size_t> seg(segment.begin(), segment.end());
    for (auto s : seg) {
        if (s >= n_segments) throw DimensionError("segment_softmax: segment id out of range");
    }
    auto av = a.data();
    std::vector<double> peak(n_segments * h, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < e; ++i)
        for (std::size_t k = 0; k < h; ++k) peak[seg[i] * h + k] = std::max(peak[seg[i] * h + k], av[i * h + k]);
    std::vector<double> out(e * h);
    std::vector<double> denom(n_segments * h, 0.0);
    for (std::size_t i = 0; i < e; ++i)
        for (std::size_t k = 0; k < h; ++k) {
            out[i * h + k] = std::exp(av[i * h + k] - peak[seg[i] * h + k]);
            denom[seg[i] * h + k] += out[i * h + k];
        }
    for (std::size_t i = 0; i < e; ++i)
        for (std::size_t k = 0; k < h; ++k) out[i * h + k] /= denom[seg[i] * h + k];
    auto node = make_node({e, h}, std::move(out), "segment_softmax", {a.node()});
    if (node->requires_grad) {
        node->backward = [e, h, n_segments, seg = std::move(seg)](TapeNode& self) {
            // dx_i = y_i * (g_i - sum_{j in seg} g_j y_j)
            std::vector<double> dot(n_segments * h, 0.0);
            for (std::size_t i = 0; i < e; ++i)
                for (std::size_t k = 0; k < h; ++k) dot[seg[i] * h + k] += self.grad[i * h + k] * self.value[i * h + k];
            auto& g = self.inputs[0]->grad_buffer();
            for (std::size_t i = 0; i < e; ++i)
                for (std::size_t k = 0; k < h; ++k)
                    g[i * h + k] += self.value[i * h + k] * (self.grad[i * h + k] - dot[seg[i] * h + k]);
        };
    }
    return Tensor::from_node(std::move(node));
}

Tensor head_blocks(const Tensor& a, std::size_t heads) {
    const std::size_t d = a.size();
    if (heads == 0 || d % heads != 0) {
        throw DimensionError("head_blocks: length " + std::to_string(d) + " not divisible into " + std::to_string(heads) + " heads");
    }
    const std::size_t chunk = d / heads;
    std::vector<double> out(d * heads, 0.0);
    auto av = a.data();
    for (std::size_t c = 0; c < d; ++c) out[c * heads + c / chunk] = av[c];
    auto node = make_node({d, heads}, std::move(out), "head_blocks", {a.node()});
    if (node->requires_grad) {
        node->backward = [d, heads, chunk](TapeNode& self) {
            auto& g = self.inputs[0]->grad_buffer();
            for (std::size_t c = 0; c < d; ++c) g[c] += self.grad[c * heads + c / chunk];
        };
    }
    return Tensor::from_node(std::move(node));
}

Tensor mse(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "mse");
    const std::size_t n = pred.size();
    if (n == 0) throw DimensionError("mse: empty tensors");
    auto p = pred.data();
    auto t = target.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += (p[i] - t[i]) * (p[i] - t[i]);
    auto node = make_node({}, {acc / static_cast<double>(n)}, "mse", {pred.node(), target.node()});
    if (node->requires_grad) {
        node->backward = [n](TapeNode& self) {
            const double s = 2.0 * self.grad[0] / static_cast<double>(n);
            auto& pn = *self.inputs[0];
            auto& tn = *self.inputs[1];
            if (pn.requires_grad) {
                auto& g = pn.grad_buffer();
                for (std::size_t i = 0; i < n; ++i) g[i] += s * (pn.value[i] - tn.value[i]);
            }
            if (tn.requires_grad) {
                auto& g = tn.grad_buffer();
                for (std::size_t i = 0; i < n; ++i) g[i] -= s * (pn.value[i] - tn.value[i]);
            }
        };
    }
    return Tensor::from_node(std::move(node));
}

namespace {

Tensor hinge_impl(const Tensor& x, std::span<const double> lo, std::span<const double> hi,
                  bool scalar_bounds, double tol) {
    const std::size_t n = x.size();
    if (n == 0) throw DimensionError("interval_hinge_sq: empty tensor");
    auto xv = x.data();
    // signed excursion: negative below lo, positive above hi, 0 inside
    std::vector<double> excursion(n, 0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double l = scalar_bounds ? lo[0] : lo[i];
        const double h = scalar_bounds ? hi[0] : hi[i];
        if (!(l <= h)) {
            throw BoundsError("interval_hinge_sq: lower bound " + std::to_string(l) +
                              " exceeds upper bound " + std::to_string(h));
        }
        double e = 0.0;
        if (xv[i] < l) e = xv[i] - l;
        else if (xv[i] > h) e = xv[i] - h;
        if (std::abs(e) <= tol) e = 0.0;
        excursion[i] = e;
        acc += e * e;
    }
    auto node = make_node({}, {acc / static_cast<double>(n)}, "interval_hinge_sq", {x.node()});
    if (node->requires_grad) {
        node->backward = [n, excursion = std::move(excursion)](TapeNode& self) {
            const double s = 2.0 * self.grad[0] / static_cast<double>(n);
            auto& g = self.inputs[0]->grad_buffer();
            for (std::size_t i = 0; i < n; ++i) g[i] += s * excursion[i];
        };
    }
    return Tensor::from_node(std::move(node));
}

} // namespace

Tensor interval_hinge_sq(const Tensor& x, double lo, double hi, double tol) {
    const double l[1] = {lo};
    const double h[1] = {hi};
    return hinge_impl(x, l, h, true, tol);
}

Tensor interval_hinge_sq(const Tensor& x, const Tensor& lo, const Tensor& hi, double tol) {
    require_same_shape(x, lo, "interval_hinge_sq");
    require_same_shape(x, hi, "interval_hinge_sq");
    return hinge_impl(x, lo.data(), hi.data(), false, tol);
}

Tensor xavier_init(const Shape& shape, std::uint64_t seed) {
    if (shape.empty() || shape_size(shape) == 0) throw DimensionError("xavier_init: empty shape");
    const double fan_in = static_cast<double>(shape[0]);
    const double fan_out = shape.size() > 1 ? static_cast<double>(shape_size(shape) / shape[0]) : 1.0;
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Rng rng(seed);
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = rng.uniform(-limit, limit);
    return Tensor(shape, std::move(v), true);
}

} // namespace bessgnn::nn
