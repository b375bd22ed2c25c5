#pragma once

// Dense float64 tensors with a dynamic reverse-mode tape.
//
// Every op returns a new Tensor whose node keeps shared references to its
// inputs plus a backward closure. Calling backward() on a scalar result
// topologically sorts the reachable nodes once and runs each closure exactly
// once in reverse order, accumulating into the inputs' grad buffers.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace bessgnn::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape) noexcept;
std::string shape_str(const Shape& shape);

struct TapeNode {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad; // empty until something flows into this node
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<TapeNode>> inputs;
    std::function<void(TapeNode&)> backward;

    void accumulate(std::size_t i, double g) {
        if (grad.empty()) grad.assign(value.size(), 0.0);
        grad[i] += g;
    }
    std::vector<double>& grad_buffer() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
        return grad;
    }
};

class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double v, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);
    /// Column vector [n x 1] of constants.
    static Tensor column(std::vector<double> v);
    /// Row vector [1 x n] of constants.
    static Tensor row(std::vector<double> v);

    bool defined() const noexcept { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    std::size_t size() const { return node_->value.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> data() const { return node_->value; }
    /// Direct write access; only meaningful on leaves (parameters).
    std::span<double> mutable_data() { return node_->value; }
    double item() const;
    double at(std::size_t r, std::size_t c) const;

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const double> grad() const { return node_->grad; }
    std::span<double> mutable_grad() { return node_->grad_buffer(); }
    void zero_grad();

    /// Reverse sweep from this scalar, seeding d(self)/d(self) = 1.
    void backward() const;
    /// Number of tape nodes reachable from this tensor (including itself).
    std::size_t tape_size() const;

    /// Same values, cut from the tape.
    Tensor detach() const;
    const char* op() const { return node_->op; }

    const std::shared_ptr<TapeNode>& node() const { return node_; }
    static Tensor from_node(std::shared_ptr<TapeNode> n);

private:
    std::shared_ptr<TapeNode> node_;
};

// ---- ops -------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);

/// a [m x n] + row [1 x n], broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& row);
/// a [m x n] * row [1 x n], broadcast over rows.
Tensor mul_row(const Tensor& a, const Tensor& row);
/// a [m x n] * col [m x 1], broadcast over columns.
Tensor mul_col(const Tensor& a, const Tensor& col);

Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// [m x n] -> [m x 1]
Tensor row_sum(const Tensor& x);
Tensor select_cols(const Tensor& x, std::span<const std::size_t> cols);

/// Rows of `a` picked by index: out[e] = a[idx[e]].
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> idx);
/// out[idx[e]] += a[e]; out has `n_rows` rows.
Tensor scatter_add_rows(const Tensor& a, std::span<const std::size_t> idx, std::size_t n_rows);
/// Column-wise softmax of a [E x H] within groups of rows sharing a segment id.
Tensor segment_softmax(const Tensor& a, std::span<const std::size_t> segment, std::size_t n_segments);
/// Spreads a [1 x d] vector into a block matrix [d x heads]: column k holds
/// the k-th contiguous chunk of the vector, zeros elsewhere.
Tensor head_blocks(const Tensor& a, std::size_t heads);

/// Mean of squared differences over all elements.
Tensor mse(const Tensor& pred, const Tensor& target);

/// Mean over elements of d(x)^2, d(x) = max(0, lo - x, x - hi). Excursions
/// with d <= tol count as zero (tol = 0 gives the plain penalty).
Tensor interval_hinge_sq(const Tensor& x, double lo, double hi, double tol = 0.0);
/// Elementwise bounds; `lo` and `hi` are constants of x's shape.
Tensor interval_hinge_sq(const Tensor& x, const Tensor& lo, const Tensor& hi, double tol = 0.0);

/// Uniform in +-sqrt(6 / (fan_in + fan_out)); fan_in = shape[0],
/// fan_out = shape[1] (or 1 for vectors). Result requires grad.
Tensor xavier_init(const Shape& shape, std::uint64_t seed);

} // namespace bessgnn::nn
