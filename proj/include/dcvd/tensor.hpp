#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <vector>

namespace dcvd::nn {

using Mat = Eigen::MatrixXd;

/// One node of the reverse-mode tape. Tensors are shared handles to nodes;
/// parameters are long-lived leaves, intermediates are rebuilt every forward.
struct TensorNode {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    bool grad_set = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;

    TensorNode(Mat v, bool rg) : value(std::move(v)), requires_grad(rg) {}

    Mat& ensure_grad() {
        if (!grad_set) {
            grad = Mat::Zero(value.rows(), value.cols());
            grad_set = true;
        }
        return grad;
    }
    void clear_grad() {
        grad.resize(0, 0);
        grad_set = false;
    }
};

class Tensor {
public:
    Tensor() = default;

    static Tensor constant(Mat v) { return Tensor(std::make_shared<TensorNode>(std::move(v), false)); }
    static Tensor leaf(Mat v) { return Tensor(std::make_shared<TensorNode>(std::move(v), true)); }

    const Mat& value() const { return node_->value; }
    Mat& mutable_value() { return node_->value; }
    const Mat& grad() const { return node_->grad; }
    bool has_grad() const { return node_->grad_set; }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    Eigen::Index rows() const { return node_->value.rows(); }
    Eigen::Index cols() const { return node_->value.cols(); }
    double scalar() const { return node_->value(0, 0); }

    void clear_grad() { node_->clear_grad(); }

    explicit operator bool() const { return node_ != nullptr; }
    const std::shared_ptr<TensorNode>& node() const { return node_; }

    explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

private:
    std::shared_ptr<TensorNode> node_;
};

/// Runs reverse-mode accumulation from `loss` (must be 1x1). Gradients
/// accumulate into every reachable node with requires_grad set.
void backward(const Tensor& loss);

// ---- elementwise / structural ops -----------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

/// a: n x d, r: 1 x d, added to every row.
Tensor add_rowvec(const Tensor& a, const Tensor& r);
/// a: n x d, c: n x 1, added to every column.
Tensor add_colvec(const Tensor& a, const Tensor& c);
/// a: n x d, c: n x 1, row i scaled by c(i, 0).
Tensor mul_colvec(const Tensor& a, const Tensor& c);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(const std::vector<Tensor>& parts);

/// Row gather: out.row(k) = table.row(ids[k]). Backward scatters into the table.
Tensor gather_rows(const Tensor& table, const std::vector<int>& ids);

// ---- nonlinearities ---------------------------------------------------------

Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor elu(const Tensor& a, double alpha = 1.0);
Tensor tanh_t(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor exp_t(const Tensor& a);
Tensor log_t(const Tensor& a);
Tensor sqrt_t(const Tensor& a);
Tensor reciprocal(const Tensor& a);

// ---- reductions / normalizations -------------------------------------------

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);

/// Per-row layer norm with learnable gain/bias (both 1 x d).
Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// Constant-matrix products; the constant side never receives gradient.
Tensor matmul_const_left(const Mat& a, const Tensor& b);
Tensor matmul_const_right(const Tensor& a, const Mat& b);

/// Sum over rows weighted per row: (1 x n) constant * a. Convenience wrapper.
inline Tensor weighted_row_sum(const Mat& weights, const Tensor& a) {
    return matmul_const_left(weights, a);
}

/// L2-normalizes each row; rows must have nonzero norm.
Tensor normalize_rows(const Tensor& a);

}  // namespace dcvd::nn
