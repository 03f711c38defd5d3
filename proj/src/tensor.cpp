#include "dcvd/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace dcvd::nn {

namespace {

using NodePtr = std::shared_ptr<TensorNode>;

Tensor make_op(Mat value, std::vector<NodePtr> parents, std::function<void(TensorNode&)> backward_fn) {
    bool rg = false;
    for (const auto& p : parents) rg = rg || p->requires_grad;
    auto node = std::make_shared<TensorNode>(std::move(value), rg);
    if (rg) {
        node->parents = std::move(parents);
        node->backward_fn = std::move(backward_fn);
    }
    return Tensor(node);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()) + ")");
}

}  // namespace

void backward(const Tensor& loss) {
    if (loss.rows() != 1 || loss.cols() != 1)
        throw std::invalid_argument("backward: loss must be a 1x1 tensor");
    if (!loss.requires_grad()) return;

    // Iterative post-order topological sort over the parent DAG.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            TensorNode* parent = node->parents[idx++].get();
            if (parent->requires_grad && !visited.count(parent)) {
                visited.insert(parent);
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->ensure_grad()(0, 0) += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* node = *it;
        if (node->backward_fn && node->grad_set) node->backward_fn(*node);
    }
}

// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    return make_op(a.value() + b.value(), {a.node(), b.node()}, [](TensorNode& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->ensure_grad() += n.grad;
        if (n.parents[1]->requires_grad) n.parents[1]->ensure_grad() += n.grad;
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    return make_op(a.value() - b.value(), {a.node(), b.node()}, [](TensorNode& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->ensure_grad() += n.grad;
        if (n.parents[1]->requires_grad) n.parents[1]->ensure_grad() -= n.grad;
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    return make_op(a.value().cwiseProduct(b.value()), {a.node(), b.node()}, [](TensorNode& n) {
        if (n.parents[0]->requires_grad)
            n.parents[0]->ensure_grad() += n.grad.cwiseProduct(n.parents[1]->value);
        if (n.parents[1]->requires_grad)
            n.parents[1]->ensure_grad() += n.grad.cwiseProduct(n.parents[0]->value);
    });
}

Tensor scale(const Tensor& a, double s) {
    return make_op(a.value() * s, {a.node()}, [s](TensorNode& n) {
        n.parents[0]->ensure_grad() += n.grad * s;
    });
}

Tensor add_scalar(const Tensor& a, double s) {
    return make_op(Mat((a.value().array() + s).matrix()), {a.node()}, [](TensorNode& n) {
        n.parents[0]->ensure_grad() += n.grad;
    });
}

Tensor add_rowvec(const Tensor& a, const Tensor& r) {
    if (r.rows() != 1 || r.cols() != a.cols())
        throw std::invalid_argument("add_rowvec: broadcast vector must be 1 x cols(a)");
    Mat out = a.value();
    out.rowwise() += r.value().row(0);
    return make_op(std::move(out), {a.node(), r.node()}, [](TensorNode& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->ensure_grad() += n.grad;
        if (n.parents[1]->requires_grad) n.parents[1]->ensure_grad() += n.grad.colwise().sum();
    });
}

Tensor add_colvec(const Tensor& a, const Tensor& c) {
    if (c.cols() != 1 || c.rows() != a.rows())
        throw std::invalid_argument("add_colvec: broadcast vector must be rows(a) x 1");
    Mat out = a.value();
    out.colwise() += c.value().col(0);
    return make_op(std::move(out), {a.node(), c.node()}, [](TensorNode& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->ensure_grad() += n.grad;
        if (n.parents[1]->requires_grad) n.parents[1]->ensure_grad() += n.grad.rowwise().sum();
    });
}

Tensor mul_colvec(const Tensor& a, const Tensor& c) {
    if (c.cols() != 1 || c.rows() != a.rows())
        throw std::invalid_argument("mul_colvec: scale vector must be rows(a) x 1");
    Mat out = (a.value().array().colwise() * c.value().col(0).array()).matrix();
    return make_op(std::move(out), {a.node(), c.node()}, [](TensorNode& n) {
        if (n.parents[0]->requires_grad)
            n.parents[0]->ensure_grad() += (n.grad.array().colwise() * n.parents[1]->value.col(0).array()).matrix();
        if (n.parents[1]->requires_grad)
            n.parents[1]->ensure_grad() += n.grad.cwiseProduct(n.parents[0]->value).rowwise().sum();
    });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
    return make_op(a.value() * b.value(), {a.node(), b.node()}, [](TensorNode& n) {
        if (n.parents[0]->requires_grad)
            n.parents[0]->ensure_grad() += n.grad * n.parents[1]->value.transpose();
        if (n.parents[1]->requires_grad)
            n.parents[1]->ensure_grad() += n.parents[0]->value.transpose() * n.grad;
    });
}

Tensor transpose(const Tensor& a) {
    return make_op(a.value().transpose(), {a.node()}, [](TensorNode& n) {
        n.parents[0]->ensure_grad() += n.grad.transpose();
    });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows()) throw std::invalid_argument("concat_cols: row counts differ");
    Mat out(a.rows(), a.cols() + b.cols());
    out << a.value(), b.value();
    Eigen::Index ca = a.cols();
    return make_op(std::move(out), {a.node(), b.node()}, [ca](TensorNode& n) {
        if (n.parents[0]->requires_grad)
            n.parents[0]->ensure_grad() += n.grad.leftCols(ca);
        if (n.parents[1]->requires_grad)
            n.parents[1]->ensure_grad() += n.grad.rightCols(n.grad.cols() - ca);
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
    Eigen::Index cols = parts[0].cols();
    Eigen::Index rows = 0;
    for (const auto& p : parts) {
        if (p.cols() != cols) throw std::invalid_argument("concat_rows: column counts differ");
        rows += p.rows();
    }
    Mat out(rows, cols);
    std::vector<NodePtr> parents;
    std::vector<Eigen::Index> offsets;
    Eigen::Index r = 0;
    for (const auto& p : parts) {
        out.middleRows(r, p.rows()) = p.value();
        offsets.push_back(r);
        parents.push_back(p.node());
        r += p.rows();
    }
    return make_op(std::move(out), std::move(parents), [offsets](TensorNode& n) {
        for (std::size_t i = 0; i < n.parents.size(); ++i) {
            if (!n.parents[i]->requires_grad) continue;
            n.parents[i]->ensure_grad() += n.grad.middleRows(offsets[i], n.parents[i]->value.rows());
        }
    });
}

Tensor gather_rows(const Tensor& table, const std::vector<int>& ids) {
    Mat out(static_cast<Eigen::Index>(ids.size()), table.cols());
    for (std::size_t k = 0; k < ids.size(); ++k) {
        if (ids[k] < 0 || ids[k] >= table.rows())
            throw std::out_of_range("gather_rows: id out of range: " + std::to_string(ids[k]));
        out.row(static_cast<Eigen::Index>(k)) = table.value().row(ids[k]);
    }
    return make_op(std::move(out), {table.node()}, [ids](TensorNode& n) {
        if (!n.parents[0]->requires_grad) return;
        Mat& g = n.parents[0]->ensure_grad();
        for (std::size_t k = 0; k < ids.size(); ++k)
            g.row(ids[k]) += n.grad.row(static_cast<Eigen::Index>(k));
    });
}

// ---------------------------------------------------------------------------

Tensor relu(const Tensor& a) {
    return make_op(a.value().cwiseMax(0.0), {a.node()}, [](TensorNode& n) {
        n.parents[0]->ensure_grad() +=
            n.grad.cwiseProduct((n.parents[0]->value.array() > 0.0).cast<double>().matrix());
    });
}

Tensor leaky_relu(const Tensor& a, double slope) {
    Mat out = a.value().unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
    return make_op(std::move(out), {a.node()}, [slope](TensorNode& n) {
        Mat d = n.parents[0]->value.unaryExpr([slope](double x) { return x > 0.0 ? 1.0 : slope; });
        n.parents[0]->ensure_grad() += n.grad.cwiseProduct(d);
    });
}

Tensor elu(const Tensor& a, double alpha) {
    Mat out = a.value().unaryExpr([alpha](double x) { return x > 0.0 ? x : alpha * (std::exp(x) - 1.0); });
    Mat saved = out;
    return make_op(std::move(out), {a.node()}, [alpha, saved](TensorNode& n) {
        // d/dx elu = 1 for x>0, alpha*exp(x) = elu(x)+alpha otherwise
        Mat d(saved.rows(), saved.cols());
        for (Eigen::Index i = 0; i < saved.size(); ++i)
            d(i) = n.parents[0]->value(i) > 0.0 ? 1.0 : saved(i) + alpha;
        n.parents[0]->ensure_grad() += n.grad.cwiseProduct(d);
    });
}

Tensor tanh_t(const Tensor& a) {
    Mat out = a.value().array().tanh().matrix();
    Mat saved = out;
    return make_op(std::move(out), {a.node()}, [saved](TensorNode& n) {
        n.parents[0]->ensure_grad() += n.grad.cwiseProduct((1.0 - saved.array().square()).matrix());
    });
}

Tensor sigmoid(const Tensor& a) {
    Mat out = a.value().unaryExpr([](double x) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    });
    Mat saved = out;
    return make_op(std::move(out), {a.node()}, [saved](TensorNode& n) {
        n.parents[0]->ensure_grad() +=
            n.grad.cwiseProduct(saved.cwiseProduct((1.0 - saved.array()).matrix()));
    });
}

namespace {
constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
}

Tensor gelu(const Tensor& a) {
    // tanh approximation
    Mat out = a.value().unaryExpr([](double x) {
        double inner = kC * (x + 0.044715 * x * x * x);
        return 0.5 * x * (1.0 + std::tanh(inner));
    });
    return make_op(std::move(out), {a.node()}, [](TensorNode& n) {
        Mat d = n.parents[0]->value.unaryExpr([](double x) {
            double x3 = x * x * x;
            double inner = kC * (x + 0.044715 * x3);
            double t = std::tanh(inner);
            double sech2 = 1.0 - t * t;
            return 0.5 * (1.0 + t) + 0.5 * x * sech2 * kC * (1.0 + 3.0 * 0.044715 * x * x);
        });
        n.parents[0]->ensure_grad() += n.grad.cwiseProduct(d);
    });
}

Tensor softplus(const Tensor& a) {
    Mat out = a.value().unaryExpr([](double x) {
        return x > 30.0 ? x : (x < -30.0 ? std::exp(x) : std::log1p(std::exp(x)));
    });
    return make_op(std::move(out), {a.node()}, [](TensorNode& n) {
        Mat d = n.parents[0]->value.unaryExpr([](double x) {
            return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        });
        n.parents[0]->ensure_grad() += n.grad.cwiseProduct(d);
    });
}

Tensor exp_t(const Tensor& a) {
    Mat out = a.value().array().exp().matrix();
    Mat saved = out;
    return make_op(std::move(out), {a.node()}, [saved](TensorNode& n) {
        n.parents[0]->ensure_grad() += n.grad.cwiseProduct(saved);
    });
}

Tensor log_t(const Tensor& a) {
    return make_op(Mat(a.value().array().log().matrix()), {a.node()}, [](TensorNode& n) {
        n.parents[0]->ensure_grad() += n.grad.cwiseQuotient(n.parents[0]->value);
    });
}

Tensor sqrt_t(const Tensor& a) {
    Mat out = a.value().array().sqrt().matrix();
    Mat saved = out;
    return make_op(std::move(out), {a.node()}, [saved](TensorNode& n) {
        n.parents[0]->ensure_grad() += (n.grad.array() * 0.5 / saved.array()).matrix();
    });
}

Tensor reciprocal(const Tensor& a) {
    Mat out = a.value().cwiseInverse();
    Mat saved = out;
    return make_op(std::move(out), {a.node()}, [saved](TensorNode& n) {
        n.parents[0]->ensure_grad() -= n.grad.cwiseProduct(saved.cwiseProduct(saved));
    });
}

// ---------------------------------------------------------------------------

Tensor sum_all(const Tensor& a) {
    Mat out(1, 1);
    out(0, 0) = a.value().sum();
    return make_op(std::move(out), {a.node()}, [](TensorNode& n) {
        n.parents[0]->ensure_grad().array() += n.grad(0, 0);
    });
}

Tensor mean_all(const Tensor& a) {
    double inv = 1.0 / static_cast<double>(a.rows() * a.cols());
    Mat out(1, 1);
    out(0, 0) = a.value().sum() * inv;
    return make_op(std::move(out), {a.node()}, [inv](TensorNode& n) {
        n.parents[0]->ensure_grad().array() += n.grad(0, 0) * inv;
    });
}

Tensor softmax_rows(const Tensor& a) {
    Mat out(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        double mx = a.value().row(i).maxCoeff();
        Eigen::ArrayXd e = (a.value().row(i).array() - mx).exp();
        out.row(i) = (e / e.sum()).matrix();
    }
    Mat saved = out;
    return make_op(std::move(out), {a.node()}, [saved](TensorNode& n) {
        Mat& g = n.parents[0]->ensure_grad();
        for (Eigen::Index i = 0; i < saved.rows(); ++i) {
            double dot = n.grad.row(i).dot(saved.row(i));
            g.row(i) += (saved.row(i).array() * (n.grad.row(i).array() - dot)).matrix();
        }
    });
}

Tensor log_softmax_rows(const Tensor& a) {
    Mat out(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        double mx = a.value().row(i).maxCoeff();
        double lse = mx + std::log((a.value().row(i).array() - mx).exp().sum());
        out.row(i) = (a.value().row(i).array() - lse).matrix();
    }
    Mat saved = out;
    return make_op(std::move(out), {a.node()}, [saved](TensorNode& n) {
        Mat& g = n.parents[0]->ensure_grad();
        for (Eigen::Index i = 0; i < saved.rows(); ++i) {
            double s = n.grad.row(i).sum();
            g.row(i) += (n.grad.row(i).array() - s * saved.row(i).array().exp()).matrix();
        }
    });
}

Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
    if (gain.rows() != 1 || gain.cols() != a.cols() || bias.rows() != 1 || bias.cols() != a.cols())
        throw std::invalid_argument("layer_norm_rows: gain/bias must be 1 x cols(a)");
    Eigen::Index n = a.rows(), d = a.cols();
    Mat xhat(n, d);
    Eigen::ArrayXd inv_std(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double mu = a.value().row(i).mean();
        Eigen::ArrayXd centered = a.value().row(i).array() - mu;
        double var = centered.square().mean();
        inv_std(i) = 1.0 / std::sqrt(var + eps);
        xhat.row(i) = (centered * inv_std(i)).matrix();
    }
    Mat out = xhat;
    for (Eigen::Index i = 0; i < n; ++i)
        out.row(i) = (xhat.row(i).array() * gain.value().row(0).array() + bias.value().row(0).array()).matrix();

    return make_op(std::move(out), {a.node(), gain.node(), bias.node()},
                   [xhat, inv_std](TensorNode& nd) {
                       const Mat& gout = nd.grad;
                       const Mat& gamma = nd.parents[1]->value;
                       if (nd.parents[1]->requires_grad)
                           nd.parents[1]->ensure_grad() += gout.cwiseProduct(xhat).colwise().sum();
                       if (nd.parents[2]->requires_grad)
                           nd.parents[2]->ensure_grad() += gout.colwise().sum();
                       if (nd.parents[0]->requires_grad) {
                           Mat& gx = nd.parents[0]->ensure_grad();
                           for (Eigen::Index i = 0; i < xhat.rows(); ++i) {
                               Eigen::ArrayXd dy =
                                   (gout.row(i).array() * gamma.row(0).array()).transpose();
                               double mean_dy = dy.mean();
                               double mean_dyx = (dy * xhat.row(i).array().transpose()).mean();
                               gx.row(i) += (inv_std(i) *
                                             (dy.transpose() - mean_dy -
                                              xhat.row(i).array() * mean_dyx))
                                                .matrix();
                           }
                       }
                   });
}

Tensor matmul_const_left(const Mat& a, const Tensor& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul_const_left: inner dimensions differ");
    Mat saved = a;
    return make_op(a * b.value(), {b.node()}, [saved](TensorNode& n) {
        n.parents[0]->ensure_grad() += saved.transpose() * n.grad;
    });
}

Tensor matmul_const_right(const Tensor& a, const Mat& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul_const_right: inner dimensions differ");
    Mat saved = b;
    return make_op(a.value() * b, {a.node()}, [saved](TensorNode& n) {
        n.parents[0]->ensure_grad() += n.grad * saved.transpose();
    });
}

Tensor normalize_rows(const Tensor& a) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        if (a.value().row(i).norm() == 0.0)
            throw std::invalid_argument("normalize_rows: zero-norm row " + std::to_string(i));
    }
    Tensor sq = mul(a, a);
    Tensor norms = sqrt_t(matmul_const_right(sq, Mat::Ones(a.cols(), 1)));  // n x 1
    return mul_colvec(a, reciprocal(norms));
}

}  // namespace dcvd::nn
