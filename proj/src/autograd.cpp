#include "argmine/autograd.hpp"

#include <cmath>

#include "argmine/errors.hpp"
#include "argmine/rng.hpp"

namespace argmine::nn {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void require(bool ok, const char* what) {
    if (!ok) throw ShapeError(what);
}

}  // namespace

void round_to_fp32(Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
    }
}

Matrix random_normal(std::size_t rows, std::size_t cols, double stddev, std::uint64_t seed) {
    argmine::Rng rng(seed);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    // column-major fill order is part of the reproducibility contract
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, stddev);
    round_to_fp32(m);
    return m;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_derivative(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
    return cdf + x * pdf;
}

Tape::Var Tape::push(Matrix value, bool requires_grad,
                     std::function<void(Tape&, const Node&)> backprop) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size() - 1)};
}

Matrix& Tape::grad_of(Var v) {
    Node& n = nodes_[static_cast<std::size_t>(v.id)];
    if (n.grad.size() == 0) {
        const Matrix& val = n.ref != nullptr ? *n.ref : n.value;
        n.grad = Matrix::Zero(val.rows(), val.cols());
    }
    return n.grad;
}

void Tape::accumulate(Var v, const Matrix& g) {
    if (!requires_grad(v)) return;
    grad_of(v) += g;
}

Tape::Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Tape::Var Tape::parameter(Parameter& p) {
    auto v = push(Matrix{}, p.trainable, [](Tape&, const Node&) {});
    nodes_.back().ref = &p.value;
    nodes_.back().param = p.trainable ? &p : nullptr;
    return v;
}

Tape::Var Tape::matmul(Var a, Var b) {
    require(value(a).cols() == value(b).rows(), "matmul: inner dimensions differ");
    const bool rg = requires_grad(a) || requires_grad(b);
    return push(value(a) * value(b), rg, [a, b](Tape& t, const Node& n) {
        if (t.requires_grad(a)) t.accumulate(a, n.grad * t.value(b).transpose());
        if (t.requires_grad(b)) t.accumulate(b, t.value(a).transpose() * n.grad);
    });
}

Tape::Var Tape::matmul_nt(Var a, Var b) {
    require(value(a).cols() == value(b).cols(), "matmul_nt: inner dimensions differ");
    const bool rg = requires_grad(a) || requires_grad(b);
    return push(value(a) * value(b).transpose(), rg, [a, b](Tape& t, const Node& n) {
        if (t.requires_grad(a)) t.accumulate(a, n.grad * t.value(b));
        if (t.requires_grad(b)) t.accumulate(b, n.grad.transpose() * t.value(a));
    });
}

Tape::Var Tape::linear(Var x, Var w, Var b) {
    require(value(x).cols() == value(w).rows(), "linear: input width does not match weight rows");
    require(value(b).rows() == 1 && value(b).cols() == value(w).cols(), "linear: bias shape");
    Matrix out = value(x) * value(w);
    out.rowwise() += value(b).row(0);
    const bool rg = requires_grad(x) || requires_grad(w) || requires_grad(b);
    return push(std::move(out), rg, [x, w, b](Tape& t, const Node& n) {
        if (t.requires_grad(x)) t.accumulate(x, n.grad * t.value(w).transpose());
        if (t.requires_grad(w)) t.accumulate(w, t.value(x).transpose() * n.grad);
        if (t.requires_grad(b)) t.accumulate(b, n.grad.colwise().sum());
    });
}

Tape::Var Tape::add(Var a, Var b) {
    require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(),
            "add: shapes differ");
    const bool rg = requires_grad(a) || requires_grad(b);
    return push(value(a) + value(b), rg, [a, b](Tape& t, const Node& n) {
        t.accumulate(a, n.grad);
        t.accumulate(b, n.grad);
    });
}

Tape::Var Tape::scale(Var x, double s) {
    return push(value(x) * s, requires_grad(x),
                [x, s](Tape& t, const Node& n) { t.accumulate(x, n.grad * s); });
}

Tape::Var Tape::gelu(Var x) {
    Matrix out = value(x).unaryExpr([](double v) { return nn::gelu(v); });
    return push(std::move(out), requires_grad(x), [x](Tape& t, const Node& n) {
        Matrix d = t.value(x).unaryExpr([](double v) { return gelu_derivative(v); });
        t.accumulate(x, n.grad.cwiseProduct(d));
    });
}

Tape::Var Tape::layer_norm(Var x, Var gamma, Var beta, double eps) {
    const Matrix& xv = value(x);
    const auto width = xv.cols();
    require(value(gamma).rows() == 1 && value(gamma).cols() == width, "layer_norm: gamma shape");
    require(value(beta).rows() == 1 && value(beta).cols() == width, "layer_norm: beta shape");
    Matrix normalized(xv.rows(), width);
    Eigen::VectorXd inv_std(xv.rows());
    for (Eigen::Index r = 0; r < xv.rows(); ++r) {
        const double mean = xv.row(r).mean();
        const double var = (xv.row(r).array() - mean).square().mean();
        inv_std(r) = 1.0 / std::sqrt(var + eps);
        normalized.row(r) = (xv.row(r).array() - mean) * inv_std(r);
    }
    Matrix out = normalized;
    out.array().rowwise() *= value(gamma).row(0).array();
    out.rowwise() += value(beta).row(0);
    const bool rg = requires_grad(x) || requires_grad(gamma) || requires_grad(beta);
    return push(std::move(out), rg,
                [x, gamma, beta, normalized, inv_std](Tape& t, const Node& n) {
                    if (t.requires_grad(gamma)) {
                        t.accumulate(gamma, n.grad.cwiseProduct(normalized).colwise().sum());
                    }
                    if (t.requires_grad(beta)) t.accumulate(beta, n.grad.colwise().sum());
                    if (!t.requires_grad(x)) return;
                    Matrix dnorm = n.grad;
                    dnorm.array().rowwise() *= t.value(gamma).row(0).array();
                    Matrix dx(dnorm.rows(), dnorm.cols());
                    for (Eigen::Index r = 0; r < dnorm.rows(); ++r) {
                        const double mean_d = dnorm.row(r).mean();
                        const double mean_dn = dnorm.row(r).cwiseProduct(normalized.row(r)).mean();
                        dx.row(r) = inv_std(r) * (dnorm.row(r).array() - mean_d -
                                                  normalized.row(r).array() * mean_dn);
                    }
                    t.accumulate(x, dx);
                });
}

Tape::Var Tape::embedding(Var table, const std::vector<TokenId>& ids) {
    const Matrix& tv = value(table);
    Matrix out(static_cast<Eigen::Index>(ids.size()), tv.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        require(ids[i] >= 0 && ids[i] < tv.rows(), "embedding: token id out of range");
        out.row(static_cast<Eigen::Index>(i)) = tv.row(ids[i]);
    }
    return push(std::move(out), requires_grad(table), [table, ids](Tape& t, const Node& n) {
        Matrix& g = t.grad_of(table);
        for (std::size_t i = 0; i < ids.size(); ++i) g.row(ids[i]) += n.grad.row(static_cast<Eigen::Index>(i));
    });
}

Tape::Var Tape::rows(Var x, const std::vector<std::size_t>& indices) {
    const Matrix& xv = value(x);
    Matrix out(static_cast<Eigen::Index>(indices.size()), xv.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        require(indices[i] < static_cast<std::size_t>(xv.rows()), "rows: index out of range");
        out.row(static_cast<Eigen::Index>(i)) = xv.row(static_cast<Eigen::Index>(indices[i]));
    }
    return push(std::move(out), requires_grad(x), [x, indices](Tape& t, const Node& n) {
        Matrix& g = t.grad_of(x);
        for (std::size_t i = 0; i < indices.size(); ++i) {
            g.row(static_cast<Eigen::Index>(indices[i])) += n.grad.row(static_cast<Eigen::Index>(i));
        }
    });
}

Tape::Var Tape::leading_rows(Var x, std::size_t n_rows) {
    require(n_rows <= static_cast<std::size_t>(value(x).rows()), "leading_rows: too many rows");
    const auto n = static_cast<Eigen::Index>(n_rows);
    return push(value(x).topRows(n), requires_grad(x), [x, n](Tape& t, const Node& node) {
        t.grad_of(x).topRows(n) += node.grad;
    });
}

Tape::Var Tape::attention(Var q, Var k, Var v, std::size_t heads) {
    const Matrix& qv = value(q);
    const Matrix& kv = value(k);
    const Matrix& vv = value(v);
    require(qv.rows() == kv.rows() && kv.rows() == vv.rows(), "attention: sequence lengths differ");
    require(qv.cols() == kv.cols() && kv.cols() == vv.cols(), "attention: widths differ");
    require(heads > 0 && qv.cols() % static_cast<Eigen::Index>(heads) == 0,
            "attention: width not divisible by head count");
    const Eigen::Index d = qv.cols() / static_cast<Eigen::Index>(heads);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));

    std::vector<Matrix> probs(heads);
    Matrix out(qv.rows(), qv.cols());
    for (std::size_t h = 0; h < heads; ++h) {
        const Eigen::Index c = static_cast<Eigen::Index>(h) * d;
        Matrix s = qv.middleCols(c, d) * kv.middleCols(c, d).transpose() * scale;
        for (Eigen::Index r = 0; r < s.rows(); ++r) {
            const double m = s.row(r).maxCoeff();
            s.row(r) = (s.row(r).array() - m).exp();
            s.row(r) /= s.row(r).sum();
        }
        out.middleCols(c, d) = s * vv.middleCols(c, d);
        probs[h] = std::move(s);
    }
    const bool rg = requires_grad(q) || requires_grad(k) || requires_grad(v);
    return push(std::move(out), rg, [q, k, v, d, scale, probs](Tape& t, const Node& n) {
        const Matrix& qv = t.value(q);
        const Matrix& kv = t.value(k);
        const Matrix& vv = t.value(v);
        Matrix dq = Matrix::Zero(qv.rows(), qv.cols());
        Matrix dk = Matrix::Zero(kv.rows(), kv.cols());
        Matrix dv = Matrix::Zero(vv.rows(), vv.cols());
        for (std::size_t h = 0; h < probs.size(); ++h) {
            const Eigen::Index c = static_cast<Eigen::Index>(h) * d;
            const Matrix& p = probs[h];
            const Matrix dout = n.grad.middleCols(c, d);
            dv.middleCols(c, d) = p.transpose() * dout;
            Matrix dp = dout * vv.middleCols(c, d).transpose();
            const Eigen::VectorXd row_dot = dp.cwiseProduct(p).rowwise().sum();
            Matrix ds = p.cwiseProduct(dp.colwise() - row_dot) * scale;
            dq.middleCols(c, d) = ds * kv.middleCols(c, d);
            dk.middleCols(c, d) = ds.transpose() * qv.middleCols(c, d);
        }
        t.accumulate(q, dq);
        t.accumulate(k, dk);
        t.accumulate(v, dv);
    });
}

Tape::Var Tape::gather_sum(Var x,
                           const std::vector<std::vector<std::pair<std::size_t, std::size_t>>>& picks) {
    const Matrix& xv = value(x);
    Matrix out = Matrix::Zero(1, static_cast<Eigen::Index>(picks.size()));
    for (std::size_t c = 0; c < picks.size(); ++c) {
        for (auto [r, col] : picks[c]) {
            require(r < static_cast<std::size_t>(xv.rows()) && col < static_cast<std::size_t>(xv.cols()),
                    "gather_sum: pick out of range");
            out(0, static_cast<Eigen::Index>(c)) += xv(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col));
        }
    }
    return push(std::move(out), requires_grad(x), [x, picks](Tape& t, const Node& n) {
        Matrix& g = t.grad_of(x);
        for (std::size_t c = 0; c < picks.size(); ++c) {
            for (auto [r, col] : picks[c]) {
                g(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col)) += n.grad(0, static_cast<Eigen::Index>(c));
            }
        }
    });
}

Tape::Var Tape::cross_entropy(Var logits, const std::vector<std::size_t>& targets) {
    const Matrix& z = value(logits);
    require(static_cast<std::size_t>(z.rows()) == targets.size(), "cross_entropy: one target per row");
    require(!targets.empty(), "cross_entropy: no targets");
    Matrix softmax(z.rows(), z.cols());
    double loss = 0.0;
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        require(targets[static_cast<std::size_t>(r)] < static_cast<std::size_t>(z.cols()),
                "cross_entropy: target out of range");
        const double m = z.row(r).maxCoeff();
        softmax.row(r) = (z.row(r).array() - m).exp();
        const double sum = softmax.row(r).sum();
        softmax.row(r) /= sum;
        loss += m + std::log(sum) - z(r, static_cast<Eigen::Index>(targets[static_cast<std::size_t>(r)]));
    }
    const double count = static_cast<double>(targets.size());
    Matrix out(1, 1);
    out(0, 0) = loss / count;
    return push(std::move(out), requires_grad(logits),
                [logits, targets, softmax, count](Tape& t, const Node& n) {
                    Matrix g = softmax;
                    for (std::size_t r = 0; r < targets.size(); ++r) {
                        g(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(targets[r])) -= 1.0;
                    }
                    t.accumulate(logits, g * (n.grad(0, 0) / count));
                });
}

void Tape::backward(Var loss) {
    require(value(loss).size() == 1, "backward: loss must be a scalar");
    if (!requires_grad(loss)) return;
    grad_of(loss).setOnes();
    for (int i = loss.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (!n.requires_grad || n.grad.size() == 0) continue;
        if (n.param != nullptr) {
            n.param->grad += n.grad;
        } else if (n.backprop) {
            n.backprop(*this, n);
        }
    }
}

}  // namespace argmine::nn
