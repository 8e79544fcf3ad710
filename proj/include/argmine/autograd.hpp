#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "argmine/tokenizer.hpp"

namespace argmine::nn {

using Matrix = Eigen::MatrixXd;

// A named tensor. Values are held in double precision for compute but are
// kept fp32-representable (see round_to_fp32) so checkpoints stored as
// float32 round-trip bit-exactly.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;
    bool trainable = true;

    Parameter() = default;
    Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) {
        grad = Matrix::Zero(value.rows(), value.cols());
    }

    std::size_t size() const { return static_cast<std::size_t>(value.size()); }
    void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

void round_to_fp32(Matrix& m);

// Fills with N(0, stddev) draws rounded to fp32.
Matrix random_normal(std::size_t rows, std::size_t cols, double stddev, std::uint64_t seed);

// Reverse-mode tape. Nodes are created by the op methods; backward() walks
// them in reverse and accumulates into Parameter::grad for trainable leaves.
// Gradients are only propagated along paths that reach a trainable leaf.
class Tape {
public:
    struct Var {
        int id = -1;
    };

    Var constant(Matrix value);
    // The parameter must outlive the tape and stay unmodified until backward().
    Var parameter(Parameter& p);

    const Matrix& value(Var v) const {
        const Node& n = nodes_[static_cast<std::size_t>(v.id)];
        return n.ref != nullptr ? *n.ref : n.value;
    }
    bool requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }

    Var matmul(Var a, Var b);        // a * b
    Var matmul_nt(Var a, Var b);     // a * b^T
    Var linear(Var x, Var w, Var b); // x * w + b, b a row vector broadcast over rows
    Var add(Var a, Var b);
    Var scale(Var x, double s);
    Var gelu(Var x);
    Var layer_norm(Var x, Var gamma, Var beta, double eps);
    Var embedding(Var table, const std::vector<TokenId>& ids);
    Var rows(Var x, const std::vector<std::size_t>& indices);
    Var leading_rows(Var x, std::size_t n);
    // Multi-head scaled dot-product self-attention without projections.
    Var attention(Var q, Var k, Var v, std::size_t heads);
    // out(0, c) = sum of x(r, col) over picks[c]
    Var gather_sum(Var x, const std::vector<std::vector<std::pair<std::size_t, std::size_t>>>& picks);
    // Mean token cross-entropy, one target column per row; 1x1 result.
    Var cross_entropy(Var logits, const std::vector<std::size_t>& targets);

    void backward(Var loss);
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        const Matrix* ref = nullptr;  // parameter leaves alias the parameter value
        Matrix grad;
        bool requires_grad = false;
        Parameter* param = nullptr;
        std::function<void(Tape&, const Node&)> backprop;
    };

    Var push(Matrix value, bool requires_grad, std::function<void(Tape&, const Node&)> backprop);
    void accumulate(Var v, const Matrix& g);
    Matrix& grad_of(Var v);

    std::vector<Node> nodes_;
};

double gelu(double x);
double gelu_derivative(double x);

}  // namespace argmine::nn
