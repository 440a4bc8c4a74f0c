#ifndef RISKGRID_AUTODIFF_HPP
#define RISKGRID_AUTODIFF_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "riskgrid/errors.hpp"
#include "riskgrid/tensor.hpp"

namespace riskgrid {

// Trainable parameter: value plus accumulated gradient of the same shape.
struct Param {
    std::string id;
    Tensor value;
    Tensor grad;

    Param() = default;
    Param(std::string name, Tensor v)
        : id(std::move(name)), value(std::move(v)), grad(Tensor::zeros_like(value)) {}

    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

// Numerically stable softmax of one row (max subtraction).
inline std::vector<double> softmax(const std::vector<double>& logits) {
    if (logits.empty()) throw shape_error("softmax: empty input");
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

inline double log_sum_exp(const double* v, std::size_t n) {
    double mx = v[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, v[i]);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - mx);
    return mx + std::log(s);
}

// log(1 + e^z) without overflow.
inline double softplus(double z) {
    return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z)));
}

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

// Reverse-mode tape over dense matrices. Records primitive operations in
// order; backward() walks them in exact reverse order and accumulates
// gradients into every reachable Param. Single-threaded by contract;
// independent tapes may run concurrently.
class Tape {
public:
    struct Ref {
        std::size_t idx = static_cast<std::size_t>(-1);
    };

    Ref input(Tensor v) { return push(Op::kInput, {}, std::move(v)); }

    Ref param(Param& p) {
        Ref r = push(Op::kParam, {}, p.value);
        nodes_[r.idx].param = &p;
        return r;
    }

    // [m x k] . [k x n] -> [m x n]
    Ref matmul(Ref a, Ref b) {
        const Tensor& A = value(a);
        const Tensor& B = value(b);
        if (A.cols() != B.rows())
            throw shape_error("matmul: inner dimensions disagree, " + A.shape_str() + " vs " +
                              B.shape_str());
        Tensor Y = Tensor::zeros(A.rows(), B.cols());
        mm_nn(A, B, Y);
        return push(Op::kMatmul, {a, b}, std::move(Y));
    }

    // [m x k] . [n x k]^T -> [m x n]
    Ref matmul_nt(Ref a, Ref b) {
        const Tensor& A = value(a);
        const Tensor& B = value(b);
        if (A.cols() != B.cols())
            throw shape_error("matmul_nt: inner dimensions disagree, " + A.shape_str() + " vs " +
                              B.shape_str());
        Tensor Y = Tensor::zeros(A.rows(), B.rows());
        for (std::size_t i = 0; i < A.rows(); ++i)
            for (std::size_t j = 0; j < B.rows(); ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < A.cols(); ++k) s += A.at(i, k) * B.at(j, k);
                Y.at(i, j) = s;
            }
        return push(Op::kMatmulNT, {a, b}, std::move(Y));
    }

    Ref add(Ref a, Ref b) { return ew2(Op::kAdd, a, b); }
    Ref sub(Ref a, Ref b) { return ew2(Op::kSub, a, b); }
    Ref mul(Ref a, Ref b) { return ew2(Op::kMul, a, b); }

    Ref square(Ref a) {
        Tensor Y = value(a);
        for (double& v : Y.data) v *= v;
        return push(Op::kSquare, {a}, std::move(Y));
    }

    Ref scale(Ref a, double c) {
        Tensor Y = value(a);
        for (double& v : Y.data) v *= c;
        Ref r = push(Op::kScale, {a}, std::move(Y));
        nodes_[r.idx].c = c;
        return r;
    }

    // Rows of x plus bias row b: [B x N] + [1 x N].
    Ref add_bias(Ref x, Ref b) {
        const Tensor& X = value(x);
        const Tensor& Bt = value(b);
        if (Bt.rows() != 1 || Bt.cols() != X.cols())
            throw shape_error("add_bias: bias " + Bt.shape_str() + " does not fit " +
                              X.shape_str());
        Tensor Y = X;
        for (std::size_t i = 0; i < Y.rows(); ++i)
            for (std::size_t j = 0; j < Y.cols(); ++j) Y.at(i, j) += Bt.at(0, j);
        return push(Op::kAddBias, {x, b}, std::move(Y));
    }

    // max(0, x); subgradient at 0 is 0.
    Ref relu(Ref x) {
        Tensor Y = value(x);
        for (double& v : Y.data) v = v > 0.0 ? v : 0.0;
        return push(Op::kRelu, {x}, std::move(Y));
    }

    Ref sigmoid_op(Ref x) {
        Tensor Y = value(x);
        for (double& v : Y.data) v = riskgrid::sigmoid(v);
        return push(Op::kSigmoid, {x}, std::move(Y));
    }

    // Row-wise stable softmax.
    Ref softmax_rows(Ref x) {
        const Tensor& X = value(x);
        Tensor Y = X;
        for (std::size_t i = 0; i < X.rows(); ++i) {
            double mx = X.at(i, 0);
            for (std::size_t j = 1; j < X.cols(); ++j) mx = std::max(mx, X.at(i, j));
            double sum = 0.0;
            for (std::size_t j = 0; j < X.cols(); ++j) {
                Y.at(i, j) = std::exp(X.at(i, j) - mx);
                sum += Y.at(i, j);
            }
            for (std::size_t j = 0; j < X.cols(); ++j) Y.at(i, j) /= sum;
        }
        return push(Op::kSoftmaxRows, {x}, std::move(Y));
    }

    Ref concat_cols(const std::vector<Ref>& parts) {
        if (parts.empty()) throw shape_error("concat_cols: no inputs");
        std::size_t rows = value(parts[0]).rows();
        std::size_t cols = 0;
        for (Ref p : parts) {
            if (value(p).rows() != rows)
                throw shape_error("concat_cols: row counts differ");
            cols += value(p).cols();
        }
        Tensor Y = Tensor::zeros(rows, cols);
        std::size_t off = 0;
        for (Ref p : parts) {
            const Tensor& P = value(p);
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < P.cols(); ++j) Y.at(i, off + j) = P.at(i, j);
            off += P.cols();
        }
        return push(Op::kConcatCols, parts, std::move(Y));
    }

    Ref slice_cols(Ref x, std::size_t from, std::size_t len) {
        const Tensor& X = value(x);
        if (from + len > X.cols()) throw shape_error("slice_cols: window out of range");
        Tensor Y = Tensor::zeros(X.rows(), len);
        for (std::size_t i = 0; i < X.rows(); ++i)
            for (std::size_t j = 0; j < len; ++j) Y.at(i, j) = X.at(i, from + j);
        Ref r = push(Op::kSliceCols, {x}, std::move(Y));
        nodes_[r.idx].a0 = from;
        return r;
    }

    // [B x N] -> [B x 1], sum of each row.
    Ref row_sum(Ref x) {
        const Tensor& X = value(x);
        Tensor Y = Tensor::zeros(X.rows(), 1);
        for (std::size_t i = 0; i < X.rows(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < X.cols(); ++j) s += X.at(i, j);
            Y.at(i, 0) = s;
        }
        return push(Op::kRowSum, {x}, std::move(Y));
    }

    Ref sum_all(Ref x) {
        const Tensor& X = value(x);
        double s = 0.0;
        for (double v : X.data) s += v;
        return push(Op::kSumAll, {x}, Tensor::scalar(s));
    }

    // col [B x 1] broadcast-multiplied across m [B x N].
    Ref colwise_mul(Ref col, Ref m) {
        const Tensor& C = value(col);
        const Tensor& M = value(m);
        if (C.cols() != 1 || C.rows() != M.rows())
            throw shape_error("colwise_mul: column " + C.shape_str() + " does not fit " +
                              M.shape_str());
        Tensor Y = M;
        for (std::size_t i = 0; i < M.rows(); ++i)
            for (std::size_t j = 0; j < M.cols(); ++j) Y.at(i, j) *= C.at(i, 0);
        return push(Op::kColwiseMul, {col, m}, std::move(Y));
    }

    // Gather entries (i,j) of a square matrix into a [1 x P] row.
    Ref gather_pairs(Ref m, std::vector<std::pair<std::size_t, std::size_t>> pairs) {
        const Tensor& M = value(m);
        Tensor Y = Tensor::zeros(1, pairs.size());
        for (std::size_t t = 0; t < pairs.size(); ++t) {
            if (pairs[t].first >= M.rows() || pairs[t].second >= M.cols())
                throw shape_error("gather_pairs: index out of range");
            Y.at(0, t) = M.at(pairs[t].first, pairs[t].second);
        }
        Ref r = push(Op::kGatherPairs, {m}, std::move(Y));
        nodes_[r.idx].pairs = std::move(pairs);
        return r;
    }

    // row [1 x P] broadcast over the rows of a constant [B x P].
    Ref row_times_const(Ref row, Tensor c) {
        const Tensor& R = value(row);
        if (R.rows() != 1 || R.cols() != c.cols())
            throw shape_error("row_times_const: row " + R.shape_str() + " does not fit " +
                              c.shape_str());
        Tensor Y = c;
        for (std::size_t i = 0; i < Y.rows(); ++i)
            for (std::size_t j = 0; j < Y.cols(); ++j) Y.at(i, j) *= R.at(0, j);
        Ref r = push(Op::kRowTimesConst, {row}, std::move(Y));
        nodes_[r.idx].aux = std::move(c);
        return r;
    }

    // Mean over rows of -log softmax(logits)[label]; log-sum-exp form.
    Ref softmax_xent_mean(Ref logits, std::vector<int> labels) {
        const Tensor& L = value(logits);
        if (labels.size() != L.rows())
            throw shape_error("softmax_xent_mean: got " + std::to_string(labels.size()) +
                              " labels for " + std::to_string(L.rows()) + " rows");
        Tensor probs = Tensor::zeros(L.rows(), L.cols());
        double total = 0.0;
        for (std::size_t i = 0; i < L.rows(); ++i) {
            int lab = labels[i];
            if (lab < 0 || static_cast<std::size_t>(lab) >= L.cols())
                throw data_error("softmax_xent_mean: label " + std::to_string(lab) +
                                 " out of range at row " + std::to_string(i));
            double lse = log_sum_exp(&L.data[i * L.cols()], L.cols());
            total += lse - L.at(i, static_cast<std::size_t>(lab));
            for (std::size_t j = 0; j < L.cols(); ++j)
                probs.at(i, j) = std::exp(L.at(i, j) - lse);
        }
        Ref r = push(Op::kSoftmaxXent, {logits}, Tensor::scalar(total / double(L.rows())));
        nodes_[r.idx].aux = std::move(probs);
        nodes_[r.idx].labels = std::move(labels);
        return r;
    }

    // Mean over rows of softplus(z) - y*z, the logit form of binary
    // cross entropy.
    Ref bce_logits_mean(Ref logits, std::vector<double> ys) {
        const Tensor& Z = value(logits);
        if (Z.cols() != 1 || ys.size() != Z.rows())
            throw shape_error("bce_logits_mean: logits must be [B x 1] matching labels");
        Tensor sig = Tensor::zeros(Z.rows(), 1);
        double total = 0.0;
        for (std::size_t i = 0; i < Z.rows(); ++i) {
            double z = Z.at(i, 0);
            total += softplus(z) - ys[i] * z;
            sig.at(i, 0) = riskgrid::sigmoid(z);
        }
        Ref r = push(Op::kBceLogits, {logits}, Tensor::scalar(total / double(Z.rows())));
        nodes_[r.idx].aux = std::move(sig);
        nodes_[r.idx].ys = std::move(ys);
        return r;
    }

    const Tensor& value(Ref r) const { return nodes_[r.idx].value; }
    std::size_t size() const { return nodes_.size(); }

    // Smallest |x| over every value feeding a relu on this tape. Finite
    // difference probes straddle the kink when this drops near the step
    // size, so gradient checks use it to reject ill-posed configurations.
    double min_relu_input_magnitude() const {
        double m = std::numeric_limits<double>::infinity();
        for (const Node& n : nodes_) {
            if (n.kind != Op::kRelu) continue;
            for (double v : nodes_[n.in[0].idx].value.data) m = std::min(m, std::fabs(v));
        }
        return m;
    }

    // Gradient of the last backward() call with respect to a node.
    const Tensor& grad(Ref r) const { return grads_[r.idx]; }

    // Seeds d(loss)/d(loss) = 1 and accumulates dLoss/dParam into every
    // reachable Param.grad, traversing in exact reverse recording order.
    void backward(Ref loss) {
        const Tensor& L = value(loss);
        if (!L.is_scalar())
            throw shape_error("backward: loss must be scalar, got " + L.shape_str());
        grads_.assign(nodes_.size(), Tensor());
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            grads_[i] = Tensor::zeros(nodes_[i].value.rows(), nodes_[i].value.cols());
        grads_[loss.idx].data[0] = 1.0;

        for (std::size_t step = loss.idx + 1; step-- > 0;) {
            const Node& n = nodes_[step];
            const Tensor& g = grads_[step];
            switch (n.kind) {
            case Op::kInput:
                break;
            case Op::kParam:
                for (std::size_t t = 0; t < g.data.size(); ++t) n.param->grad.data[t] += g.data[t];
                break;
            case Op::kMatmul: {
                const Tensor& A = nodes_[n.in[0].idx].value;
                const Tensor& B = nodes_[n.in[1].idx].value;
                Tensor& dA = grads_[n.in[0].idx];
                Tensor& dB = grads_[n.in[1].idx];
                // dA += g . B^T ; dB += A^T . g
                for (std::size_t i = 0; i < A.rows(); ++i)
                    for (std::size_t k = 0; k < A.cols(); ++k) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < B.cols(); ++j)
                            s += g.at(i, j) * B.at(k, j);
                        dA.at(i, k) += s;
                    }
                for (std::size_t k = 0; k < B.rows(); ++k)
                    for (std::size_t j = 0; j < B.cols(); ++j) {
                        double s = 0.0;
                        for (std::size_t i = 0; i < A.rows(); ++i)
                            s += A.at(i, k) * g.at(i, j);
                        dB.at(k, j) += s;
                    }
                break;
            }
            case Op::kMatmulNT: {
                const Tensor& A = nodes_[n.in[0].idx].value;
                const Tensor& B = nodes_[n.in[1].idx].value;
                Tensor& dA = grads_[n.in[0].idx];
                Tensor& dB = grads_[n.in[1].idx];
                // Y = A . B^T : dA += g . B ; dB += g^T . A
                for (std::size_t i = 0; i < A.rows(); ++i)
                    for (std::size_t k = 0; k < A.cols(); ++k) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < B.rows(); ++j)
                            s += g.at(i, j) * B.at(j, k);
                        dA.at(i, k) += s;
                    }
                for (std::size_t j = 0; j < B.rows(); ++j)
                    for (std::size_t k = 0; k < B.cols(); ++k) {
                        double s = 0.0;
                        for (std::size_t i = 0; i < A.rows(); ++i)
                            s += g.at(i, j) * A.at(i, k);
                        dB.at(j, k) += s;
                    }
                break;
            }
            case Op::kAdd:
                axpy(grads_[n.in[0].idx], g, 1.0);
                axpy(grads_[n.in[1].idx], g, 1.0);
                break;
            case Op::kSub:
                axpy(grads_[n.in[0].idx], g, 1.0);
                axpy(grads_[n.in[1].idx], g, -1.0);
                break;
            case Op::kMul: {
                const Tensor& A = nodes_[n.in[0].idx].value;
                const Tensor& B = nodes_[n.in[1].idx].value;
                Tensor& dA = grads_[n.in[0].idx];
                Tensor& dB = grads_[n.in[1].idx];
                for (std::size_t t = 0; t < g.data.size(); ++t) {
                    dA.data[t] += g.data[t] * B.data[t];
                    dB.data[t] += g.data[t] * A.data[t];
                }
                break;
            }
            case Op::kSquare: {
                const Tensor& X = nodes_[n.in[0].idx].value;
                Tensor& dX = grads_[n.in[0].idx];
                for (std::size_t t = 0; t < g.data.size(); ++t)
                    dX.data[t] += 2.0 * X.data[t] * g.data[t];
                break;
            }
            case Op::kScale:
                axpy(grads_[n.in[0].idx], g, n.c);
                break;
            case Op::kAddBias: {
                Tensor& dX = grads_[n.in[0].idx];
                Tensor& dB = grads_[n.in[1].idx];
                axpy(dX, g, 1.0);
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j) dB.at(0, j) += g.at(i, j);
                break;
            }
            case Op::kRelu: {
                const Tensor& X = nodes_[n.in[0].idx].value;
                Tensor& dX = grads_[n.in[0].idx];
                for (std::size_t t = 0; t < g.data.size(); ++t)
                    if (X.data[t] > 0.0) dX.data[t] += g.data[t];
                break;
            }
            case Op::kSigmoid: {
                const Tensor& S = n.value;
                Tensor& dX = grads_[n.in[0].idx];
                for (std::size_t t = 0; t < g.data.size(); ++t)
                    dX.data[t] += g.data[t] * S.data[t] * (1.0 - S.data[t]);
                break;
            }
            case Op::kSoftmaxRows: {
                const Tensor& S = n.value;
                Tensor& dX = grads_[n.in[0].idx];
                for (std::size_t i = 0; i < S.rows(); ++i) {
                    double dot = 0.0;
                    for (std::size_t j = 0; j < S.cols(); ++j) dot += g.at(i, j) * S.at(i, j);
                    for (std::size_t j = 0; j < S.cols(); ++j)
                        dX.at(i, j) += S.at(i, j) * (g.at(i, j) - dot);
                }
                break;
            }
            case Op::kConcatCols: {
                std::size_t off = 0;
                for (Ref p : n.in) {
                    Tensor& dP = grads_[p.idx];
                    for (std::size_t i = 0; i < dP.rows(); ++i)
                        for (std::size_t j = 0; j < dP.cols(); ++j)
                            dP.at(i, j) += g.at(i, off + j);
                    off += dP.cols();
                }
                break;
            }
            case Op::kSliceCols: {
                Tensor& dX = grads_[n.in[0].idx];
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j)
                        dX.at(i, n.a0 + j) += g.at(i, j);
                break;
            }
            case Op::kRowSum: {
                Tensor& dX = grads_[n.in[0].idx];
                for (std::size_t i = 0; i < dX.rows(); ++i)
                    for (std::size_t j = 0; j < dX.cols(); ++j) dX.at(i, j) += g.at(i, 0);
                break;
            }
            case Op::kSumAll: {
                Tensor& dX = grads_[n.in[0].idx];
                for (double& v : dX.data) v += g.data[0];
                break;
            }
            case Op::kColwiseMul: {
                const Tensor& C = nodes_[n.in[0].idx].value;
                const Tensor& M = nodes_[n.in[1].idx].value;
                Tensor& dC = grads_[n.in[0].idx];
                Tensor& dM = grads_[n.in[1].idx];
                for (std::size_t i = 0; i < M.rows(); ++i) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < M.cols(); ++j) {
                        s += g.at(i, j) * M.at(i, j);
                        dM.at(i, j) += g.at(i, j) * C.at(i, 0);
                    }
                    dC.at(i, 0) += s;
                }
                break;
            }
            case Op::kGatherPairs: {
                Tensor& dM = grads_[n.in[0].idx];
                for (std::size_t t = 0; t < n.pairs.size(); ++t)
                    dM.at(n.pairs[t].first, n.pairs[t].second) += g.at(0, t);
                break;
            }
            case Op::kRowTimesConst: {
                Tensor& dR = grads_[n.in[0].idx];
                const Tensor& C = n.aux;
                for (std::size_t j = 0; j < C.cols(); ++j) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < C.rows(); ++i) s += g.at(i, j) * C.at(i, j);
                    dR.at(0, j) += s;
                }
                break;
            }
            case Op::kSoftmaxXent: {
                const Tensor& P = n.aux;
                Tensor& dL = grads_[n.in[0].idx];
                double up = g.data[0] / double(P.rows());
                for (std::size_t i = 0; i < P.rows(); ++i)
                    for (std::size_t j = 0; j < P.cols(); ++j) {
                        double onehot =
                            (static_cast<std::size_t>(n.labels[i]) == j) ? 1.0 : 0.0;
                        dL.at(i, j) += up * (P.at(i, j) - onehot);
                    }
                break;
            }
            case Op::kBceLogits: {
                const Tensor& S = n.aux;
                Tensor& dZ = grads_[n.in[0].idx];
                double up = g.data[0] / double(S.rows());
                for (std::size_t i = 0; i < S.rows(); ++i)
                    dZ.at(i, 0) += up * (S.at(i, 0) - n.ys[i]);
                break;
            }
            }
        }
    }

private:
    enum class Op {
        kInput,
        kParam,
        kMatmul,
        kMatmulNT,
        kAdd,
        kSub,
        kMul,
        kSquare,
        kScale,
        kAddBias,
        kRelu,
        kSigmoid,
        kSoftmaxRows,
        kConcatCols,
        kSliceCols,
        kRowSum,
        kSumAll,
        kColwiseMul,
        kGatherPairs,
        kRowTimesConst,
        kSoftmaxXent,
        kBceLogits,
    };

    struct Node {
        Op kind;
        std::vector<Ref> in;
        Tensor value;
        Param* param = nullptr;
        double c = 0.0;
        std::size_t a0 = 0;
        Tensor aux;
        std::vector<int> labels;
        std::vector<double> ys;
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
    };

    Ref push(Op kind, std::vector<Ref> in, Tensor v) {
        nodes_.push_back(Node{kind, std::move(in), std::move(v), nullptr, 0.0, 0, {}, {}, {}, {}});
        return Ref{nodes_.size() - 1};
    }

    Ref ew2(Op kind, Ref a, Ref b) {
        const Tensor& A = value(a);
        const Tensor& B = value(b);
        if (!same_shape(A, B))
            throw shape_error("elementwise op: shapes differ, " + A.shape_str() + " vs " +
                              B.shape_str());
        Tensor Y = A;
        switch (kind) {
        case Op::kAdd:
            for (std::size_t t = 0; t < Y.data.size(); ++t) Y.data[t] += B.data[t];
            break;
        case Op::kSub:
            for (std::size_t t = 0; t < Y.data.size(); ++t) Y.data[t] -= B.data[t];
            break;
        case Op::kMul:
            for (std::size_t t = 0; t < Y.data.size(); ++t) Y.data[t] *= B.data[t];
            break;
        default:
            break;
        }
        return push(kind, {a, b}, std::move(Y));
    }

    static void mm_nn(const Tensor& A, const Tensor& B, Tensor& Y) {
        for (std::size_t i = 0; i < A.rows(); ++i)
            for (std::size_t k = 0; k < A.cols(); ++k) {
                double a = A.at(i, k);
                if (a == 0.0) continue;
                for (std::size_t j = 0; j < B.cols(); ++j) Y.at(i, j) += a * B.at(k, j);
            }
    }

    static void axpy(Tensor& dst, const Tensor& src, double c) {
        for (std::size_t t = 0; t < dst.data.size(); ++t) dst.data[t] += c * src.data[t];
    }

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
};

} // namespace riskgrid

#endif
