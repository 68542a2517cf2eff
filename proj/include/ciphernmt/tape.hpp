#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "ciphernmt/errors.hpp"
#include "ciphernmt/util/rng.hpp"

namespace ciphernmt {

template <class T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using RowX = Eigen::Matrix<T, 1, Eigen::Dynamic>;

// Reverse-mode tape over dense matrices. Nodes are created in topological
// order; backward() replays closures in reverse. Parameters participate by
// reference and their gradients accumulate straight into external buffers,
// so several tapes (one per sentence) can contribute to one batch gradient.
//
// A single forward implementation serves training, inference (recording off)
// and finite-difference checking; keep it free of anything nondeterministic
// except the dropout draws, which come from the caller's Rng.
template <class T>
class Tape {
 public:
  using Mat = MatX<T>;

  bool recording = true;

  int constant(Mat v) { return push(std::move(v), false); }

  int param(const Mat* value, Mat* grad_sink) {
    Node n;
    n.value_ref = value;
    n.grad_sink = grad_sink;
    n.requires_grad = recording;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  const Mat& val(int id) const {
    const Node& n = nodes_[id];
    return n.value_ref ? *n.value_ref : n.value;
  }

  T scalar(int id) const { return val(id)(0, 0); }

  int add(int a, int b) {
    int id = push(val(a) + val(b), needs(a) || needs(b));
    if (grads(id)) {
      nodes_[id].back = [this, id, a, b] {
        if (needs(a)) grad(a) += grad(id);
        if (needs(b)) grad(b) += grad(id);
      };
    }
    return id;
  }

  int scale(int a, T c) {
    int id = push(val(a) * c, needs(a));
    if (grads(id)) {
      nodes_[id].back = [this, id, a, c] { grad(a) += c * grad(id); };
    }
    return id;
  }

  int mul(int a, int b) {
    int id = push(val(a).cwiseProduct(val(b)), needs(a) || needs(b));
    if (grads(id)) {
      nodes_[id].back = [this, id, a, b] {
        if (needs(a)) grad(a) += grad(id).cwiseProduct(val(b));
        if (needs(b)) grad(b) += grad(id).cwiseProduct(val(a));
      };
    }
    return id;
  }

  int matmul(int a, int b) {
    int id = push(val(a) * val(b), needs(a) || needs(b));
    if (grads(id)) {
      nodes_[id].back = [this, id, a, b] {
        if (needs(a)) grad(a).noalias() += grad(id) * val(b).transpose();
        if (needs(b)) grad(b).noalias() += val(a).transpose() * grad(id);
      };
    }
    return id;
  }

  // a * b^T
  int matmul_nt(int a, int b) {
    int id = push(val(a) * val(b).transpose(), needs(a) || needs(b));
    if (grads(id)) {
      nodes_[id].back = [this, id, a, b] {
        if (needs(a)) grad(a).noalias() += grad(id) * val(b);
        if (needs(b)) grad(b).noalias() += grad(id).transpose() * val(a);
      };
    }
    return id;
  }

  // rows of a plus a 1 x C bias row
  int add_rowvec(int a, int bias) {
    Mat v = val(a);
    v.rowwise() += RowX<T>(val(bias).row(0));
    int id = push(std::move(v), needs(a) || needs(bias));
    if (grads(id)) {
      nodes_[id].back = [this, id, a, bias] {
        if (needs(a)) grad(a) += grad(id);
        if (needs(bias)) grad(bias) += grad(id).colwise().sum();
      };
    }
    return id;
  }

  int rows_gather(int table, const std::vector<int>& ids) {
    const Mat& E = val(table);
    Mat v(static_cast<Eigen::Index>(ids.size()), E.cols());
    for (size_t t = 0; t < ids.size(); ++t) {
      if (ids[t] < 0 || ids[t] >= E.rows())
        throw DataError("token id out of range: " + std::to_string(ids[t]));
      v.row(static_cast<Eigen::Index>(t)) = E.row(ids[t]);
    }
    int id = push(std::move(v), needs(table));
    if (grads(id)) {
      nodes_[id].back = [this, id, table, ids] {
        Mat& gt = grad(table);
        const Mat& g = grad(id);
        for (size_t t = 0; t < ids.size(); ++t)
          gt.row(ids[t]) += g.row(static_cast<Eigen::Index>(t));
      };
    }
    return id;
  }

  int relu(int a) {
    int id = push(val(a).cwiseMax(T(0)), needs(a));
    if (grads(id)) {
      nodes_[id].back = [this, id, a] {
        grad(a) += grad(id).cwiseProduct(
            (val(a).array() > T(0)).template cast<T>().matrix());
      };
    }
    return id;
  }

  int softmax_rows(int a) {
    Mat v = val(a);
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      auto row = v.row(r).array();
      row -= row.maxCoeff();
      row = row.exp();
      row /= row.sum();
    }
    int id = push(std::move(v), needs(a));
    if (grads(id)) {
      nodes_[id].back = [this, id, a] {
        const Mat& y = val(id);
        const Mat& g = grad(id);
        Mat& ga = grad(a);
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
          const T dot = g.row(r).dot(y.row(r));
          ga.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
        }
      };
    }
    return id;
  }

  int log_softmax_rows(int a) {
    Mat v = val(a);
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      auto row = v.row(r).array();
      const T mx = row.maxCoeff();
      const T lse = mx + std::log((row - mx).exp().sum());
      row -= lse;
    }
    int id = push(std::move(v), needs(a));
    if (grads(id)) {
      nodes_[id].back = [this, id, a] {
        const Mat& lp = val(id);
        const Mat& g = grad(id);
        Mat& ga = grad(a);
        for (Eigen::Index r = 0; r < lp.rows(); ++r) {
          const T gsum = g.row(r).sum();
          ga.row(r).array() += g.row(r).array() - lp.row(r).array().exp() * gsum;
        }
      };
    }
    return id;
  }

  int layer_norm(int x, int gain, int bias, T eps) {
    const Mat& xin = val(x);
    Mat xhat(xin.rows(), xin.cols());
    Mat inv_sigma(xin.rows(), 1);
    const T c = T(1) / static_cast<T>(xin.cols());
    for (Eigen::Index r = 0; r < xin.rows(); ++r) {
      const T mu = xin.row(r).mean();
      const T var = (xin.row(r).array() - mu).square().sum() * c;
      const T is = T(1) / std::sqrt(var + eps);
      xhat.row(r) = (xin.row(r).array() - mu) * is;
      inv_sigma(r, 0) = is;
    }
    Mat v = xhat;
    v.array().rowwise() *= val(gain).row(0).array();
    v.rowwise() += RowX<T>(val(bias).row(0));
    int id = push(std::move(v), needs(x) || needs(gain) || needs(bias));
    if (grads(id)) {
      nodes_[id].back = [this, id, x, gain, bias, xhat = std::move(xhat),
                         inv_sigma = std::move(inv_sigma), c] {
        const Mat& g = grad(id);
        if (needs(bias)) grad(bias) += g.colwise().sum();
        if (needs(gain)) grad(gain) += g.cwiseProduct(xhat).colwise().sum();
        if (needs(x)) {
          Mat& gx = grad(x);
          const auto gr = val(gain).row(0).array();
          for (Eigen::Index r = 0; r < g.rows(); ++r) {
            const auto dxhat = g.row(r).array() * gr;
            const T m1 = dxhat.sum() * c;
            const T m2 = (dxhat * xhat.row(r).array()).sum() * c;
            gx.row(r).array() +=
                inv_sigma(r, 0) * (dxhat - m1 - xhat.row(r).array() * m2);
          }
        }
      };
    }
    return id;
  }

  // inverted dropout; identity when p <= 0
  int dropout(int x, T p, Rng& rng) {
    if (p <= T(0)) return x;
    const Mat& xin = val(x);
    Mat mask(xin.rows(), xin.cols());
    const T keep_scale = T(1) / (T(1) - p);
    for (Eigen::Index r = 0; r < mask.rows(); ++r)
      for (Eigen::Index col = 0; col < mask.cols(); ++col)
        mask(r, col) = rng.uniform() < static_cast<double>(p) ? T(0) : keep_scale;
    int id = push(xin.cwiseProduct(mask), needs(x));
    if (grads(id)) {
      nodes_[id].back = [this, id, x, mask = std::move(mask)] {
        grad(x) += grad(id).cwiseProduct(mask);
      };
    }
    return id;
  }

  int slice_cols(int x, int c0, int n) {
    int id = push(val(x).middleCols(c0, n), needs(x));
    if (grads(id)) {
      nodes_[id].back = [this, id, x, c0, n] {
        grad(x).middleCols(c0, n) += grad(id);
      };
    }
    return id;
  }

  int concat_cols(const std::vector<int>& xs) {
    Eigen::Index cols = 0;
    bool ng = false;
    for (int x : xs) {
      cols += val(x).cols();
      ng = ng || needs(x);
    }
    Mat v(val(xs[0]).rows(), cols);
    Eigen::Index at = 0;
    for (int x : xs) {
      v.middleCols(at, val(x).cols()) = val(x);
      at += val(x).cols();
    }
    int id = push(std::move(v), ng);
    if (grads(id)) {
      nodes_[id].back = [this, id, xs] {
        Eigen::Index at = 0;
        for (int x : xs) {
          const Eigen::Index w = val(x).cols();
          if (needs(x)) grad(x) += grad(id).middleCols(at, w);
          at += w;
        }
      };
    }
    return id;
  }

  int sum_all(int x) {
    Mat v(1, 1);
    v(0, 0) = val(x).sum();
    int id = push(std::move(v), needs(x));
    if (grads(id)) {
      nodes_[id].back = [this, id, x] { grad(x).array() += grad(id)(0, 0); };
    }
    return id;
  }

  // scalar combination sum_i c_i * x_i over 1x1 nodes
  int axpy(const std::vector<std::pair<T, int>>& terms) {
    Mat v(1, 1);
    v(0, 0) = T(0);
    bool ng = false;
    for (const auto& [c, x] : terms) {
      v(0, 0) += c * scalar(x);
      ng = ng || needs(x);
    }
    int id = push(std::move(v), ng);
    if (grads(id)) {
      nodes_[id].back = [this, id, terms] {
        const T g = grad(id)(0, 0);
        for (const auto& [c, x] : terms)
          if (needs(x)) grad(x)(0, 0) += c * g;
      };
    }
    return id;
  }

  // Label-smoothed cross entropy, summed over rows with per-row weights:
  //   sum_t w_t * (lse(z_t) - (1-eps) z_{t,y_t} - eps/V sum_v z_{t,v})
  // d/dz_t = w_t (softmax(z_t) - s_t) with s = (1-eps) onehot + eps/V.
  int nll_rows(int logits, const std::vector<int>& targets, T smoothing,
               const std::vector<T>& row_w) {
    const Mat& z = val(logits);
    if (static_cast<size_t>(z.rows()) != targets.size() || targets.size() != row_w.size())
      throw DataError("nll_rows: row/target/weight count mismatch");
    const Eigen::Index V = z.cols();
    const T eps_term = smoothing / static_cast<T>(V);
    T total = T(0);
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      if (row_w[r] == T(0)) continue;
      if (targets[r] < 0 || targets[r] >= V)
        throw DataError("nll_rows: target id out of range");
      const auto row = z.row(r).array();
      const T mx = row.maxCoeff();
      const T lse = mx + std::log((row - mx).exp().sum());
      total += row_w[r] * (lse - (T(1) - smoothing) * z(r, targets[r]) - eps_term * row.sum());
    }
    Mat v(1, 1);
    v(0, 0) = total;
    int id = push(std::move(v), needs(logits));
    if (grads(id)) {
      nodes_[id].back = [this, id, logits, targets, smoothing, row_w, eps_term] {
        const T g = grad(id)(0, 0);
        const Mat& z = val(logits);
        Mat& gz = grad(logits);
        for (Eigen::Index r = 0; r < z.rows(); ++r) {
          if (row_w[r] == T(0)) continue;
          auto row = z.row(r).array();
          const T mx = row.maxCoeff();
          Eigen::Array<T, 1, Eigen::Dynamic> p = (row - mx).exp();
          p /= p.sum();
          gz.row(r).array() += g * row_w[r] * (p - eps_term);
          gz(r, targets[r]) -= g * row_w[r] * (T(1) - smoothing);
        }
      };
    }
    return id;
  }

  // KL agreement between flattened first arguments, summed over rows with
  // per-row weights. Per row, with pf = softmax(a/tau), qf = softmax(b/tau),
  // p = softmax(a), q = softmax(b):
  //   symmetric:  v = 1/2 [ KL(pf || q) + KL(qf || p) ]
  //     da = w/2 [ pf (lpf - lq - kl1) / tau + (p - qf) ]
  //     db = w/2 [ qf (lqf - lp - kl2) / tau + (q - pf) ]
  //   one-sided:  v = KL(pf || q)
  //     da = w pf (lpf - lq - kl1) / tau ; db = w (q - pf)
  int agreement_rows(int a, int b, T tau, const std::vector<T>& row_w, bool symmetric = true) {
    if (tau <= T(0)) throw NumericError("flattening temperature must be positive");
    const Mat& za = val(a);
    const Mat& zb = val(b);
    if (za.rows() != zb.rows() || za.cols() != zb.cols())
      throw DataError("agreement_rows: logit shape mismatch");
    if (static_cast<size_t>(za.rows()) != row_w.size())
      throw DataError("agreement_rows: weight count mismatch");

    using ArrX = Eigen::Array<T, 1, Eigen::Dynamic>;
    auto log_softmax = [](const ArrX& z) {
      const T mx = z.maxCoeff();
      ArrX out = z - mx;
      out -= std::log(out.exp().sum());
      return out;
    };

    T total = T(0);
    for (Eigen::Index r = 0; r < za.rows(); ++r) {
      if (row_w[r] == T(0)) continue;
      const ArrX lpf = log_softmax(za.row(r).array() / tau);
      const ArrX lq = log_softmax(ArrX(zb.row(r).array()));
      const T kl1 = (lpf.exp() * (lpf - lq)).sum();
      if (symmetric) {
        const ArrX lqf = log_softmax(zb.row(r).array() / tau);
        const ArrX lp = log_softmax(ArrX(za.row(r).array()));
        const T kl2 = (lqf.exp() * (lqf - lp)).sum();
        total += row_w[r] * (kl1 + kl2) / T(2);
      } else {
        total += row_w[r] * kl1;
      }
    }
    Mat v(1, 1);
    v(0, 0) = total;
    int id = push(std::move(v), needs(a) || needs(b));
    if (grads(id)) {
      nodes_[id].back = [this, id, a, b, tau, row_w, symmetric, log_softmax] {
        const T g = grad(id)(0, 0);
        const Mat& za = val(a);
        const Mat& zb = val(b);
        for (Eigen::Index r = 0; r < za.rows(); ++r) {
          if (row_w[r] == T(0)) continue;
          const ArrX lpf = log_softmax(za.row(r).array() / tau);
          const ArrX lq = log_softmax(ArrX(zb.row(r).array()));
          const ArrX pf = lpf.exp();
          const T kl1 = (pf * (lpf - lq)).sum();
          if (symmetric) {
            const ArrX lqf = log_softmax(zb.row(r).array() / tau);
            const ArrX lp = log_softmax(ArrX(za.row(r).array()));
            const ArrX qf = lqf.exp();
            const T kl2 = (qf * (lqf - lp)).sum();
            const T w = g * row_w[r] / T(2);
            if (needs(a))
              grad(a).row(r).array() += w * (pf * (lpf - lq - kl1) / tau + (lp.exp() - qf));
            if (needs(b))
              grad(b).row(r).array() += w * (qf * (lqf - lp - kl2) / tau + (lq.exp() - pf));
          } else {
            const T w = g * row_w[r];
            if (needs(a)) grad(a).row(r).array() += w * pf * (lpf - lq - kl1) / tau;
            if (needs(b)) grad(b).row(r).array() += w * (lq.exp() - pf);
          }
        }
      };
    }
    return id;
  }

  void backward(int root, T seed = T(1)) {
    if (!recording) throw NumericError("backward on a non-recording tape");
    if (val(root).size() != 1) throw NumericError("backward root must be scalar");
    ensure_grad(root)(0, 0) += seed;
    for (int i = root; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.back && n.grad.size() > 0) n.back();
    }
  }

  void clear() { nodes_.clear(); }
  size_t size() const { return nodes_.size(); }

  Mat& grad(int id) { return ensure_grad(id); }

 private:
  struct Node {
    Mat value;
    const Mat* value_ref = nullptr;
    Mat* grad_sink = nullptr;
    Mat grad;
    bool requires_grad = false;
    std::function<void()> back;
  };

  bool needs(int id) const { return nodes_[id].requires_grad; }
  bool grads(int id) const { return recording && nodes_[id].requires_grad; }

  int push(Mat v, bool requires) {
    Node n;
    n.value = std::move(v);
    n.requires_grad = recording && requires;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  Mat& ensure_grad(int id) {
    Node& n = nodes_[id];
    if (n.grad_sink) return *n.grad_sink;
    if (n.grad.size() == 0) {
      const Mat& v = val(id);
      n.grad = Mat::Zero(v.rows(), v.cols());
    }
    return n.grad;
  }

  std::vector<Node> nodes_;
};

}  // namespace ciphernmt
