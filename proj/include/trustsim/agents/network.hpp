#pragma once

// Dueling Q-network with a hand-written backward pass and Adam.
//
// Layout: trunk of ReLU layers, then a value head (hidden -> 1) and an
// advantage head (hidden -> actions), both with one ReLU hidden layer.
// Q = V + A - mean(A). Columns of every matrix are samples.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "trustsim/random.hpp"

namespace trustsim {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct Topology
{
  std::size_t              input{16};
  std::vector<std::size_t> trunk{128, 64};
  std::size_t              head_hidden{32};
  std::size_t              actions{3};

  friend bool operator==(Topology const &, Topology const &) = default;
};

struct Dense
{
  Mat W;  // out x in
  Vec b;

  Dense() = default;
  Dense(std::size_t in, std::size_t out) : W{Mat::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in))}, b{Vec::Zero(static_cast<Eigen::Index>(out))} {}

  std::size_t size() const noexcept { return static_cast<std::size_t>(W.size() + b.size()); }
};

/// Every trainable array in declared order: trunk layers, value hidden, value out,
/// advantage hidden, advantage out.
struct Parameters
{
  std::vector<Dense> layers;

  static Parameters zeros(Topology const &t)
  {
    Parameters  p;
    std::size_t in = t.input;
    for (auto h : t.trunk)
    {
      p.layers.emplace_back(in, h);
      in = h;
    }
    p.layers.emplace_back(in, t.head_hidden);
    p.layers.emplace_back(t.head_hidden, 1);
    p.layers.emplace_back(in, t.head_hidden);
    p.layers.emplace_back(t.head_hidden, t.actions);
    return p;
  }

  std::size_t size() const noexcept
  {
    std::size_t n = 0;
    for (auto const &l : layers)
    {
      n += l.size();
    }
    return n;
  }

  /// Visits every scalar in declared order (W column-major, then b).
  template <typename F>
  void for_each(F &&f)
  {
    for (auto &l : layers)
    {
      for (Eigen::Index i = 0; i < l.W.size(); ++i)
      {
        f(l.W.data()[i]);
      }
      for (Eigen::Index i = 0; i < l.b.size(); ++i)
      {
        f(l.b.data()[i]);
      }
    }
  }

  template <typename F>
  void for_each(F &&f) const
  {
    for (auto const &l : layers)
    {
      for (Eigen::Index i = 0; i < l.W.size(); ++i)
      {
        f(l.W.data()[i]);
      }
      for (Eigen::Index i = 0; i < l.b.size(); ++i)
      {
        f(l.b.data()[i]);
      }
    }
  }

  std::vector<double> flatten() const
  {
    std::vector<double> out;
    out.reserve(size());
    for_each([&](double x) { out.push_back(x); });
    return out;
  }

  void assign(std::vector<double> const &flat)
  {
    if (flat.size() != size())
    {
      throw std::invalid_argument("Parameters::assign: size mismatch");
    }
    std::size_t i = 0;
    for_each([&](double &x) { x = flat[i++]; });
  }
};

class DuelingNetwork
{
public:
  struct Cache
  {
    Mat              input;
    std::vector<Mat> trunk_pre;  // pre-activation per trunk layer
    std::vector<Mat> trunk_act;  // post-activation per trunk layer
    Mat              v_pre, v_act, value;
    Mat              a_pre, a_act, advantage;
    Mat              q;
  };

  explicit DuelingNetwork(Topology topo = {}) : topo_{std::move(topo)}, params_{Parameters::zeros(topo_)}
  {
    if (topo_.input == 0 || topo_.head_hidden == 0 || topo_.actions == 0 || topo_.trunk.empty())
    {
      throw std::invalid_argument("DuelingNetwork: empty layer in topology");
    }
  }

  DuelingNetwork(Topology topo, Rng &rng) : DuelingNetwork{std::move(topo)} { initialize(rng); }

  /// Uniform in +-sqrt(6 / (fan_in + fan_out)); biases zero.
  void initialize(Rng &rng)
  {
    for (auto &l : params_.layers)
    {
      double const limit = std::sqrt(6.0 / static_cast<double>(l.W.rows() + l.W.cols()));
      for (Eigen::Index i = 0; i < l.W.size(); ++i)
      {
        l.W.data()[i] = rng.uniform(-limit, limit);
      }
      l.b.setZero();
    }
  }

  Topology const   &topology() const noexcept { return topo_; }
  Parameters const &params() const noexcept { return params_; }
  Parameters       &params() noexcept { return params_; }

  Mat forward(Mat const &x) const
  {
    Cache c;
    return forward(x, c);
  }

  Vec forward_one(Vec const &x) const { return forward(Mat{x}).col(0); }

  Mat forward(Mat const &x, Cache &c) const
  {
    if (static_cast<std::size_t>(x.rows()) != topo_.input)
    {
      throw std::invalid_argument("DuelingNetwork::forward: input width mismatch");
    }
    std::size_t const T = topo_.trunk.size();
    c.input             = x;
    c.trunk_pre.resize(T);
    c.trunk_act.resize(T);
    Mat const *h = &c.input;
    for (std::size_t l = 0; l < T; ++l)
    {
      auto const &L  = params_.layers[l];
      c.trunk_pre[l] = (L.W * *h).colwise() + L.b;
      c.trunk_act[l] = c.trunk_pre[l].cwiseMax(0.0);
      h              = &c.trunk_act[l];
    }
    auto const &v1 = params_.layers[T];
    auto const &v2 = params_.layers[T + 1];
    auto const &a1 = params_.layers[T + 2];
    auto const &a2 = params_.layers[T + 3];

    c.v_pre     = (v1.W * *h).colwise() + v1.b;
    c.v_act     = c.v_pre.cwiseMax(0.0);
    c.value     = (v2.W * c.v_act).colwise() + v2.b;
    c.a_pre     = (a1.W * *h).colwise() + a1.b;
    c.a_act     = c.a_pre.cwiseMax(0.0);
    c.advantage = (a2.W * c.a_act).colwise() + a2.b;

    Eigen::RowVectorXd const mean_a = c.advantage.colwise().mean();
    c.q = c.advantage;
    c.q.rowwise() += c.value.row(0) - mean_a;
    if (!c.q.allFinite())
    {
      throw std::runtime_error("DuelingNetwork::forward: non-finite activation");
    }
    return c.q;
  }

  /// Gradient of a scalar loss with respect to every parameter, given dL/dQ.
  Parameters backward(Cache const &c, Mat const &dq) const
  {
    std::size_t const T = topo_.trunk.size();
    Parameters        g = Parameters::zeros(topo_);

    // Q_a = V + A_a - mean(A): dV = sum_a dQ_a; dA_a = dQ_a - mean(dQ).
    Mat const dv = dq.colwise().sum();
    Mat       da = dq;
    da.rowwise() -= dq.colwise().mean();

    Mat const &h = T == 0 ? c.input : c.trunk_act[T - 1];

    auto head = [&](std::size_t hidden_idx, Mat const &d_out, Mat const &pre, Mat const &act) -> Mat {
      auto const &out_layer = params_.layers[hidden_idx + 1];
      auto const &hid_layer = params_.layers[hidden_idx];
      g.layers[hidden_idx + 1].W = d_out * act.transpose();
      g.layers[hidden_idx + 1].b = d_out.rowwise().sum();
      Mat d_hidden = (out_layer.W.transpose() * d_out).cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
      g.layers[hidden_idx].W = d_hidden * h.transpose();
      g.layers[hidden_idx].b = d_hidden.rowwise().sum();
      return hid_layer.W.transpose() * d_hidden;
    };

    Mat dh = head(T, dv, c.v_pre, c.v_act);
    dh += head(T + 2, da, c.a_pre, c.a_act);

    for (std::size_t l = T; l-- > 0;)
    {
      Mat const  dz   = dh.cwiseProduct((c.trunk_pre[l].array() > 0.0).cast<double>().matrix());
      Mat const &prev = l == 0 ? c.input : c.trunk_act[l - 1];
      g.layers[l].W   = dz * prev.transpose();
      g.layers[l].b   = dz.rowwise().sum();
      if (l > 0)
      {
        dh = params_.layers[l].W.transpose() * dz;
      }
    }
    return g;
  }

  void copy_from(DuelingNetwork const &other)
  {
    if (!(other.topo_ == topo_))
    {
      throw std::invalid_argument("DuelingNetwork::copy_from: topology mismatch");
    }
    params_ = other.params_;
  }

private:
  Topology   topo_;
  Parameters params_;
};

struct AdamConfig
{
  double lr{5e-4};
  double beta1{0.9};
  double beta2{0.999};
  double eps{1e-8};
};

class Adam
{
public:
  Adam(Topology const &t, AdamConfig cfg = {}) : cfg_{cfg}, m_{Parameters::zeros(t)}, v_{Parameters::zeros(t)} {}

  void step(Parameters &p, Parameters const &g)
  {
    ++t_;
    double const bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double const bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t l = 0; l < p.layers.size(); ++l)
    {
      update(p.layers[l].W, g.layers[l].W, m_.layers[l].W, v_.layers[l].W, bc1, bc2);
      update(p.layers[l].b, g.layers[l].b, m_.layers[l].b, v_.layers[l].b, bc1, bc2);
    }
  }

  std::uint64_t steps() const noexcept { return t_; }
  AdamConfig const &config() const noexcept { return cfg_; }

private:
  template <typename M>
  void update(M &p, M const &g, M &m, M &v, double bc1, double bc2) const
  {
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    p.array() -= cfg_.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg_.eps);
  }

  AdamConfig    cfg_;
  Parameters    m_;
  Parameters    v_;
  std::uint64_t t_{0};
};

}  // namespace trustsim
