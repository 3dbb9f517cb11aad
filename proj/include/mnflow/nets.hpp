#pragma once

// Shallow ReLU denoiser with skip connection, analytic backpropagation, Adam,
// and the constrained (Augmented Lagrangian) / penalized training loops.

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "mnflow/dataset.hpp"

namespace mnflow {

// theta = (W, b, A, V, c): h(y) = sum_k a_k [w_k . y + b_k]_+ + V y + c.
struct NetParams {
  Mat W;  // K x d, rows w_k
  Vec b;  // K
  Mat A;  // d x K, columns a_k
  Mat V;  // d x d skip
  Vec c;  // d

  int hidden() const { return static_cast<int>(W.rows()); }
  int dim() const { return static_cast<int>(W.cols()); }
};

using NetGrads = NetParams;

// Identity-skip start: the initial denoiser is the identity map.
inline NetParams init_params(int K, int d, std::uint64_t seed) {
  Rng rng(seed);
  NetParams p;
  const double std_dev = 1.0 / std::sqrt(static_cast<double>(d));
  p.W = gaussian_matrix(K, d, rng, std_dev);
  p.b = Vec::Zero(K);
  p.A = gaussian_matrix(d, K, rng, std_dev);
  p.V = Mat::Identity(d, d);
  p.c = Vec::Zero(d);
  return p;
}

inline Mat forward_batch(const NetParams& p, const Mat& Y) {  // Y is d x B
  Mat Z = (p.W * Y).colwise() + p.b;
  Mat R = Z.cwiseMax(0.0);
  return ((p.A * R + p.V * Y).colwise() + p.c);
}

inline Vec forward(const NetParams& p, const Vec& y) {
  Vec z = p.W * y + p.b;
  return p.A * z.cwiseMax(0.0) + p.V * y + p.c;
}

inline std::function<Vec(const Vec&)> net_fn(const NetParams& p) {
  return [p](const Vec& y) { return forward(p, y); };
}

// ---- noisy dataset -----------------------------------------------------------

// Row n*M + m holds y_{n,m} = x_n + eps_{n,m}.
struct NoisyDataset {
  Mat clean;  // N x d
  Mat noisy;  // (N*M) x d
  int M = 0;
  double sigma = 0;
  std::uint64_t seed = 0;
};

inline NoisyDataset gen_noisy(const DatasetSpec& spec, int M, double sigma, std::uint64_t seed) {
  if (M < 1) throw InvalidSpec("gen_noisy: M >= 1");
  NoisyDataset ds;
  ds.clean = spec.points;
  ds.M = M;
  ds.sigma = sigma;
  ds.seed = seed;
  Rng rng(seed);
  const int N = spec.n_points(), d = spec.dim();
  ds.noisy = Mat(N * M, d);
  for (int n = 0; n < N; ++n)
    for (int m = 0; m < M; ++m)
      ds.noisy.row(n * M + m) =
          spec.points.row(n) + sigma * gaussian_vector(d, rng).transpose();
  return ds;
}

// ---- losses -------------------------------------------------------------------

struct ALState {
  double mu = 1.0;
  Mat Q;  // d x (N*M), column (n,m) multiplier
  int outer_k = 0;
  double lr = 1e-4;
};

// l2 penalty on the weights but not the biases or skip.
inline double weight_cost(const NetParams& p) {
  return 0.5 * (p.A.squaredNorm() + p.W.squaredNorm());
}

struct ReprCost {
  double raw;       // C(theta)
  double balanced;  // sum_k ||a_k|| ||w_k||, equal to raw at balanced minima
};

inline ReprCost representation_cost(const NetParams& p) {
  ReprCost rc{weight_cost(p), 0.0};
  for (int k = 0; k < p.hidden(); ++k) rc.balanced += p.A.col(k).norm() * p.W.row(k).norm();
  return rc;
}

struct TrainMode {
  bool al = true;
  const ALState* state = nullptr;  // AL mode
  double lambda = 0;               // penalized mode
};

inline TrainMode al_mode(const ALState& s) { return {true, &s, 0.0}; }
inline TrainMode penalized_mode(double lambda) { return {false, nullptr, lambda}; }

struct LossGrad {
  double loss;
  NetGrads grads;
};

// Full-batch loss and analytic gradients. The regularizer excludes b, V, c in
// both modes; ReLU subgradient at 0 is 0 in forward and backward alike.
inline LossGrad loss_and_grad(const NetParams& p, const NoisyDataset& data, const TrainMode& mode) {
  const int B = static_cast<int>(data.noisy.rows());
  const int M = data.M;
  Mat Y = data.noisy.transpose();  // d x B
  Mat X(Y.rows(), B);
  for (int col = 0; col < B; ++col) X.col(col) = data.clean.row(col / M).transpose();

  Mat Z = (p.W * Y).colwise() + p.b;
  Mat R = Z.cwiseMax(0.0);
  Mat H = ((p.A * R + p.V * Y).colwise() + p.c);
  Mat r = H - X;

  LossGrad out;
  Mat G;  // dLoss/dH
  if (mode.al) {
    const ALState& st = *mode.state;
    out.loss = weight_cost(p) + (st.mu / (2.0 * B)) * r.squaredNorm() +
               (1.0 / B) * (st.Q.array() * r.array()).sum();
    G = (st.mu * r + st.Q) / B;
  } else {
    out.loss = r.squaredNorm() / B + mode.lambda * weight_cost(p);
    G = (2.0 / B) * r;
  }

  NetGrads& g = out.grads;
  g.A = G * R.transpose();
  g.V = G * Y.transpose();
  g.c = G.rowwise().sum();
  Mat S = (p.A.transpose() * G).array() * (Z.array() > 0.0).cast<double>();
  g.W = S * Y.transpose();
  g.b = S.rowwise().sum();
  const double reg = mode.al ? 1.0 : mode.lambda;
  g.A += reg * p.A;
  g.W += reg * p.W;
  return out;
}

// ---- Adam -----------------------------------------------------------------------

struct AdamState {
  NetGrads m, v;
  long step = 0;

  explicit AdamState(const NetParams& p) {
    auto zero_like = [](const NetParams& q) {
      NetGrads z;
      z.W = Mat::Zero(q.W.rows(), q.W.cols());
      z.b = Vec::Zero(q.b.size());
      z.A = Mat::Zero(q.A.rows(), q.A.cols());
      z.V = Mat::Zero(q.V.rows(), q.V.cols());
      z.c = Vec::Zero(q.c.size());
      return z;
    };
    m = zero_like(p);
    v = zero_like(p);
  }
};

inline void adam_step(AdamState& st, NetParams& p, const NetGrads& g, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  ++st.step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.step));
  auto upd = [&](auto& theta, auto& m, auto& v, const auto& grad) {
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
    theta -= (lr * (m / bc1).array() / ((v / bc2).array().sqrt() + eps)).matrix();
  };
  upd(p.W, st.m.W, st.v.W, g.W);
  upd(p.b, st.m.b, st.v.b, g.b);
  upd(p.A, st.m.A, st.v.A, g.A);
  upd(p.V, st.m.V, st.v.V, g.V);
  upd(p.c, st.m.c, st.v.c, g.c);
}

// ---- training loops ---------------------------------------------------------------

struct TrainConfig {
  int K = 64;
  double lr0 = 1e-4;
  int inner = 10000;
  double eta = 3.0;
  int outer = 7;  // script-K: rounds run k = 0..outer inclusive
  double mu0 = 1.0;
  std::uint64_t seed = 0;
};

inline double max_interp_error(const NetParams& p, const NoisyDataset& data) {
  Mat Y = data.noisy.transpose();
  Mat H = forward_batch(p, Y);
  double worst = 0;
  for (int col = 0; col < H.cols(); ++col)
    worst = std::max(worst,
                     (H.col(col) - data.clean.row(col / data.M).transpose())
                         .lpNorm<Eigen::Infinity>());
  return worst;
}

struct TrainRound {
  int outer_k;
  double mu, lr, loss;
  double max_interp_err;
  ReprCost cost;
};

using TrainCallback = std::function<void(const TrainRound&, const NetParams&, const ALState*)>;

// Outer rounds k = 0..K: warm-started inner Adam minimization of L_AL, then
// Q <- Q + mu r, mu <- eta mu, lr <- lr/2.
//
// cfg.mu0 is the textbook (unnormalized sum) penalty weight. Against the
// 1/MN-normalized loss the equivalent weight is mu0 * MN; without that factor
// the round-0 penalty gradient is ~MN times weaker than the weight cost and
// the exact inner argmin collapses the hidden layer (A, W -> 0 with b = 0),
// after which every gradient through the ReLUs vanishes for good.
inline NetParams train_al(const NoisyDataset& data, const TrainConfig& cfg,
                          const TrainCallback& cb = nullptr) {
  const int d = static_cast<int>(data.clean.cols());
  const double batch = static_cast<double>(data.noisy.rows());
  NetParams p = init_params(cfg.K, d, cfg.seed);
  ALState st;
  st.mu = cfg.mu0 * batch;
  st.lr = cfg.lr0;
  st.Q = Mat::Zero(d, data.noisy.rows());
  Rng revive_rng(mix_seed(cfg.seed, 0x9e97));
  for (int k = 0; k <= cfg.outer; ++k) {
    st.outer_k = k;
    // Early rounds are weight-cost dominated and can drive units to the dead
    // set a_k = w_k = 0 (with b_k = 0 no gradient flows through them again).
    // Re-seed such units before each round's minimization.
    for (int u = 0; u < cfg.K; ++u) {
      if (p.A.col(u).norm() * p.W.row(u).norm() < 1e-6) {
        p.W.row(u) = gaussian_vector(d, revive_rng, 0.05).transpose();
        p.A.col(u) = gaussian_vector(d, revive_rng, 0.05);
        p.b[u] = 0.0;
      }
    }
    AdamState adam(p);
    double last_loss = 0;
    TrainMode mode = al_mode(st);
    for (int it = 0; it < cfg.inner; ++it) {
      LossGrad lg = loss_and_grad(p, data, mode);
      if (!std::isfinite(lg.loss)) throw Diverged("train_al: non-finite loss");
      adam_step(adam, p, lg.grads, st.lr);
      last_loss = lg.loss;
    }
    // multiplier update with the residuals of the round's final parameters
    Mat H = forward_batch(p, data.noisy.transpose());
    Mat X(d, H.cols());
    for (int col = 0; col < H.cols(); ++col) X.col(col) = data.clean.row(col / data.M).transpose();
    st.Q += st.mu * (H - X);
    if (cb) {
      // report mu in the textbook convention: mu0 * eta^k
      TrainRound round{k, st.mu / batch, st.lr, last_loss, max_interp_error(p, data),
                       representation_cost(p)};
      cb(round, p, &st);
    }
    st.mu *= cfg.eta;
    st.lr *= 0.5;
  }
  return p;
}

// Same loop shape with the plain penalized loss (lambda = 0 gives the
// no-regularization baseline).
inline NetParams train_penalized(const NoisyDataset& data, double lambda, const TrainConfig& cfg,
                                 const TrainCallback& cb = nullptr) {
  const int d = static_cast<int>(data.clean.cols());
  NetParams p = init_params(cfg.K, d, cfg.seed);
  double lr = cfg.lr0;
  TrainMode mode = penalized_mode(lambda);
  for (int k = 0; k <= cfg.outer; ++k) {
    AdamState adam(p);
    double last_loss = 0;
    for (int it = 0; it < cfg.inner; ++it) {
      LossGrad lg = loss_and_grad(p, data, mode);
      if (!std::isfinite(lg.loss)) throw Diverged("train_penalized: non-finite loss");
      adam_step(adam, p, lg.grads, lr);
      last_loss = lg.loss;
    }
    if (cb) {
      TrainRound round{k, 0.0, lr, last_loss, max_interp_error(p, data),
                       representation_cost(p)};
      cb(round, p, nullptr);
    }
    lr *= 0.5;
  }
  return p;
}

// ---- checkpoints -------------------------------------------------------------------

// Header `K d sigma seed`, then labeled row-major blocks W, b, A, V, c.
inline void save_checkpoint(const NetParams& p, double sigma, std::uint64_t seed,
                            std::ostream& os) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", sigma);
  os << p.hidden() << " " << p.dim() << " " << buf << " " << seed << "\n";
  auto block = [&os, &buf](const char* name, const Mat& m) {
    os << name << "\n";
    for (int i = 0; i < m.rows(); ++i) {
      for (int j = 0; j < m.cols(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
        os << (j ? " " : "") << buf;
      }
      os << "\n";
    }
  };
  block("W", p.W);
  block("b", p.b.transpose());
  block("A", p.A);
  block("V", p.V);
  block("c", p.c.transpose());
}

inline void save_checkpoint(const NetParams& p, double sigma, std::uint64_t seed,
                            const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path);
  save_checkpoint(p, sigma, seed, f);
}

inline NetParams load_checkpoint(std::istream& is, double* sigma = nullptr,
                                 std::uint64_t* seed = nullptr) {
  int K, d;
  double sig;
  std::uint64_t sd;
  if (!(is >> K >> d >> sig >> sd)) throw IoError("checkpoint: bad header");
  if (sigma) *sigma = sig;
  if (seed) *seed = sd;
  auto block = [&is](const char* name, int rows, int cols) {
    std::string label;
    if (!(is >> label) || label != name) throw IoError("checkpoint: expected block " + std::string(name));
    Mat m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j)
        if (!(is >> m(i, j))) throw IoError("checkpoint: truncated block");
    return m;
  };
  NetParams p;
  p.W = block("W", K, d);
  p.b = block("b", 1, K).row(0).transpose();
  p.A = block("A", d, K);
  p.V = block("V", d, d);
  p.c = block("c", 1, d).row(0).transpose();
  return p;
}

inline NetParams load_checkpoint(const std::string& path, double* sigma = nullptr,
                                 std::uint64_t* seed = nullptr) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  return load_checkpoint(f, sigma, seed);
}

}  // namespace mnflow
