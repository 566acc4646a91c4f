#include "gcinfer/preprocess.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gcinfer/compile.hpp"
#include "gcinfer/error.hpp"
#include "json.hpp"
#include <spdlog/spdlog.h>

namespace gcinfer {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------- projection

ProjectionModel build_projection(const MatrixXd& A, const std::vector<int>& labels, const ProjectionConfig& cfg,
                                 DlTrainer* trainer) {
  if (!(cfg.gamma > 0 && cfg.gamma <= 1)) throw Error(Errc::InvalidArgument, "gamma must lie in (0, 1]");
  if (cfg.patience < 1 || cfg.n_batch < 1) throw Error(Errc::InvalidArgument, "patience and n_batch must be >= 1");
  const Eigen::Index m = A.rows(), N = A.cols();
  if (trainer && labels.size() != size_t(N)) throw Error(Errc::DimMismatch, "one label per sample needed");

  // D = Q R kept as an incremental thin QR
  MatrixXd Q(m, 0), R(0, 0);
  std::vector<VectorXd> dcols;
  std::vector<VectorXd> coef(N);
  ProjectionModel out;
  double delta = 1, delta_best = 1;
  size_t itr = 0;
  std::vector<VectorXd> bx;
  std::vector<int> by;

  for (Eigen::Index i = 0; i < N; ++i) {
    const VectorXd a = A.col(i);
    const double na = a.norm();
    VectorXd proj_i = VectorXd::Zero(m);
    if (na == 0) {
      ++out.skipped;
      spdlog::warn("projection: sample {} has zero norm, skipped", i);
    } else {
      const Eigen::Index l = Q.cols();
      double vp = 1;
      VectorXd qa;
      if (l > 0) {
        qa = Q.transpose() * a;
        vp = (Q * qa - a).norm() / na;
      }
      if (delta <= delta_best) delta_best = delta, itr = 0;
      else ++itr;
      bool appended = false;
      if (vp > cfg.gamma && itr < cfg.patience) {
        const double s = std::sqrt(na);
        VectorXd d = a / s;
        VectorXd r = Q.transpose() * d;
        VectorXd v = d - Q * r;
        VectorXd r2 = Q.transpose() * v;  // second Gram-Schmidt pass
        v -= Q * r2;
        r += r2;
        const double rho = v.norm();
        if (rho > 1e-12 * d.norm()) {
          Q.conservativeResize(m, l + 1);
          Q.col(l) = v / rho;
          R.conservativeResize(l + 1, l + 1);
          R.row(l).setZero();
          R.col(l).head(l) = r;
          R(l, l) = rho;
          dcols.push_back(d);
          coef[i] = VectorXd::Zero(l + 1);
          coef[i][l] = s;
          proj_i = a;
          appended = true;
        } else {
          spdlog::warn("projection: dependent column at sample {}, projected instead", i);
        }
      }
      if (!appended && l > 0) {
        if (qa.size() != Q.cols()) qa = Q.transpose() * a;
        coef[i] = R.topLeftCorner(Q.cols(), Q.cols()).triangularView<Eigen::Upper>().solve(qa);
        proj_i = Q * qa;
      }
    }
    if (trainer) {
      bx.push_back(proj_i);
      by.push_back(labels[i]);
      if ((i + 1) % Eigen::Index(cfg.n_batch) == 0) {
        MatrixXd X(m, Eigen::Index(bx.size()));
        for (size_t k = 0; k < bx.size(); ++k) X.col(Eigen::Index(k)) = bx[k];
        trainer->update(X, by);
        delta = trainer->validation_error();
        out.deltas.push_back(delta);
        bx.clear(), by.clear();
      }
    }
  }

  const Eigen::Index l = Eigen::Index(dcols.size());
  out.l = size_t(l);
  out.D.resize(m, l);
  for (Eigen::Index j = 0; j < l; ++j) out.D.col(j) = dcols[j];
  out.C = MatrixXd::Zero(l, N);
  for (Eigen::Index i = 0; i < N; ++i)
    if (coef[i].size()) out.C.col(i).head(coef[i].size()) = coef[i];
  out.W = Q * Q.transpose();
  const double an = A.norm();
  out.epsilon = an > 0 ? (A - out.D * out.C).norm() / an : 0.0;
  return out;
}

MatrixXd projector_from_dictionary(const MatrixXd& D) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(D);
  const Eigen::Index r = qr.rank();
  MatrixXd Q = qr.householderQ() * MatrixXd::Identity(D.rows(), r);
  return Q * Q.transpose();
}

VectorXd project(const VectorXd& x, const MatrixXd& W) {
  if (x.size() != W.cols())
    throw Error(Errc::DimMismatch, "vector of " + std::to_string(x.size()) + " for a " + std::to_string(W.cols()) +
                                       "-wide projector");
  return W * x;
}

FxVec project_fixed(const VectorXd& x, const MatrixXd& W) {
  VectorXd y = project(x, W);
  FxVec out(size_t(y.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) out[size_t(i)] = encode(y[i]);
  return out;
}

namespace {

size_t numeric_rank(const MatrixXd& M) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(M);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0) return 0;
  size_t r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) r += s[i] > 1e-9 * s[0];
  return r;
}

}  // namespace

ProjectorReport verify_projector(const MatrixXd& W, const MatrixXd& D, double tol) {
  ProjectorReport r;
  if (W.rows() != W.cols() || D.rows() != W.rows()) {
    r.failures.push_back("shape");
    return r;
  }
  const double wn = std::max(W.norm(), 1e-300), dn = std::max(D.norm(), 1e-300);
  r.symmetry = (W.transpose() - W).norm() / wn;
  r.idempotency = (W * W - W).norm() / wn;
  r.fixed_point = (W * D - D).norm() / dn;
  r.rank_W = numeric_rank(W);
  r.rank_D = numeric_rank(D);
  if (r.symmetry > tol) r.failures.push_back("symmetry");
  if (r.idempotency > tol) r.failures.push_back("idempotency");
  if (r.fixed_point > tol) r.failures.push_back("fixed point on span(D)");
  if (r.rank_W != r.rank_D) r.failures.push_back("rank");
  return r;
}

// ---------------------------------------------------------------- pruning

namespace {

bool has_weights(const LayerSpec& L) { return L.kind == LayerKind::FullyConnected || L.kind == LayerKind::Conv2D; }

}  // namespace

PruneResult magnitude_prune_fraction(const ModelDescriptor& m, double fraction) {
  if (!(fraction >= 0 && fraction < 1)) throw Error(Errc::InvalidArgument, "fraction must lie in [0, 1)");
  PruneResult r;
  r.masks.resize(m.layers.size());
  for (size_t li = 0; li < m.layers.size(); ++li) {
    const auto& L = m.layers[li];
    if (!has_weights(L)) continue;
    const size_t n = L.weights.size(), k = size_t(std::ceil(fraction * double(n) - 1e-12));
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
      return std::abs(int32_t(L.weight(a).raw)) < std::abs(int32_t(L.weight(b).raw));
    });
    r.masks[li].assign(n, 1);
    for (size_t i = 0; i < k; ++i) r.masks[li][idx[i]] = 0;
  }
  r.model = apply_sparsity(m, r.masks);
  return r;
}

PruneResult magnitude_prune_threshold(const ModelDescriptor& m, double threshold) {
  if (!(threshold >= 0)) throw Error(Errc::InvalidArgument, "threshold must be >= 0");
  PruneResult r;
  r.masks.resize(m.layers.size());
  for (size_t li = 0; li < m.layers.size(); ++li) {
    const auto& L = m.layers[li];
    if (!has_weights(L)) continue;
    r.masks[li].assign(L.weights.size(), 1);
    for (size_t k = 0; k < L.weights.size(); ++k)
      if (!L.kept(k) || std::abs(decode(L.weights[k])) < threshold) r.masks[li][k] = 0;
  }
  r.model = apply_sparsity(m, r.masks);
  return r;
}

// ---------------------------------------------------------------- trainer

namespace {

MatrixXd act_fwd(ActFn f, const MatrixXd& Z) {
  switch (f) {
    case ActFn::ReLU: return Z.cwiseMax(0.0);
    case ActFn::Tanh: return Z.array().tanh().matrix();
    case ActFn::Sigmoid: return (1.0 / (1.0 + (-Z.array()).exp())).matrix();
    case ActFn::Softmax: {
      MatrixXd P = Z;
      for (Eigen::Index j = 0; j < P.cols(); ++j) {
        double mx = P.col(j).maxCoeff();
        P.col(j) = (P.col(j).array() - mx).exp().matrix();
        P.col(j) /= P.col(j).sum();
      }
      return P;
    }
  }
  return Z;
}

// derivative given pre-activation Z and activation H
MatrixXd act_grad(ActFn f, const MatrixXd& Z, const MatrixXd& H) {
  switch (f) {
    case ActFn::ReLU: return (Z.array() > 0).cast<double>().matrix();
    case ActFn::Tanh: return (1.0 - H.array().square()).matrix();
    case ActFn::Sigmoid: return (H.array() * (1.0 - H.array())).matrix();
    case ActFn::Softmax: break;
  }
  return MatrixXd::Ones(Z.rows(), Z.cols());
}

struct Trace {
  std::vector<MatrixXd> Z, H;  // H[0] = X
};

Trace forward(const Mlp& net, const MatrixXd& X) {
  Trace t;
  t.H.push_back(X);
  for (size_t l = 0; l < net.W.size(); ++l) {
    MatrixXd Z = (net.W[l].cwiseProduct(net.mask[l]) * t.H.back()).colwise() + net.b[l];
    t.H.push_back(act_fwd(l + 1 == net.W.size() ? ActFn::Softmax : net.act[l], Z));
    t.Z.push_back(std::move(Z));
  }
  return t;
}

void check_labels(const Mlp& net, const MatrixXd& X, const std::vector<int>& y) {
  if (net.W.empty()) throw Error(Errc::ShapeMismatch, "empty network");
  if (X.cols() != Eigen::Index(y.size())) throw Error(Errc::DimMismatch, "one label per sample needed");
  if (X.rows() != net.W[0].cols()) throw Error(Errc::DimMismatch, "input width does not match the network");
  for (int c : y)
    if (c < 0 || c >= net.W.back().rows()) throw Error(Errc::DimMismatch, "label out of range");
}

}  // namespace

Mlp mlp_from_model(const ModelDescriptor& m) {
  Mlp net;
  for (size_t i = 0; i < m.layers.size(); ++i) {
    const auto& L = m.layers[i];
    if (L.kind != LayerKind::FullyConnected) throw Error(Errc::UnsupportedLayer, "trainer handles FC stacks only");
    const Eigen::Index out = L.dims.out, in = L.dims.in;
    MatrixXd W(out, in), M(out, in);
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) {
        size_t k = size_t(r * in + c);
        W(r, c) = decode(L.weight(k));
        M(r, c) = L.kept(k) ? 1.0 : 0.0;
      }
    VectorXd b = VectorXd::Zero(out);
    for (size_t k = 0; k < L.bias.size(); ++k) b[Eigen::Index(k)] = decode(L.bias[k]);
    ActFn f = ActFn::Softmax;
    if (i + 1 < m.layers.size() && m.layers[i + 1].kind == LayerKind::NonLinearity) f = m.layers[++i].activation.fn;
    net.W.push_back(W);
    net.b.push_back(b);
    net.mask.push_back(M);
    net.bias_on.push_back(L.bias.empty() ? 0 : 1);
    net.act.push_back(f);
  }
  for (size_t l = 0; l + 1 < net.act.size(); ++l)
    if (net.act[l] == ActFn::Softmax) throw Error(Errc::UnsupportedLayer, "softmax only on the last layer");
  return net;
}

ModelDescriptor mlp_to_model(const Mlp& net, const ModelDescriptor& like) {
  ModelDescriptor m = like;
  size_t l = 0;
  for (auto& L : m.layers) {
    if (L.kind != LayerKind::FullyConnected) continue;
    const auto& W = net.W.at(l);
    for (Eigen::Index r = 0; r < W.rows(); ++r)
      for (Eigen::Index c = 0; c < W.cols(); ++c) {
        size_t k = size_t(r * W.cols() + c);
        L.weights[k] = L.kept(k) ? encode(W(r, c)) : Fixed16();
      }
    for (size_t k = 0; k < L.bias.size(); ++k) L.bias[k] = encode(net.b[l][Eigen::Index(k)]);
    ++l;
  }
  return m;
}

double mlp_loss(const Mlp& net, const MatrixXd& X, const std::vector<int>& y) {
  check_labels(net, X, y);
  auto t = forward(net, X);
  double s = 0;
  for (size_t j = 0; j < y.size(); ++j) s -= std::log(std::max(t.H.back()(y[j], Eigen::Index(j)), 1e-300));
  return s / double(y.size());
}

MlpGrad mlp_gradients(const Mlp& net, const MatrixXd& X, const std::vector<int>& y) {
  check_labels(net, X, y);
  auto t = forward(net, X);
  const size_t L = net.W.size();
  MlpGrad g;
  g.W.resize(L), g.b.resize(L);
  MatrixXd dZ = t.H.back();
  for (size_t j = 0; j < y.size(); ++j) dZ(y[j], Eigen::Index(j)) -= 1.0;
  dZ /= double(y.size());
  for (size_t l = L; l-- > 0;) {
    g.W[l] = (dZ * t.H[l].transpose()).cwiseProduct(net.mask[l]);
    g.b[l] = net.bias_on[l] ? VectorXd(dZ.rowwise().sum()) : VectorXd::Zero(dZ.rows());
    if (l == 0) break;
    MatrixXd dH = net.W[l].cwiseProduct(net.mask[l]).transpose() * dZ;
    dZ = dH.cwiseProduct(act_grad(net.act[l - 1], t.Z[l - 1], t.H[l]));
  }
  return g;
}

std::vector<int> mlp_predict(const Mlp& net, const MatrixXd& X) {
  auto t = forward(net, X);
  std::vector<int> p(size_t(X.cols()));
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    Eigen::Index k;
    t.H.back().col(j).maxCoeff(&k);
    p[size_t(j)] = int(k);
  }
  return p;
}

double mlp_error_rate(const Mlp& net, const MatrixXd& X, const std::vector<int>& y) {
  check_labels(net, X, y);
  auto p = mlp_predict(net, X);
  size_t wrong = 0;
  for (size_t j = 0; j < y.size(); ++j) wrong += p[j] != y[j];
  return y.empty() ? 0.0 : double(wrong) / double(y.size());
}

void mlp_train_epoch(Mlp& net, const MatrixXd& X, const std::vector<int>& y, double lr, size_t batch,
                     std::mt19937_64& rng) {
  check_labels(net, X, y);
  std::vector<Eigen::Index> idx(size_t(X.cols()));
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  batch = std::max<size_t>(batch, 1);
  for (size_t s = 0; s < idx.size(); s += batch) {
    const size_t k = std::min(batch, idx.size() - s);
    MatrixXd Xb(X.rows(), Eigen::Index(k));
    std::vector<int> yb(k);
    for (size_t i = 0; i < k; ++i) Xb.col(Eigen::Index(i)) = X.col(idx[s + i]), yb[i] = y[size_t(idx[s + i])];
    auto g = mlp_gradients(net, Xb, yb);
    for (size_t l = 0; l < net.W.size(); ++l) {
      net.W[l] -= lr * g.W[l];
      net.b[l] -= lr * g.b[l];
      // stay inside the Fixed16 range so export does not saturate
      net.W[l] = net.W[l].cwiseMax(-8.0).cwiseMin(7.999);
      net.b[l] = net.b[l].cwiseMax(-8.0).cwiseMin(7.999);
    }
  }
}

MlpTrainer::MlpTrainer(Mlp net, MatrixXd X_val, std::vector<int> y_val, double lr, size_t passes, uint64_t seed)
    : net_(std::move(net)), Xv_(std::move(X_val)), yv_(std::move(y_val)), lr_(lr), passes_(passes), rng_(seed) {}

void MlpTrainer::update(const MatrixXd& X, const std::vector<int>& labels) {
  for (size_t p = 0; p < passes_; ++p) mlp_train_epoch(net_, X, labels, lr_, size_t(X.cols()), rng_);
}

double MlpTrainer::validation_error() { return mlp_error_rate(net_, Xv_, yv_); }

double fixed_error_rate(const ModelDescriptor& m, const MatrixXd& X, const std::vector<int>& y) {
  if (X.cols() != Eigen::Index(y.size())) throw Error(Errc::DimMismatch, "one label per sample needed");
  std::vector<FxVec> xs(y.size());
  for (size_t j = 0; j < y.size(); ++j) {
    xs[j].resize(size_t(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) xs[j][size_t(i)] = encode(X(i, Eigen::Index(j)));
  }
  auto p = ref_network_eval_batch(m, xs);
  size_t wrong = 0;
  for (size_t j = 0; j < y.size(); ++j) wrong += p[j] != size_t(y[j]);
  return y.empty() ? 0.0 : double(wrong) / double(y.size());
}

// ---------------------------------------------------------------- data

Dataset synthetic_low_rank(size_t m, size_t N, size_t rank, double noise, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> G(0, 1);
  MatrixXd U(m, rank), Z(rank, N), E(m, N);
  for (Eigen::Index i = 0; i < U.size(); ++i) U.data()[i] = G(rng) / std::sqrt(double(rank));
  for (Eigen::Index i = 0; i < Z.size(); ++i) Z.data()[i] = G(rng);
  for (Eigen::Index i = 0; i < E.size(); ++i) E.data()[i] = G(rng) * noise;
  Dataset d;
  d.X = U * Z + E;
  for (size_t j = 0; j < N; ++j) d.y.push_back(Z(0, Eigen::Index(j)) > 0 ? 1 : 0);
  return d;
}

Dataset synthetic_two_class(size_t dim, size_t N, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> G(0, 1);
  VectorXd mu(dim);
  for (auto& v : mu) v = G(rng);
  mu *= 0.75 / mu.norm();  // class means at +-mu, Bayes error about 23%
  Dataset d;
  d.X.resize(Eigen::Index(dim), Eigen::Index(N));
  for (size_t j = 0; j < N; ++j) {
    const int c = int(rng() & 1);
    for (size_t i = 0; i < dim; ++i)
      d.X(Eigen::Index(i), Eigen::Index(j)) = std::clamp((c ? 1 : -1) * mu[Eigen::Index(i)] + G(rng), -7.9, 7.9);
    d.y.push_back(c);
  }
  return d;
}

MatrixXd read_csv_samples(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(Errc::InvalidArgument, "cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> r;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        r.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(Errc::ParseError, path + ": bad number '" + cell + "'");
      }
    }
    if (!rows.empty() && r.size() != rows[0].size()) throw Error(Errc::ParseError, path + ": ragged rows");
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw Error(Errc::ParseError, path + ": no rows");
  MatrixXd X(Eigen::Index(rows[0].size()), Eigen::Index(rows.size()));
  for (size_t j = 0; j < rows.size(); ++j)
    for (size_t i = 0; i < rows[j].size(); ++i) X(Eigen::Index(i), Eigen::Index(j)) = rows[j][i];
  return X;
}

void write_csv_samples(const MatrixXd& X, const std::string& path) {
  std::ofstream f(path);
  f.precision(17);
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) f << (i ? "," : "") << X(i, j);
    f << '\n';
  }
  if (!f) throw Error(Errc::InvalidArgument, "cannot write " + path);
}

std::vector<int> read_csv_labels(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(Errc::InvalidArgument, "cannot open " + path);
  std::vector<int> y;
  std::string line;
  while (std::getline(f, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      y.push_back(std::stoi(line));
    } catch (const std::exception&) {
      throw Error(Errc::ParseError, path + ": bad label '" + line + "'");
    }
  }
  return y;
}

void write_csv_labels(const std::vector<int>& y, const std::string& path) {
  std::ofstream f(path);
  for (int v : y) f << v << '\n';
  if (!f) throw Error(Errc::InvalidArgument, "cannot write " + path);
}

namespace {

nlohmann::json rows_of(const MatrixXd& M) {
  auto j = nlohmann::json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    std::vector<double> row(size_t(M.cols()));
    for (Eigen::Index c = 0; c < M.cols(); ++c) row[size_t(c)] = M(r, c);
    j.push_back(row);
  }
  return j;
}

MatrixXd from_rows(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols) {
  MatrixXd M(rows, cols);
  if (Eigen::Index(j.size()) != rows) throw Error(Errc::ParseError, "projection: wrong row count");
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (Eigen::Index(j[size_t(r)].size()) != cols) throw Error(Errc::ParseError, "projection: wrong column count");
    for (Eigen::Index c = 0; c < cols; ++c) M(r, c) = j[size_t(r)][size_t(c)].get<double>();
  }
  return M;
}

}  // namespace

std::string projection_to_json(const ProjectionModel& p, const ProjectionConfig& cfg) {
  nlohmann::json j;
  j["format"] = "gcinfer-projection-1";
  j["m"] = p.W.rows();
  j["l"] = p.l;
  j["gamma"] = cfg.gamma;
  j["patience"] = cfg.patience == std::numeric_limits<size_t>::max() ? nlohmann::json() : nlohmann::json(cfg.patience);
  j["n_batch"] = cfg.n_batch;
  j["epsilon"] = p.epsilon;
  j["skipped"] = p.skipped;
  j["W"] = rows_of(p.W);
  j["D"] = rows_of(p.D);
  return j.dump(1);
}

ProjectionModel projection_from_json(const std::string& text) {
  try {
    auto j = nlohmann::json::parse(text);
    ProjectionModel p;
    const Eigen::Index m = j.at("m").get<Eigen::Index>();
    p.l = j.at("l").get<size_t>();
    p.epsilon = j.value("epsilon", 0.0);
    p.skipped = j.value("skipped", size_t(0));
    p.W = from_rows(j.at("W"), m, m);
    p.D = from_rows(j.at("D"), m, Eigen::Index(p.l));
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("projection json: ") + e.what());
  }
}

}  // namespace gcinfer
