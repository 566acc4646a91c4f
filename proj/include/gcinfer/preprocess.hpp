#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "gcinfer/model.hpp"

namespace gcinfer {

// Samples are columns: A is m x N.

struct ProjectionConfig {
  double gamma = 0.3;
  size_t patience = std::numeric_limits<size_t>::max();
  size_t n_batch = 32;
};

struct ProjectionModel {
  Eigen::MatrixXd D;  // m x l dictionary
  Eigen::MatrixXd C;  // l x N coefficients (zero column for skipped samples)
  Eigen::MatrixXd W;  // m x m projector
  size_t l = 0;
  double epsilon = 0;  // ||A - DC||_F / ||A||_F
  size_t skipped = 0;  // zero-norm samples
  std::vector<double> deltas;  // validation error after each trainer call
};

// UpdateDL / UpdateValidationError.
class DlTrainer {
 public:
  virtual ~DlTrainer() = default;
  // X: m x k projected samples of the latest batch
  virtual void update(const Eigen::MatrixXd& X, const std::vector<int>& labels) = 0;
  virtual double validation_error() = 0;
};

// Streaming dictionary build. trainer may be null (validation error then stays 1).
ProjectionModel build_projection(const Eigen::MatrixXd& A, const std::vector<int>& labels, const ProjectionConfig& cfg,
                                 DlTrainer* trainer = nullptr);

// W = Q Q^T with Q an orthonormal basis of range(D).
Eigen::MatrixXd projector_from_dictionary(const Eigen::MatrixXd& D);

Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::MatrixXd& W);
FxVec project_fixed(const Eigen::VectorXd& x, const Eigen::MatrixXd& W);

struct ProjectorReport {
  double symmetry = 0, idempotency = 0, fixed_point = 0;  // relative Frobenius errors
  size_t rank_W = 0, rank_D = 0;
  std::vector<std::string> failures;
  bool ok() const { return failures.empty(); }
};
ProjectorReport verify_projector(const Eigen::MatrixXd& W, const Eigen::MatrixXd& D, double tol = 1e-9);

// Masks the smallest-magnitude weights of every FC/Conv layer.
struct PruneResult {
  ModelDescriptor model;
  std::vector<std::vector<uint8_t>> masks;  // one per layer, empty for weightless layers
};
PruneResult magnitude_prune_fraction(const ModelDescriptor& m, double fraction);
PruneResult magnitude_prune_threshold(const ModelDescriptor& m, double threshold);

// ---- minimal FC trainer (double precision, Fixed16 only at export) ----

struct Mlp {
  std::vector<Eigen::MatrixXd> W;  // out x in
  std::vector<Eigen::VectorXd> b;
  std::vector<Eigen::MatrixXd> mask;  // 1 kept, 0 pruned
  std::vector<uint8_t> bias_on;       // layers exported without bias keep b = 0
  std::vector<ActFn> act;             // after each layer; last is Softmax
};

// FC-only models: alternating FC and NL layers.
Mlp mlp_from_model(const ModelDescriptor& m);
// Quantises weights back into a copy of `like` (same layers, masks kept).
ModelDescriptor mlp_to_model(const Mlp& net, const ModelDescriptor& like);

// Mean cross-entropy over the columns of X.
double mlp_loss(const Mlp& net, const Eigen::MatrixXd& X, const std::vector<int>& y);
struct MlpGrad {
  std::vector<Eigen::MatrixXd> W;
  std::vector<Eigen::VectorXd> b;
};
MlpGrad mlp_gradients(const Mlp& net, const Eigen::MatrixXd& X, const std::vector<int>& y);
std::vector<int> mlp_predict(const Mlp& net, const Eigen::MatrixXd& X);
double mlp_error_rate(const Mlp& net, const Eigen::MatrixXd& X, const std::vector<int>& y);
// One pass of mini-batch SGD over shuffled columns.
void mlp_train_epoch(Mlp& net, const Eigen::MatrixXd& X, const std::vector<int>& y, double lr, size_t batch,
                     std::mt19937_64& rng);

class MlpTrainer : public DlTrainer {
 public:
  MlpTrainer(Mlp net, Eigen::MatrixXd X_val, std::vector<int> y_val, double lr = 0.05, size_t passes = 1,
             uint64_t seed = 1);
  void update(const Eigen::MatrixXd& X, const std::vector<int>& labels) override;
  double validation_error() override;
  const Mlp& net() const { return net_; }

 private:
  Mlp net_;
  Eigen::MatrixXd Xv_;
  std::vector<int> yv_;
  double lr_;
  size_t passes_;
  std::mt19937_64 rng_;
};

// Error rate of the Fixed16 reference network on the columns of X.
double fixed_error_rate(const ModelDescriptor& m, const Eigen::MatrixXd& X, const std::vector<int>& y);

// ---- synthetic data and CSV ----

struct Dataset {
  Eigen::MatrixXd X;  // m x N
  std::vector<int> y;
};
// rank-r data in R^m plus gaussian noise; labels from the sign of the first latent factor
Dataset synthetic_low_rank(size_t m, size_t N, size_t rank, double noise, uint64_t seed);
// two gaussian classes in R^dim with means +-mu
Dataset synthetic_two_class(size_t dim, size_t N, uint64_t seed);

// Rows are samples. Returns m x N.
Eigen::MatrixXd read_csv_samples(const std::string& path);
void write_csv_samples(const Eigen::MatrixXd& X, const std::string& path);
std::vector<int> read_csv_labels(const std::string& path);
void write_csv_labels(const std::vector<int>& y, const std::string& path);

std::string projection_to_json(const ProjectionModel& p, const ProjectionConfig& cfg);
ProjectionModel projection_from_json(const std::string& text);

}  // namespace gcinfer
