#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nqsite/wavefunction.hpp"

namespace nqsite {

enum class Activation { gelu, tanh, relu };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

// Network shape.  The spin grid is cut into d_p x d_p patches, each patch
// is linearly embedded into d_enc features with shared weights, the
// embeddings are concatenated and fed through `depth` dense layers of size
// `width`, and a 2-unit head produces the log-amplitude (saturated through
// a_sat * tanh(x / a_sat)) and the phase.
struct Architecture {
  int d_lat = 6;
  int d_p = 2;
  int d_enc = 8;
  int width = 512;
  int depth = 4;
  double a_sat = 20.0;
  Activation activation = Activation::gelu;

  int n_sites() const { return d_lat * d_lat; }
  int patch_size() const { return d_p * d_p; }
  int patches_per_row() const { return d_lat / d_p; }
  int n_patches() const { return patches_per_row() * patches_per_row(); }
  int in_dim() const { return n_patches() * d_enc; }

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

// Throws std::invalid_argument on an inconsistent shape.
void validate_architecture(const Architecture& arch);

std::size_t count_params(const Architecture& arch);

// Per-batch activations kept for the reverse pass.  Matrices are
// column-per-sample; `patches` puts the p-th patch of sample s in column
// s * n_patches + p, which makes the concatenated embedding matrix an
// alias-free reshape of the per-patch one.
struct ForwardWorkspace {
  Eigen::Index n = 0;
  Eigen::MatrixXd patches;            // patch_size x (n_patches * n)
  Eigen::MatrixXd enc;                // in_dim x n
  std::vector<Eigen::MatrixXd> pre;   // width x n, one per dense layer
  std::vector<Eigen::MatrixXd> act;   // width x n
  std::vector<Eigen::MatrixXd> act_deriv;  // activation derivative at pre
  Eigen::MatrixXd head_pre;           // 2 x n
  Eigen::VectorXd tanh_amp;           // tanh(head_pre(0) / a_sat)
};

class NqsNetwork : public PsiFunction {
 public:
  explicit NqsNetwork(const Architecture& arch);

  const Architecture& arch() const { return arch_; }
  std::size_t n_params() const { return (std::size_t)params_.size(); }
  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  // Uniform fan-scaled weights (bound sqrt(6 / (fan_in + fan_out))), zero
  // biases, drawn in flat layout order from a dedicated stream of `seed`.
  void init_params(std::uint64_t seed);

  int n_sites() const override { return arch_.n_sites(); }
  PsiValue psi(SpinConfig s) const override;
  void psi_batch(std::span<const SpinConfig> configs,
                 std::span<PsiValue> out) const override;

  // Batched forward pass; pass a workspace to keep activations for
  // backward().  Each sample is processed independently (matrix-vector
  // products only), so results do not depend on batch composition.
  void forward(std::span<const SpinConfig> configs, std::span<PsiValue> out,
               ForwardWorkspace* ws) const;

  // Reverse pass: given d/d(log_rho) in adjoint row 0 and d/d(phi) in row 1
  // for every sample, returns sum_s adjoint-weighted parameter gradients.
  // Samples are reduced in fixed blocks combined pairwise, independent of
  // thread count.
  Eigen::VectorXd backward(const ForwardWorkspace& ws,
                           const Eigen::Matrix2Xd& adjoint) const;

  // Per-config gradients of log_rho and phi.
  void log_psi_grad(SpinConfig s, Eigen::VectorXd& d_log_rho,
                    Eigen::VectorXd& d_phi) const;

 private:
  struct Layout {
    std::size_t enc_w = 0, enc_b = 0;
    std::vector<std::size_t> layer_w, layer_b;
    std::size_t head_w = 0, head_b = 0;
    std::size_t total = 0;
  };

  void build_input(std::span<const SpinConfig> configs,
                   Eigen::MatrixXd& patches) const;

  Architecture arch_;
  Layout layout_;
  Eigen::VectorXd params_;
};

}  // namespace nqsite
