#include "nqsite/nqs_model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "nqsite/reduction.hpp"

namespace nqsite {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>;
using ConstMapRM = Eigen::Map<const RowMat>;
using MapRM = Eigen::Map<RowMat>;
using ConstMapVec = Eigen::Map<const Eigen::VectorXd>;
using MapVec = Eigen::Map<Eigen::VectorXd>;

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

// value and derivative of the hidden activation
inline void activate(Activation kind, double x, double& value,
                     double& deriv) {
  switch (kind) {
    case Activation::gelu: {
      const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
      value = x * cdf;
      deriv = cdf + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
      break;
    }
    case Activation::tanh: {
      const double t = std::tanh(x);
      value = t;
      deriv = 1.0 - t * t;
      break;
    }
    case Activation::relu: {
      value = x > 0.0 ? x : 0.0;
      deriv = x > 0.0 ? 1.0 : 0.0;
      break;
    }
  }
}

}  // namespace

Activation activation_from_string(const std::string& name) {
  if (name == "gelu") return Activation::gelu;
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  throw std::invalid_argument("unknown activation '" + name +
                              "' (expected gelu, tanh or relu)");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::gelu: return "gelu";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
  }
  return "?";
}

void validate_architecture(const Architecture& arch) {
  if (arch.d_lat < 2) throw std::invalid_argument("d_lat must be >= 2");
  if (arch.n_sites() > 64)
    throw std::invalid_argument("more than 64 sites is not supported");
  if (arch.d_p < 1 || arch.d_lat % arch.d_p != 0)
    throw std::invalid_argument("d_p must divide d_lat");
  if (arch.d_enc < 1 || arch.width < 1 || arch.depth < 1)
    throw std::invalid_argument("d_enc, width and depth must be >= 1");
  if (!(arch.a_sat > 0.0))
    throw std::invalid_argument("a_sat must be positive");
}

std::size_t count_params(const Architecture& arch) {
  const std::size_t enc =
      (std::size_t)arch.d_enc * arch.patch_size() + arch.d_enc;
  const std::size_t first =
      (std::size_t)arch.in_dim() * arch.width + arch.width;
  const std::size_t rest = (std::size_t)(arch.depth - 1) *
                           ((std::size_t)arch.width * arch.width + arch.width);
  const std::size_t head = (std::size_t)2 * arch.width + 2;
  return enc + first + rest + head;
}

NqsNetwork::NqsNetwork(const Architecture& arch) : arch_(arch) {
  validate_architecture(arch);
  std::size_t off = 0;
  layout_.enc_w = off;
  off += (std::size_t)arch.d_enc * arch.patch_size();
  layout_.enc_b = off;
  off += (std::size_t)arch.d_enc;
  for (int l = 0; l < arch.depth; ++l) {
    const std::size_t in = l == 0 ? arch.in_dim() : arch.width;
    layout_.layer_w.push_back(off);
    off += (std::size_t)arch.width * in;
    layout_.layer_b.push_back(off);
    off += (std::size_t)arch.width;
  }
  layout_.head_w = off;
  off += (std::size_t)2 * arch.width;
  layout_.head_b = off;
  off += 2;
  layout_.total = off;
  params_ = Eigen::VectorXd::Zero((Eigen::Index)off);
}

void NqsNetwork::init_params(std::uint64_t seed) {
  CounterRng rng(seed, kStreamParamInit);
  params_.setZero();
  auto draw_block = [&](std::size_t offset, std::size_t count, int fan_in,
                        int fan_out) {
    const double bound = std::sqrt(6.0 / (double)(fan_in + fan_out));
    for (std::size_t i = 0; i < count; ++i)
      params_[(Eigen::Index)(offset + i)] =
          (2.0 * rng.next_double() - 1.0) * bound;
  };
  draw_block(layout_.enc_w, (std::size_t)arch_.d_enc * arch_.patch_size(),
             arch_.patch_size(), arch_.d_enc);
  for (int l = 0; l < arch_.depth; ++l) {
    const int in = l == 0 ? arch_.in_dim() : arch_.width;
    draw_block(layout_.layer_w[(std::size_t)l],
               (std::size_t)arch_.width * in, in, arch_.width);
  }
  draw_block(layout_.head_w, (std::size_t)2 * arch_.width, arch_.width, 2);
}

void NqsNetwork::build_input(std::span<const SpinConfig> configs,
                             Eigen::MatrixXd& patches) const {
  const int np = arch_.n_patches();
  const int ppr = arch_.patches_per_row();
  patches.resize(arch_.patch_size(), (Eigen::Index)configs.size() * np);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < (std::ptrdiff_t)configs.size(); ++s) {
    const SpinConfig c = configs[(std::size_t)s];
    for (int p = 0; p < np; ++p) {
      const int pr = p / ppr;
      const int pc = p % ppr;
      int k = 0;
      for (int dy = 0; dy < arch_.d_p; ++dy) {
        for (int dx = 0; dx < arch_.d_p; ++dx) {
          const int site =
              (pr * arch_.d_p + dy) * arch_.d_lat + pc * arch_.d_p + dx;
          // spin up -> -1, spin down -> +1
          patches(k++, s * np + p) = c.up(site) ? -1.0 : 1.0;
        }
      }
    }
  }
}

void NqsNetwork::forward(std::span<const SpinConfig> configs,
                         std::span<PsiValue> out, ForwardWorkspace* ws) const {
  if (configs.size() != out.size())
    throw std::invalid_argument("forward: output size mismatch");
  const Eigen::Index n = (Eigen::Index)configs.size();
  if (n == 0) return;
  for (const SpinConfig& c : configs)
    if (c.n_sites != arch_.n_sites())
      throw std::invalid_argument("configuration size does not match network");

  const int np = arch_.n_patches();
  const int psz = arch_.patch_size();
  const int width = arch_.width;
  const int depth = arch_.depth;
  const int in_dim = arch_.in_dim();

  ConstMapRM enc_w(params_.data() + layout_.enc_w, arch_.d_enc, psz);
  ConstMapVec enc_b(params_.data() + layout_.enc_b, arch_.d_enc);
  ConstMapRM head_w(params_.data() + layout_.head_w, 2, width);
  ConstMapVec head_b(params_.data() + layout_.head_b, 2);

  if (ws != nullptr) {
    ws->n = n;
    build_input(configs, ws->patches);
    ws->enc.resize(in_dim, n);
    ws->pre.resize((std::size_t)depth);
    ws->act.resize((std::size_t)depth);
    ws->act_deriv.resize((std::size_t)depth);
    for (int l = 0; l < depth; ++l) {
      ws->pre[(std::size_t)l].resize(width, n);
      ws->act[(std::size_t)l].resize(width, n);
      ws->act_deriv[(std::size_t)l].resize(width, n);
    }
    ws->head_pre.resize(2, n);
    ws->tanh_amp.resize(n);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t s = 0; s < n; ++s) {
      for (int p = 0; p < np; ++p) {
        ws->enc.col(s).segment((Eigen::Index)p * arch_.d_enc, arch_.d_enc)
            .noalias() = enc_w * ws->patches.col(s * np + p);
        ws->enc.col(s).segment((Eigen::Index)p * arch_.d_enc, arch_.d_enc) +=
            enc_b;
      }
      for (int l = 0; l < depth; ++l) {
        const int in = l == 0 ? in_dim : width;
        ConstMapRM W(params_.data() + layout_.layer_w[(std::size_t)l], width,
                     in);
        ConstMapVec b(params_.data() + layout_.layer_b[(std::size_t)l], width);
        auto below = l == 0 ? ws->enc.col(s) : ws->act[(std::size_t)l - 1].col(s);
        ws->pre[(std::size_t)l].col(s).noalias() = W * below;
        ws->pre[(std::size_t)l].col(s) += b;
        for (int i = 0; i < width; ++i)
          activate(arch_.activation, ws->pre[(std::size_t)l](i, s),
                   ws->act[(std::size_t)l](i, s),
                   ws->act_deriv[(std::size_t)l](i, s));
      }
      ws->head_pre.col(s).noalias() =
          head_w * ws->act[(std::size_t)depth - 1].col(s);
      ws->head_pre.col(s) += head_b;
      const double t = std::tanh(ws->head_pre(0, s) / arch_.a_sat);
      ws->tanh_amp[s] = t;
      out[(std::size_t)s] = {arch_.a_sat * t, ws->head_pre(1, s)};
    }
    return;
  }

  // Evaluation-only path: per-thread scratch, nothing retained.
  const std::ptrdiff_t n_blocks = (std::ptrdiff_t)reduction_block_count(
      (std::size_t)n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t blk = 0; blk < n_blocks; ++blk) {
    Eigen::VectorXd patch((Eigen::Index)psz), embed(in_dim);
    Eigen::VectorXd cur(width), nxt(width);
    Eigen::Vector2d head;
    const std::ptrdiff_t s0 = blk * (std::ptrdiff_t)kReductionBlock;
    const std::ptrdiff_t s1 =
        std::min<std::ptrdiff_t>(n, s0 + (std::ptrdiff_t)kReductionBlock);
    for (std::ptrdiff_t s = s0; s < s1; ++s) {
      const SpinConfig c = configs[(std::size_t)s];
      const int ppr = arch_.patches_per_row();
      for (int p = 0; p < np; ++p) {
        const int pr = p / ppr;
        const int pc = p % ppr;
        int k = 0;
        for (int dy = 0; dy < arch_.d_p; ++dy)
          for (int dx = 0; dx < arch_.d_p; ++dx) {
            const int site =
                (pr * arch_.d_p + dy) * arch_.d_lat + pc * arch_.d_p + dx;
            patch[k++] = c.up(site) ? -1.0 : 1.0;
          }
        embed.segment((Eigen::Index)p * arch_.d_enc, arch_.d_enc).noalias() =
            enc_w * patch;
        embed.segment((Eigen::Index)p * arch_.d_enc, arch_.d_enc) += enc_b;
      }
      const Eigen::VectorXd* below = &embed;
      for (int l = 0; l < depth; ++l) {
        const int in = l == 0 ? in_dim : width;
        ConstMapRM W(params_.data() + layout_.layer_w[(std::size_t)l], width,
                     in);
        ConstMapVec b(params_.data() + layout_.layer_b[(std::size_t)l], width);
        nxt.noalias() = W * *below;
        nxt += b;
        double unused;
        for (int i = 0; i < width; ++i) activate(arch_.activation, nxt[i],
                                                 cur[i], unused);
        below = &cur;
      }
      head.noalias() = head_w * *below;
      head += head_b;
      const double t = std::tanh(head[0] / arch_.a_sat);
      out[(std::size_t)s] = {arch_.a_sat * t, head[1]};
    }
  }
}

PsiValue NqsNetwork::psi(SpinConfig s) const {
  PsiValue v;
  forward(std::span<const SpinConfig>(&s, 1), std::span<PsiValue>(&v, 1),
          nullptr);
  return v;
}

void NqsNetwork::psi_batch(std::span<const SpinConfig> configs,
                           std::span<PsiValue> out) const {
  forward(configs, out, nullptr);
}

Eigen::VectorXd NqsNetwork::backward(const ForwardWorkspace& ws,
                                     const Eigen::Matrix2Xd& adjoint) const {
  const Eigen::Index n = ws.n;
  if (adjoint.cols() != n)
    throw std::invalid_argument("backward: adjoint size mismatch");
  const Eigen::Index P = (Eigen::Index)layout_.total;
  if (n == 0) return Eigen::VectorXd::Zero(P);

  const int np = arch_.n_patches();
  const int psz = arch_.patch_size();
  const int width = arch_.width;
  const int depth = arch_.depth;
  const int in_dim = arch_.in_dim();

  ConstMapRM head_w(params_.data() + layout_.head_w, 2, width);

  const std::ptrdiff_t n_blocks =
      (std::ptrdiff_t)reduction_block_count((std::size_t)n);
  Eigen::MatrixXd partials = Eigen::MatrixXd::Zero(P, n_blocks);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t blk = 0; blk < n_blocks; ++blk) {
    const Eigen::Index s0 = (Eigen::Index)blk * (Eigen::Index)kReductionBlock;
    const Eigen::Index bs =
        std::min<Eigen::Index>(n - s0, (Eigen::Index)kReductionBlock);
    double* base = partials.data() + (std::size_t)blk * (std::size_t)P;

    MapRM g_enc_w(base + layout_.enc_w, arch_.d_enc, psz);
    MapVec g_enc_b(base + layout_.enc_b, arch_.d_enc);
    MapRM g_head_w(base + layout_.head_w, 2, width);
    MapVec g_head_b(base + layout_.head_b, 2);

    // head: undo the amplitude saturation, then the linear head
    Eigen::MatrixXd dpre_h(2, bs);
    dpre_h.row(0) = adjoint.row(0).segment(s0, bs).cwiseProduct(
        (1.0 - ws.tanh_amp.segment(s0, bs).array().square()).matrix()
            .transpose());
    dpre_h.row(1) = adjoint.row(1).segment(s0, bs);

    g_head_w.noalias() +=
        dpre_h * ws.act[(std::size_t)depth - 1].middleCols(s0, bs).transpose();
    g_head_b += dpre_h.rowwise().sum();

    Eigen::MatrixXd dact = head_w.transpose() * dpre_h;  // width x bs
    Eigen::MatrixXd dpre(width, bs);
    Eigen::MatrixXd denc(in_dim, bs);
    for (int l = depth - 1; l >= 0; --l) {
      dpre = dact.cwiseProduct(ws.act_deriv[(std::size_t)l].middleCols(s0, bs));
      const int in = l == 0 ? in_dim : width;
      MapRM g_w(base + layout_.layer_w[(std::size_t)l], width, in);
      MapVec g_b(base + layout_.layer_b[(std::size_t)l], width);
      const auto& below =
          l == 0 ? ws.enc : ws.act[(std::size_t)l - 1];
      g_w.noalias() += dpre * below.middleCols(s0, bs).transpose();
      g_b += dpre.rowwise().sum();
      ConstMapRM W(params_.data() + layout_.layer_w[(std::size_t)l], width,
                   in);
      if (l > 0)
        dact = W.transpose() * dpre;
      else
        denc.noalias() = W.transpose() * dpre;
    }

    // encoder: the concatenated embedding gradient, reshaped to one column
    // per (sample, patch), against the raw patch values
    Eigen::Map<const Eigen::MatrixXd> denc_flat(denc.data(), arch_.d_enc,
                                                (Eigen::Index)np * bs);
    g_enc_w.noalias() +=
        denc_flat * ws.patches.middleCols(s0 * np, bs * np).transpose();
    g_enc_b += denc_flat.rowwise().sum();
  }

  // pairwise combine of the per-block partials
  for (std::ptrdiff_t gap = 1; gap < n_blocks; gap *= 2)
    for (std::ptrdiff_t i = 0; i + gap < n_blocks; i += 2 * gap)
      partials.col(i) += partials.col(i + gap);
  return partials.col(0);
}

void NqsNetwork::log_psi_grad(SpinConfig s, Eigen::VectorXd& d_log_rho,
                              Eigen::VectorXd& d_phi) const {
  ForwardWorkspace ws;
  PsiValue v;
  forward(std::span<const SpinConfig>(&s, 1), std::span<PsiValue>(&v, 1), &ws);
  Eigen::Matrix2Xd adj(2, 1);
  adj << 1.0, 0.0;
  d_log_rho = backward(ws, adj);
  adj << 0.0, 1.0;
  d_phi = backward(ws, adj);
}

}  // namespace nqsite
