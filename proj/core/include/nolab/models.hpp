#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "nolab/ops.hpp"
#include "nolab/storage.hpp"
#include "nolab/tensor.hpp"

namespace nolab::models {

enum class Arch { fno, fno3x3, fno_full, deeponet, t1, cno, gt };

const char* arch_name(Arch arch);
Arch parse_arch(const std::string& name);  // fno, fno3x3, fno-full, deeponet, t1, cno, gt

enum class Activation { gelu, relu, identity };
const char* activation_name(Activation a);
Activation parse_activation(const std::string& name);

enum class AttnNorm { standardize, none };

struct ModelConfig {
  Arch arch = Arch::fno;
  std::size_t grid = 64;  // input resolution the model is built for
  std::size_t width = 16;
  std::size_t depth = 4;
  std::size_t modes = 12;         // per axis; forced to grid/2 for fno-full
  std::size_t local_kernel = 0;   // 0 = none; 3 for fno3x3
  ops::Padding local_padding = ops::Padding::zero;
  std::size_t proj_width = 32;    // hidden width of the projection head
  Activation activation = Activation::gelu;
  bool coord_features = true;
  // DeepONet
  std::vector<std::size_t> branch_layers{64};
  std::vector<std::size_t> trunk_layers{64, 64};
  std::size_t basis = 32;  // p
  bool branch_bias = true;
  // Galerkin transformer
  std::size_t attn_dim = 16;
  AttnNorm attn_norm = AttnNorm::standardize;
  // CNO
  std::size_t levels = 2;
  DType dtype = DType::f32;
  std::uint64_t seed = 0;

  // Fills architecture-implied fields (fno3x3 kernel, fno-full modes) and
  // checks invariants.
  ModelConfig resolved() const;
  void validate() const;
  storage::json to_json() const;
  static ModelConfig from_json(const storage::json& j);
};

struct Param {
  std::string name;
  Tensor value;
};

struct ModelState {
  ModelConfig config;
  std::vector<Param> params;

  const Tensor& param(const std::string& name) const;
  Tensor& param(const std::string& name);
  bool has(const std::string& name) const;
  std::size_t param_count() const;
  std::vector<Tensor> tensors() const;
  // Deep copy with fresh leaves (grad tracking preserved).
  ModelState clone() const;
};

std::size_t param_count(const ModelState& state);

// Copy with every parameter and the compute dtype converted. Widening an
// f32 state to f64 is exact.
ModelState with_dtype(const ModelState& state, DType dtype);

/// Deterministic initialization. Each parameter draws from its own generator
/// seeded by (config.seed, name), so variants that share parameter names
/// share values: fno3x3 holds exactly fno's weights plus its local kernels.
ModelState init_model(const ModelConfig& config);

/// a: [B, N, N] -> u: [B, N, N] for every grid-based architecture.
Tensor forward(const ModelState& state, const Tensor& a);

Tensor fno_forward(const ModelState& state, const Tensor& a);
Tensor t1_forward(const ModelState& state, const Tensor& a);
Tensor cno_lite_forward(const ModelState& state, const Tensor& a);
Tensor gt_forward(const ModelState& state, const Tensor& a);

/// DeepONet: a [B, S] input samples, coords [P, 2] in [0,1]^2 -> [B, P].
Tensor deeponet_forward(const ModelState& state, const Tensor& a, const Tensor& coords);
// Branch coefficients [B, p] and trunk basis [P, p].
Tensor deeponet_branch(const ModelState& state, const Tensor& a);
Tensor deeponet_trunk(const ModelState& state, const Tensor& coords);

/// q, k, v: [N, d] or [B, N, d]. Returns q (norm(k)^T norm(v)) / N, with norm
/// the per-column standardization (or identity for AttnNorm::none).
Tensor galerkin_attention(const Tensor& q, const Tensor& k, const Tensor& v, AttnNorm norm = AttnNorm::standardize,
                          double eps = 1e-5);

// Anti-aliased pointwise activation: resample to 2x, apply, resample back.
Tensor antialiased(const Tensor& x, Activation act);
Tensor activate(const Tensor& x, Activation act);

// Retained spectral layout (rows, cols) for `modes` per axis on an n-grid.
std::pair<std::size_t, std::size_t> spectral_layout(std::size_t n, std::size_t modes);

// Grid coordinates m/(n-1) as two [n, n] planes (x along rows, y along columns).
std::pair<Tensor, Tensor> coordinate_planes(std::size_t n, DType dtype);

/// Any operator mapping [B, N, N] -> [B, N, N]; used by the ERF and audit
/// code so test models and learned models share one interface.
using FieldOperator = std::function<Tensor(const Tensor&)>;
FieldOperator as_operator(const ModelState& state);

// Checkpoints: metadata carries "model" (config) plus caller-supplied fields.
void save_checkpoint(const ModelState& state, const std::filesystem::path& path, storage::json extra = {});
struct LoadedCheckpoint {
  ModelState state;
  storage::json metadata;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);
// Rejects a checkpoint whose declared model config differs from `expected`.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);
ModelState state_from_checkpoint(const storage::CheckpointFile& file);

}  // namespace nolab::models
