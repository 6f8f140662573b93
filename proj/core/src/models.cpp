#include "nolab/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace nolab::models {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::mt19937_64 param_rng(std::uint64_t seed, const std::string& name) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(fnv1a(name)), static_cast<std::uint32_t>(fnv1a(name) >> 32)};
  return std::mt19937_64(seq);
}

class Builder {
 public:
  explicit Builder(ModelState& s) : s_(s) {}

  // Kaiming-style fan-in scaling: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  void uniform_fan_in(const std::string& name, Shape shape, std::size_t fan_in) {
    auto rng = param_rng(s_.config.seed, name);
    const double b = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-b, b);
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = u(rng);
    add(name, std::move(shape), std::move(v));
  }
  // Complex per-mode weights: U[0,1) / (in * out) in both parts.
  void spectral(const std::string& name, std::size_t ci, std::size_t co, std::size_t r, std::size_t c) {
    auto rng = param_rng(s_.config.seed, name);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double scale = 1.0 / static_cast<double>(ci * co);
    Shape shape{ci, co, r, c, 2};
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = scale * u(rng);
    add(name, std::move(shape), std::move(v));
  }
  void zeros(const std::string& name, Shape shape) {
    auto n = shape_numel(shape);
    add(name, std::move(shape), std::vector<double>(n, 0.0));
  }
  void conv(const std::string& prefix, std::size_t co, std::size_t ci, std::size_t k, bool bias = true) {
    uniform_fan_in(prefix + ".w", {co, ci, k, k}, ci * k * k);
    if (bias) uniform_fan_in(prefix + ".b", {co}, ci * k * k);
  }
  void dense(const std::string& prefix, std::size_t in, std::size_t out, bool bias = true) {
    uniform_fan_in(prefix + ".w", {in, out}, in);
    if (bias) uniform_fan_in(prefix + ".b", {out}, in);
  }

 private:
  void add(const std::string& name, Shape shape, std::vector<double> v) {
    auto t = Tensor::from(std::move(shape), std::move(v), s_.config.dtype);
    t.set_requires_grad(true);
    s_.params.push_back({name, t});
  }
  ModelState& s_;
};

std::size_t input_channels(const ModelConfig& c) { return c.coord_features ? 3 : 1; }

std::string layer(const char* stem, std::size_t l) { return std::string(stem) + std::to_string(l); }

// [B, N, N] -> [B, C, N, N] with optional coordinate channels.
Tensor with_channels(const Tensor& a, bool coords) {
  if (a.dim() != 3 || a.extent(1) != a.extent(2))
    throw ShapeError("model input must be [B, N, N], got " + shape_str(a.shape()));
  const std::size_t b = a.extent(0), n = a.extent(1);
  Tensor x = ops::reshape(a, {b, 1, n, n});
  if (!coords) return x;
  auto [cx, cy] = coordinate_planes(n, a.dtype());
  std::vector<double> vx, vy;
  for (std::size_t i = 0; i < b; ++i) {
    vx.insert(vx.end(), cx.values().begin(), cx.values().end());
    vy.insert(vy.end(), cy.values().begin(), cy.values().end());
  }
  return ops::concat({x, Tensor::from({b, 1, n, n}, std::move(vx), a.dtype()),
                      Tensor::from({b, 1, n, n}, std::move(vy), a.dtype())},
                     1);
}

Tensor conv_bias(const ModelState& s, const Tensor& x, const std::string& prefix, ops::Padding pad = ops::Padding::zero) {
  return ops::conv2d(x, s.param(prefix + ".w"), s.param(prefix + ".b"), pad);
}

// x [..., in] -> [..., out]
Tensor dense(const ModelState& s, const Tensor& x, const std::string& prefix, bool bias = true) {
  const Tensor& w = s.param(prefix + ".w");
  const std::size_t in = w.extent(0), out = w.extent(1);
  Shape shape = x.shape();
  if (shape.empty() || shape.back() != in)
    throw ShapeError("dense '" + prefix + "': input " + shape_str(shape) + " does not end in " + std::to_string(in));
  const std::size_t rows = x.numel() / in;
  Tensor y = ops::matmul(ops::reshape(x, {rows, in}), w);
  if (bias) y = ops::bias_add(y, s.param(prefix + ".b"), 1);
  shape.back() = out;
  return ops::reshape(y, shape);
}

void check_grid(const ModelConfig& c, const Tensor& a) {
  if (a.dim() == 3 && a.extent(1) != c.grid)
    throw ShapeError("model built for grid " + std::to_string(c.grid) + " received grid " + std::to_string(a.extent(1)));
}

}  // namespace

const char* arch_name(Arch arch) {
  switch (arch) {
    case Arch::fno: return "fno";
    case Arch::fno3x3: return "fno3x3";
    case Arch::fno_full: return "fno-full";
    case Arch::deeponet: return "deeponet";
    case Arch::t1: return "t1";
    case Arch::cno: return "cno";
    case Arch::gt: return "gt";
  }
  return "?";
}

Arch parse_arch(const std::string& name) {
  for (Arch a : {Arch::fno, Arch::fno3x3, Arch::fno_full, Arch::deeponet, Arch::t1, Arch::cno, Arch::gt})
    if (name == arch_name(a)) return a;
  if (name == "fno_full") return Arch::fno_full;
  throw ConfigError("unknown model '" + name + "' (expected fno, fno3x3, fno-full, deeponet, t1, cno, gt)");
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::gelu: return "gelu";
    case Activation::relu: return "relu";
    case Activation::identity: return "identity";
  }
  return "?";
}

Activation parse_activation(const std::string& name) {
  for (Activation a : {Activation::gelu, Activation::relu, Activation::identity})
    if (name == activation_name(a)) return a;
  throw ConfigError("unknown activation '" + name + "'");
}

ModelConfig ModelConfig::resolved() const {
  ModelConfig c = *this;
  if (c.arch == Arch::fno3x3 && c.local_kernel == 0) c.local_kernel = 3;
  if (c.arch == Arch::fno_full) c.modes = c.grid / 2;
  c.validate();
  return c;
}

void ModelConfig::validate() const {
  if (grid < 8) throw ConfigError("model grid must be >= 8");
  if (width == 0) throw ConfigError("model width must be positive");
  if (modes == 0 || modes > grid / 2)
    throw ConfigError("retained modes " + std::to_string(modes) + " exceed the Nyquist limit " + std::to_string(grid / 2));
  if (local_kernel != 0 && local_kernel % 2 == 0) throw ConfigError("local kernel extent must be odd or 0");
  if (basis == 0) throw ConfigError("deeponet basis count p must be >= 1");
  if (arch == Arch::cno) {
    const std::size_t f = std::size_t{1} << levels;
    if (grid % f != 0 || (grid / f) % 2 != 0)
      throw ConfigError("cno grid " + std::to_string(grid) + " is not divisible by 2^" + std::to_string(levels) +
                        " with an even coarsest level");
  }
}

storage::json ModelConfig::to_json() const {
  return {{"arch", arch_name(arch)},
          {"grid", grid},
          {"width", width},
          {"depth", depth},
          {"modes", modes},
          {"local_kernel", local_kernel},
          {"local_padding", local_padding == ops::Padding::zero ? "zero" : "circular"},
          {"proj_width", proj_width},
          {"activation", activation_name(activation)},
          {"coord_features", coord_features},
          {"branch_layers", branch_layers},
          {"trunk_layers", trunk_layers},
          {"basis", basis},
          {"branch_bias", branch_bias},
          {"attn_dim", attn_dim},
          {"attn_norm", attn_norm == AttnNorm::standardize ? "standardize" : "none"},
          {"levels", levels},
          {"dtype", dtype_name(dtype)},
          {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const storage::json& j) {
  ModelConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  if (j.contains("arch")) c.arch = parse_arch(j.at("arch").get<std::string>());
  get("grid", c.grid);
  get("width", c.width);
  get("depth", c.depth);
  get("modes", c.modes);
  get("local_kernel", c.local_kernel);
  if (j.contains("local_padding"))
    c.local_padding = j.at("local_padding") == "circular" ? ops::Padding::circular : ops::Padding::zero;
  get("proj_width", c.proj_width);
  if (j.contains("activation")) c.activation = parse_activation(j.at("activation").get<std::string>());
  get("coord_features", c.coord_features);
  get("branch_layers", c.branch_layers);
  get("trunk_layers", c.trunk_layers);
  get("basis", c.basis);
  get("branch_bias", c.branch_bias);
  get("attn_dim", c.attn_dim);
  if (j.contains("attn_norm")) c.attn_norm = j.at("attn_norm") == "none" ? AttnNorm::none : AttnNorm::standardize;
  get("levels", c.levels);
  if (j.contains("dtype")) {
    const auto d = j.at("dtype").get<std::string>();
    if (d != "float32" && d != "float64") throw ConfigError("unknown dtype '" + d + "'");
    c.dtype = d == "float32" ? DType::f32 : DType::f64;
  }
  get("seed", c.seed);
  return c;
}

const Tensor& ModelState::param(const std::string& name) const {
  for (const auto& p : params)
    if (p.name == name) return p.value;
  throw ConfigError("model has no parameter '" + name + "'");
}

Tensor& ModelState::param(const std::string& name) {
  for (auto& p : params)
    if (p.name == name) return p.value;
  throw ConfigError("model has no parameter '" + name + "'");
}

bool ModelState::has(const std::string& name) const {
  return std::any_of(params.begin(), params.end(), [&](const Param& p) { return p.name == name; });
}

std::size_t ModelState::param_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.numel();
  return n;
}

std::vector<Tensor> ModelState::tensors() const {
  std::vector<Tensor> out;
  for (const auto& p : params) out.push_back(p.value);
  return out;
}

ModelState ModelState::clone() const {
  ModelState s;
  s.config = config;
  for (const auto& p : params) {
    auto t = p.value.detach();
    if (p.value.requires_grad()) t.set_requires_grad(true);
    s.params.push_back({p.name, t});
  }
  return s;
}

std::size_t param_count(const ModelState& state) { return state.param_count(); }

ModelState with_dtype(const ModelState& state, DType dtype) {
  ModelState s;
  s.config = state.config;
  s.config.dtype = dtype;
  for (const auto& p : state.params) {
    auto t = p.value.detach().to(dtype);
    if (p.value.requires_grad()) t.set_requires_grad(true);
    s.params.push_back({p.name, t});
  }
  return s;
}

std::pair<std::size_t, std::size_t> spectral_layout(std::size_t n, std::size_t modes) {
  return {2 * modes >= n ? n : 2 * modes, modes >= n / 2 ? n / 2 + 1 : modes};
}

std::pair<Tensor, Tensor> coordinate_planes(std::size_t n, DType dtype) {
  std::vector<double> x(n * n), y(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      x[i * n + j] = static_cast<double>(i) / static_cast<double>(n - 1);
      y[i * n + j] = static_cast<double>(j) / static_cast<double>(n - 1);
    }
  return {Tensor::from({n, n}, std::move(x), dtype), Tensor::from({n, n}, std::move(y), dtype)};
}

ModelState init_model(const ModelConfig& config) {
  ModelState s;
  s.config = config.resolved();
  const auto& c = s.config;
  Builder b(s);
  const std::size_t cin = input_channels(c), w = c.width;
  switch (c.arch) {
    case Arch::fno:
    case Arch::fno3x3:
    case Arch::fno_full: {
      const auto [r, cc] = spectral_layout(c.grid, c.modes);
      b.conv("lift", w, cin, 1);
      for (std::size_t l = 0; l < c.depth; ++l) {
        b.spectral(layer("layer", l) + ".spectral", w, w, r, cc);
        b.conv(layer("layer", l) + ".pw", w, w, 1);
        if (c.local_kernel > 0) {
          // Local kernel starts random, its bias at zero.
          b.uniform_fan_in(layer("layer", l) + ".local.w", {w, w, c.local_kernel, c.local_kernel},
                           w * c.local_kernel * c.local_kernel);
          b.zeros(layer("layer", l) + ".local.b", {w});
        }
      }
      b.conv("proj1", c.proj_width, w, 1);
      b.conv("proj2", 1, c.proj_width, 1);
      break;
    }
    case Arch::t1: {
      const auto [r, cc] = spectral_layout(c.grid, c.modes);
      b.spectral("t1.lift", cin, w, r, cc);
      for (std::size_t l = 0; l < c.depth; ++l) {
        b.spectral(layer("t1.layer", l) + ".modes", w, w, r, cc);
        b.uniform_fan_in(layer("t1.layer", l) + ".mix.w", {w, w, 1, 1}, w);
      }
      b.spectral("t1.out", w, 1, r, cc);
      break;
    }
    case Arch::cno: {
      b.conv("cno.lift", w, cin, 3);
      for (std::size_t l = 0; l < c.levels; ++l) b.conv(layer("cno.enc", l), w, w, 3);
      b.conv("cno.mid", w, w, 3);
      for (std::size_t l = 0; l < c.levels; ++l) b.conv(layer("cno.dec", l), w, 2 * w, 3);
      b.conv("cno.proj", 1, w, 3);
      break;
    }
    case Arch::gt: {
      const std::size_t d = c.attn_dim;
      b.dense("gt.lift", cin, d);
      for (std::size_t l = 0; l < c.depth; ++l) {
        const auto p = layer("gt.block", l);
        b.dense(p + ".q", d, d, false);
        b.dense(p + ".k", d, d, false);
        b.dense(p + ".v", d, d, false);
        b.dense(p + ".o", d, d);
        b.dense(p + ".ff1", d, 2 * d);
        b.dense(p + ".ff2", 2 * d, d);
      }
      b.dense("gt.proj1", d, c.proj_width);
      b.dense("gt.proj2", c.proj_width, 1);
      break;
    }
    case Arch::deeponet: {
      std::size_t in = c.grid * c.grid;
      for (std::size_t l = 0; l < c.branch_layers.size(); ++l) {
        b.dense(layer("branch", l), in, c.branch_layers[l]);
        in = c.branch_layers[l];
      }
      b.dense("branch.out", in, c.basis, c.branch_bias);
      in = 2;
      for (std::size_t l = 0; l < c.trunk_layers.size(); ++l) {
        b.dense(layer("trunk", l), in, c.trunk_layers[l]);
        in = c.trunk_layers[l];
      }
      b.dense("trunk.out", in, c.basis);
      break;
    }
  }
  return s;
}

Tensor activate(const Tensor& x, Activation act) {
  switch (act) {
    case Activation::gelu: return ops::gelu(x);
    case Activation::relu: return ops::relu(x);
    case Activation::identity: return x;
  }
  return x;
}

Tensor antialiased(const Tensor& x, Activation act) {
  const std::size_t r = x.extent(x.dim() - 2), c = x.extent(x.dim() - 1);
  return ops::spectral_resample(activate(ops::spectral_resample(x, 2 * r, 2 * c), act), r, c);
}

Tensor fno_forward(const ModelState& s, const Tensor& a) {
  const auto& c = s.config;
  check_grid(c, a);
  const std::size_t n = a.extent(1), b = a.extent(0);
  Tensor v = conv_bias(s, with_channels(a.to(c.dtype), c.coord_features), "lift");
  for (std::size_t l = 0; l < c.depth; ++l) {
    const auto p = layer("layer", l);
    ComplexTensor w(s.param(p + ".spectral"));
    Tensor spec = ops::irfft2_modes(ops::mode_mix(ops::rfft2_modes(v, c.modes, c.modes), w), n, n);
    Tensor z = ops::add(spec, conv_bias(s, v, p + ".pw"));
    if (c.local_kernel > 0) z = ops::add(z, conv_bias(s, v, p + ".local", c.local_padding));
    v = l + 1 < c.depth ? activate(z, c.activation) : z;
  }
  Tensor h = activate(conv_bias(s, v, "proj1"), c.activation);
  return ops::reshape(conv_bias(s, h, "proj2"), {b, n, n});
}

Tensor t1_forward(const ModelState& s, const Tensor& a) {
  const auto& c = s.config;
  check_grid(c, a);
  const std::size_t n = a.extent(1), b = a.extent(0);
  ComplexTensor z = ops::mode_mix(ops::rfft2_modes(with_channels(a.to(c.dtype), c.coord_features), c.modes, c.modes),
                                  ComplexTensor(s.param("t1.lift")));
  for (std::size_t l = 0; l < c.depth; ++l) {
    const auto p = layer("t1.layer", l);
    const Shape zs = z.interleaved().shape();  // [B, w, R, C, 2]
    ComplexTensor per_mode = ops::mode_mix(z, ComplexTensor(s.param(p + ".modes")));
    // Dense channel mixing shared by all modes, acting on re and im alike.
    Tensor flat = ops::reshape(z.interleaved(), {zs[0], zs[1], zs[2], zs[3] * 2});
    Tensor mixed = ops::reshape(ops::conv2d(flat, s.param(p + ".mix.w"), ops::Padding::zero), zs);
    z = ComplexTensor(activate(ops::add(per_mode.interleaved(), mixed), c.activation));
  }
  z = ops::mode_mix(z, ComplexTensor(s.param("t1.out")));
  return ops::reshape(ops::irfft2_modes(z, n, n), {b, n, n});
}

Tensor cno_lite_forward(const ModelState& s, const Tensor& a) {
  const auto& c = s.config;
  check_grid(c, a);
  const std::size_t n = a.extent(1), b = a.extent(0);
  const auto pad = ops::Padding::circular;
  auto block = [&](const Tensor& x, const std::string& p) { return antialiased(conv_bias(s, x, p, pad), c.activation); };
  Tensor h = block(with_channels(a.to(c.dtype), c.coord_features), "cno.lift");
  std::vector<Tensor> skips;
  std::size_t size = n;
  for (std::size_t l = 0; l < c.levels; ++l) {
    h = block(h, layer("cno.enc", l));
    skips.push_back(h);
    size /= 2;
    h = ops::spectral_resample(h, size, size);
  }
  h = block(h, "cno.mid");
  for (std::size_t l = c.levels; l-- > 0;) {
    size *= 2;
    h = ops::spectral_resample(h, size, size);
    h = block(ops::concat({h, skips[l]}, 1), layer("cno.dec", l));
  }
  return ops::reshape(conv_bias(s, h, "cno.proj", pad), {b, n, n});
}

Tensor galerkin_attention(const Tensor& q, const Tensor& k, const Tensor& v, AttnNorm norm, double eps) {
  if (q.dim() == 2) {
    auto lift = [](const Tensor& t) { return ops::reshape(t, {1, t.extent(0), t.extent(1)}); };
    Tensor out = galerkin_attention(lift(q), lift(k), lift(v), norm, eps);
    return ops::reshape(out, q.shape());
  }
  if (q.dim() != 3 || k.shape() != q.shape() || v.dim() != 3 || v.extent(0) != q.extent(0) ||
      v.extent(1) != q.extent(1))
    throw ShapeError("galerkin_attention: q " + shape_str(q.shape()) + ", k " + shape_str(k.shape()) + ", v " +
                     shape_str(v.shape()) + " are incompatible");
  const std::size_t n = q.extent(1);
  auto standardize = [&](const Tensor& x) {
    if (norm == AttnNorm::none) return x;
    Tensor centered = ops::sub(x, ops::expand_axis(ops::mean_axis(x, 1), 1, n));
    Tensor var = ops::mean_axis(ops::mul(centered, centered), 1);
    return ops::div(centered, ops::expand_axis(ops::pow(ops::add_scalar(var, eps), 0.5), 1, n));
  };
  Tensor ktv = ops::matmul(ops::permute(standardize(k), {0, 2, 1}), standardize(v));
  return ops::scale(ops::matmul(q, ktv), 1.0 / static_cast<double>(n));
}

Tensor gt_forward(const ModelState& s, const Tensor& a) {
  const auto& c = s.config;
  check_grid(c, a);
  const std::size_t n = a.extent(1), b = a.extent(0);
  Tensor x = with_channels(a.to(c.dtype), c.coord_features);  // [B, C, N, N]
  const std::size_t cin = x.extent(1);
  Tensor h = dense(s, ops::permute(ops::reshape(x, {b, cin, n * n}), {0, 2, 1}), "gt.lift");
  for (std::size_t l = 0; l < c.depth; ++l) {
    const auto p = layer("gt.block", l);
    Tensor att = galerkin_attention(dense(s, h, p + ".q", false), dense(s, h, p + ".k", false),
                                    dense(s, h, p + ".v", false), c.attn_norm);
    h = ops::add(h, dense(s, att, p + ".o"));
    h = ops::add(h, dense(s, activate(dense(s, h, p + ".ff1"), c.activation), p + ".ff2"));
  }
  Tensor out = dense(s, activate(dense(s, h, "gt.proj1"), c.activation), "gt.proj2");
  return ops::reshape(out, {b, n, n});
}

Tensor deeponet_branch(const ModelState& s, const Tensor& a) {
  const auto& c = s.config;
  Tensor h = a.to(c.dtype);
  for (std::size_t l = 0; l < c.branch_layers.size(); ++l) h = activate(dense(s, h, layer("branch", l)), c.activation);
  return dense(s, h, "branch.out", c.branch_bias);
}

Tensor deeponet_trunk(const ModelState& s, const Tensor& coords) {
  const auto& c = s.config;
  if (coords.dim() != 2 || coords.extent(1) != 2) throw ShapeError("deeponet coords must be [P, 2]");
  for (double v : coords.values())
    if (v < 0.0 || v > 1.0) throw ConfigError("deeponet coordinate " + std::to_string(v) + " lies outside [0,1]^2");
  Tensor h = coords.to(c.dtype);
  for (std::size_t l = 0; l < c.trunk_layers.size(); ++l) h = activate(dense(s, h, layer("trunk", l)), c.activation);
  return activate(dense(s, h, "trunk.out"), c.activation);
}

Tensor deeponet_forward(const ModelState& s, const Tensor& a, const Tensor& coords) {
  if (a.dim() != 2) throw ShapeError("deeponet input must be [B, S]");
  return ops::matmul(deeponet_branch(s, a), ops::permute(deeponet_trunk(s, coords), {1, 0}));
}

Tensor forward(const ModelState& s, const Tensor& a) {
  switch (s.config.arch) {
    case Arch::fno:
    case Arch::fno3x3:
    case Arch::fno_full: return fno_forward(s, a);
    case Arch::t1: return t1_forward(s, a);
    case Arch::cno: return cno_lite_forward(s, a);
    case Arch::gt: return gt_forward(s, a);
    case Arch::deeponet: {
      check_grid(s.config, a);
      const std::size_t b = a.extent(0), n = a.extent(1);
      auto [cx, cy] = coordinate_planes(n, s.config.dtype);
      std::vector<double> pts;
      for (std::size_t i = 0; i < n * n; ++i) {
        pts.push_back(cx[i]);
        pts.push_back(cy[i]);
      }
      Tensor coords = Tensor::from({n * n, 2}, std::move(pts), s.config.dtype);
      return ops::reshape(deeponet_forward(s, ops::reshape(a, {b, n * n}), coords), {b, n, n});
    }
  }
  throw ConfigError("unknown architecture");
}

FieldOperator as_operator(const ModelState& state) {
  return [&state](const Tensor& a) { return forward(state, a); };
}

void save_checkpoint(const ModelState& state, const std::filesystem::path& path, storage::json extra) {
  storage::CheckpointFile f;
  f.metadata = extra.is_null() ? storage::json::object() : std::move(extra);
  f.metadata["format"] = "nolab-checkpoint";
  f.metadata["model"] = state.config.to_json();
  f.metadata["param_count"] = state.param_count();
  for (const auto& p : state.params) {
    storage::CheckpointBlock blk{p.name, p.value.shape(), {}};
    for (double v : p.value.values()) blk.values.push_back(static_cast<float>(v));
    f.blocks.push_back(std::move(blk));
  }
  storage::write_checkpoint_file(f, path);
}

ModelState state_from_checkpoint(const storage::CheckpointFile& file) {
  if (!file.metadata.contains("model")) throw FormatError("checkpoint metadata has no model config");
  ModelState s = init_model(ModelConfig::from_json(file.metadata.at("model")));
  if (file.blocks.size() != s.params.size())
    throw FormatError("checkpoint holds " + std::to_string(file.blocks.size()) + " parameter blocks, config expects " +
                      std::to_string(s.params.size()));
  for (auto& p : s.params) {
    auto it = std::find_if(file.blocks.begin(), file.blocks.end(),
                           [&](const storage::CheckpointBlock& b) { return b.name == p.name; });
    if (it == file.blocks.end()) throw FormatError("checkpoint is missing parameter block '" + p.name + "'");
    if (it->shape != p.value.shape())
      throw FormatError("parameter block '" + p.name + "' has shape " + shape_str(it->shape) + ", config expects " +
                        shape_str(p.value.shape()));
    auto dst = p.value.mutable_values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<double>(it->values[i]);
  }
  return s;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  auto f = storage::read_checkpoint_file(path);
  auto s = state_from_checkpoint(f);
  return {std::move(s), std::move(f.metadata)};
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  auto f = storage::read_checkpoint_file(path);
  if (!f.metadata.contains("model")) throw FormatError("checkpoint metadata has no model config");
  auto declared = ModelConfig::from_json(f.metadata.at("model")).resolved().to_json();
  auto want = expected.resolved().to_json();
  declared.erase("seed");
  want.erase("seed");
  if (declared != want)
    throw ConfigError("checkpoint model config " + declared.dump() + " does not match the requested " + want.dump());
  auto s = state_from_checkpoint(f);
  return {std::move(s), std::move(f.metadata)};
}

}  // namespace nolab::models
