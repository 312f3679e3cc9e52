// SPDX-License-Identifier: Apache-2.0
#include "segzsl/networks.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "segzsl/checkpoint.hpp"
#include "segzsl/error.hpp"
#include "segzsl/rng.hpp"

namespace segzsl {

std::vector<Tensor*> EncoderParams::tensors() {
  return {&w1, &b1, &w2, &b2, &w_mean, &b_mean, &w_logvar, &b_logvar};
}
std::vector<const Tensor*> EncoderParams::tensors() const {
  return {&w1, &b1, &w2, &b2, &w_mean, &b_mean, &w_logvar, &b_logvar};
}
std::vector<Tensor*> GeneratorParams::tensors() {
  return {&w1, &b1, &w_mean, &b_mean, &w_logvar, &b_logvar};
}
std::vector<const Tensor*> GeneratorParams::tensors() const {
  return {&w1, &b1, &w_mean, &b_mean, &w_logvar, &b_logvar};
}
std::vector<Tensor*> RegressorParams::tensors() {
  return {&w1, &b1, &w_out, &b_out};
}
std::vector<const Tensor*> RegressorParams::tensors() const {
  return {&w1, &b1, &w_out, &b_out};
}

namespace {

Tensor init_weight(std::size_t fan_in, std::size_t fan_out, RngStream& rng) {
  const double bound =
      std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor w({fan_in, fan_out});
  rng.fill_uniform(w.data(), -bound, bound);
  return w;
}

void check_dims(const Dims& d) {
  if (d.feature_dim < 1 || d.attr_dim < 1 || d.latent_dim < 1 ||
      d.hidden < 1) {
    fail(Errc::invalid_argument,
         "init_params: all dims must be >= 1 (feature_dim=" +
             std::to_string(d.feature_dim) +
             ", attr_dim=" + std::to_string(d.attr_dim) +
             ", latent_dim=" + std::to_string(d.latent_dim) +
             ", hidden=" + std::to_string(d.hidden) + ")");
  }
}

// Promote a vector input to a 1-row matrix; remember to demote the result.
Tensor as_matrix(const Tensor& x, std::size_t want_cols, const char* who) {
  if (x.rank() == 1) {
    if (x.numel() != want_cols) {
      fail(Errc::dim_mismatch, std::string(who) + ": input has length " +
                                   std::to_string(x.numel()) + ", expected " +
                                   std::to_string(want_cols));
    }
    return Tensor({1, want_cols}, {x.data().begin(), x.data().end()});
  }
  if (x.rank() != 2 || x.cols() != want_cols) {
    fail(Errc::dim_mismatch, std::string(who) + ": input shape " +
                                 shape_str(x) + ", expected columns " +
                                 std::to_string(want_cols));
  }
  return x;
}

Tensor as_input_rank(Tensor m, std::size_t rank) {
  if (rank == 1) return Tensor({m.cols()}, {m.data().begin(), m.data().end()});
  return m;
}

// y = relu(x @ w + b) without a graph.
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b, bool relu) {
  Tensor y({x.rows(), w.cols()});
  gemm_nn(y.data(), x.data(), w.data(), x.rows(), x.cols(), w.cols(), false);
  const std::size_t c = y.cols();
  for (std::size_t r = 0; r < y.rows(); ++r) {
    double* row = y.data().data() + r * c;
    for (std::size_t j = 0; j < c; ++j) {
      row[j] += b[j];
      if (relu && row[j] < 0.0) row[j] = 0.0;
    }
  }
  return y;
}

void clamp_logvar(Tensor& t) {
  for (std::size_t i = 0; i < t.numel(); ++i) {
    t[i] = std::clamp(t[i], kLogvarLo, kLogvarHi);
  }
}

}  // namespace

ModelParams init_params(const Dims& dims, std::uint64_t seed) {
  check_dims(dims);
  RngStream rng(derive_seed(seed, StreamId::init, 0));
  const std::size_t d = dims.feature_dim;
  const std::size_t l = dims.attr_dim;
  const std::size_t z = dims.latent_dim;
  const std::size_t h = dims.hidden;

  ModelParams p;
  p.dims = dims;

  p.encoder.w1 = init_weight(d, h, rng);
  p.encoder.b1 = Tensor({h});
  p.encoder.w2 = init_weight(h, h, rng);
  p.encoder.b2 = Tensor({h});
  p.encoder.w_mean = init_weight(h, z, rng);
  p.encoder.b_mean = Tensor({z});
  p.encoder.w_logvar = init_weight(h, z, rng);
  p.encoder.b_logvar = Tensor({z});

  p.generator.w1 = init_weight(z + l, h, rng);
  p.generator.b1 = Tensor({h});
  p.generator.w_mean = init_weight(h, d, rng);
  p.generator.b_mean = Tensor({d});
  p.generator.w_logvar = init_weight(h, d, rng);
  p.generator.b_logvar = Tensor({d});

  p.regressor.w1 = init_weight(d, h, rng);
  p.regressor.b1 = Tensor({h});
  p.regressor.w_out = init_weight(h, l, rng);
  p.regressor.b_out = Tensor({l});

  return p;
}

GaussianDiag encode(const ModelParams& params, const Tensor& x) {
  const std::size_t in_rank = x.rank();
  Tensor xm = as_matrix(x, params.dims.feature_dim, "encode");
  const EncoderParams& e = params.encoder;
  Tensor h1 = affine(xm, e.w1, e.b1, true);
  Tensor h2 = affine(h1, e.w2, e.b2, true);
  GaussianDiag out;
  out.mean = as_input_rank(affine(h2, e.w_mean, e.b_mean, false), in_rank);
  Tensor lv = affine(h2, e.w_logvar, e.b_logvar, false);
  clamp_logvar(lv);
  out.logvar = as_input_rank(std::move(lv), in_rank);
  return out;
}

Tensor reparameterize(const GaussianDiag& g, const Tensor& eps) {
  if (!g.mean.same_shape(g.logvar)) {
    fail(Errc::dim_mismatch, "reparameterize: mean " + shape_str(g.mean) +
                                 " and logvar " + shape_str(g.logvar) +
                                 " differ");
  }
  if (!eps.same_shape(g.mean)) {
    fail(Errc::dim_mismatch, "reparameterize: eps " + shape_str(eps) +
                                 " does not match mean " + shape_str(g.mean));
  }
  Tensor z = g.mean;
  for (std::size_t i = 0; i < z.numel(); ++i) {
    z[i] += std::exp(0.5 * g.logvar[i]) * eps[i];
  }
  return z;
}

GaussianDiag generate(const ModelParams& params, const Tensor& z,
                      const Tensor& attrs) {
  const std::size_t in_rank = z.rank();
  Tensor zm = as_matrix(z, params.dims.latent_dim, "generate");
  Tensor am = as_matrix(attrs, params.dims.attr_dim, "generate");
  if (zm.rows() != am.rows()) {
    fail(Errc::dim_mismatch,
         "generate: z has " + std::to_string(zm.rows()) + " rows, attrs has " +
             std::to_string(am.rows()));
  }
  Tensor joint({zm.rows(), zm.cols() + am.cols()});
  for (std::size_t r = 0; r < zm.rows(); ++r) {
    double* row = joint.data().data() + r * joint.cols();
    const double* zr = zm.data().data() + r * zm.cols();
    const double* ar = am.data().data() + r * am.cols();
    std::copy(zr, zr + zm.cols(), row);
    std::copy(ar, ar + am.cols(), row + zm.cols());
  }
  const GeneratorParams& g = params.generator;
  Tensor h1 = affine(joint, g.w1, g.b1, true);
  GaussianDiag out;
  out.mean = as_input_rank(affine(h1, g.w_mean, g.b_mean, false), in_rank);
  Tensor lv = affine(h1, g.w_logvar, g.b_logvar, false);
  clamp_logvar(lv);
  out.logvar = as_input_rank(std::move(lv), in_rank);
  return out;
}

Tensor regress(const ModelParams& params, const Tensor& x) {
  const std::size_t in_rank = x.rank();
  Tensor xm = as_matrix(x, params.dims.feature_dim, "regress");
  const RegressorParams& r = params.regressor;
  Tensor h1 = affine(xm, r.w1, r.b1, true);
  return as_input_rank(affine(h1, r.w_out, r.b_out, false), in_rank);
}

namespace {

Var bind_one(Graph& g, const Tensor& t, BindKind kind, std::vector<Var>& raw) {
  Var leaf = g.leaf(t);
  raw.push_back(leaf);
  return kind == BindKind::frozen ? g.stop_grad(leaf) : leaf;
}

}  // namespace

BoundParams bind_params(Graph& g, const ModelParams& params, BindKind enc,
                        BindKind gen, BindKind reg) {
  BoundParams b;
  const EncoderParams& e = params.encoder;
  b.encoder.w1 = bind_one(g, e.w1, enc, b.raw_encoder);
  b.encoder.b1 = bind_one(g, e.b1, enc, b.raw_encoder);
  b.encoder.w2 = bind_one(g, e.w2, enc, b.raw_encoder);
  b.encoder.b2 = bind_one(g, e.b2, enc, b.raw_encoder);
  b.encoder.w_mean = bind_one(g, e.w_mean, enc, b.raw_encoder);
  b.encoder.b_mean = bind_one(g, e.b_mean, enc, b.raw_encoder);
  b.encoder.w_logvar = bind_one(g, e.w_logvar, enc, b.raw_encoder);
  b.encoder.b_logvar = bind_one(g, e.b_logvar, enc, b.raw_encoder);

  const GeneratorParams& ge = params.generator;
  b.generator.w1 = bind_one(g, ge.w1, gen, b.raw_generator);
  b.generator.b1 = bind_one(g, ge.b1, gen, b.raw_generator);
  b.generator.w_mean = bind_one(g, ge.w_mean, gen, b.raw_generator);
  b.generator.b_mean = bind_one(g, ge.b_mean, gen, b.raw_generator);
  b.generator.w_logvar = bind_one(g, ge.w_logvar, gen, b.raw_generator);
  b.generator.b_logvar = bind_one(g, ge.b_logvar, gen, b.raw_generator);

  const RegressorParams& r = params.regressor;
  b.regressor.w1 = bind_one(g, r.w1, reg, b.raw_regressor);
  b.regressor.b1 = bind_one(g, r.b1, reg, b.raw_regressor);
  b.regressor.w_out = bind_one(g, r.w_out, reg, b.raw_regressor);
  b.regressor.b_out = bind_one(g, r.b_out, reg, b.raw_regressor);
  return b;
}

GaussVars encode_graph(Graph& g, const EncoderLeaves& enc, Var x) {
  Var h1 = g.relu(g.add_bias(g.matmul(x, enc.w1), enc.b1));
  Var h2 = g.relu(g.add_bias(g.matmul(h1, enc.w2), enc.b2));
  GaussVars out;
  out.mean = g.add_bias(g.matmul(h2, enc.w_mean), enc.b_mean);
  out.logvar = g.clamp(g.add_bias(g.matmul(h2, enc.w_logvar), enc.b_logvar),
                       kLogvarLo, kLogvarHi);
  return out;
}

Var reparameterize_graph(Graph& g, const GaussVars& gauss, Var eps) {
  Var sigma = g.exp(g.scale(gauss.logvar, 0.5));
  return g.add(gauss.mean, g.mul(sigma, eps));
}

GaussVars generate_graph(Graph& g, const GeneratorLeaves& gen, Var z,
                         Var attrs) {
  Var joint = g.concat(z, attrs);
  Var h1 = g.relu(g.add_bias(g.matmul(joint, gen.w1), gen.b1));
  GaussVars out;
  out.mean = g.add_bias(g.matmul(h1, gen.w_mean), gen.b_mean);
  out.logvar = g.clamp(g.add_bias(g.matmul(h1, gen.w_logvar), gen.b_logvar),
                       kLogvarLo, kLogvarHi);
  return out;
}

Var regress_graph(Graph& g, const RegressorLeaves& reg, Var x) {
  Var h1 = g.relu(g.add_bias(g.matmul(x, reg.w1), reg.b1));
  return g.add_bias(g.matmul(h1, reg.w_out), reg.b_out);
}

ModelGrads extract_grads(const Graph& g, const BoundParams& bound) {
  ModelGrads grads;
  grads.encoder.reserve(bound.raw_encoder.size());
  for (Var v : bound.raw_encoder) grads.encoder.push_back(g.grad(v));
  grads.generator.reserve(bound.raw_generator.size());
  for (Var v : bound.raw_generator) grads.generator.push_back(g.grad(v));
  grads.regressor.reserve(bound.raw_regressor.size());
  for (Var v : bound.raw_regressor) grads.regressor.push_back(g.grad(v));
  return grads;
}

void save_checkpoint(const ModelParams& params,
                     const std::filesystem::path& path) {
  nlohmann::ordered_json header;
  header["kind"] = "model";
  header["dims"] = {{"feature_dim", params.dims.feature_dim},
                    {"attr_dim", params.dims.attr_dim},
                    {"latent_dim", params.dims.latent_dim},
                    {"hidden", params.dims.hidden}};
  FramedWriter writer(path, header.dump());
  for (const Tensor* t : params.encoder.tensors()) writer.write_tensor(*t);
  for (const Tensor* t : params.generator.tensors()) writer.write_tensor(*t);
  for (const Tensor* t : params.regressor.tensors()) writer.write_tensor(*t);
  writer.finish();
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  FramedReader reader(path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(reader.header_json());
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format_version,
         path.string() + ": bad checkpoint header: " + e.what());
  }
  if (header.value("kind", "") != "model") {
    fail(Errc::format_version,
         path.string() + ": checkpoint does not hold a model");
  }
  Dims dims;
  try {
    const auto& jd = header.at("dims");
    dims.feature_dim = jd.at("feature_dim").get<std::size_t>();
    dims.attr_dim = jd.at("attr_dim").get<std::size_t>();
    dims.latent_dim = jd.at("latent_dim").get<std::size_t>();
    dims.hidden = jd.at("hidden").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format_version,
         path.string() + ": bad dims header: " + e.what());
  }
  if (dims.feature_dim < 1 || dims.attr_dim < 1 || dims.latent_dim < 1 ||
      dims.hidden < 1) {
    fail(Errc::dim_mismatch, path.string() + ": dims must all be >= 1");
  }

  const std::size_t d = dims.feature_dim;
  const std::size_t l = dims.attr_dim;
  const std::size_t z = dims.latent_dim;
  const std::size_t h = dims.hidden;

  ModelParams p;
  p.dims = dims;
  p.encoder.w1 = reader.read_tensor({d, h});
  p.encoder.b1 = reader.read_tensor({h});
  p.encoder.w2 = reader.read_tensor({h, h});
  p.encoder.b2 = reader.read_tensor({h});
  p.encoder.w_mean = reader.read_tensor({h, z});
  p.encoder.b_mean = reader.read_tensor({z});
  p.encoder.w_logvar = reader.read_tensor({h, z});
  p.encoder.b_logvar = reader.read_tensor({z});
  p.generator.w1 = reader.read_tensor({z + l, h});
  p.generator.b1 = reader.read_tensor({h});
  p.generator.w_mean = reader.read_tensor({h, d});
  p.generator.b_mean = reader.read_tensor({d});
  p.generator.w_logvar = reader.read_tensor({h, d});
  p.generator.b_logvar = reader.read_tensor({d});
  p.regressor.w1 = reader.read_tensor({d, h});
  p.regressor.b1 = reader.read_tensor({h});
  p.regressor.w_out = reader.read_tensor({h, l});
  p.regressor.b_out = reader.read_tensor({l});
  reader.expect_end();
  return p;
}

}  // namespace segzsl
