#include "emdens/autoencoder.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace emdens {

using json = nlohmann::json;

namespace {
constexpr double kKlClamp = 1e-10;
constexpr char kModelMagic[] = "EMDENS DSA v1";
}  // namespace

void SparseAeHyper::validate() const {
  if (alpha < 0) throw DataError("alpha must be >= 0");
  if (beta < 0) throw DataError("beta must be >= 0");
  if (!(gamma > 0 && gamma < 1)) throw DataError("gamma must be in (0,1)");
  if (max_epochs < 1) throw DataError("max_epochs must be >= 1");
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Matrix sigmoid(const Matrix& x) {
  return 1.0 / (1.0 + (-x.array()).exp());
}

double l2_penalty(const AeStage& stage) {
  return 0.5 * (stage.encoder.weights.squaredNorm() + stage.decoder.weights.squaredNorm());
}

double kl_sparsity(double gamma, const Vector& gamma_hat) {
  double sum = 0.0;
  for (Eigen::Index j = 0; j < gamma_hat.size(); ++j) {
    const double gh = std::clamp(gamma_hat[j], kKlClamp, 1.0 - kKlClamp);
    sum += gamma * std::log(gamma / gh) + (1.0 - gamma) * std::log((1.0 - gamma) / (1.0 - gh));
  }
  return sum;
}

Vector pack_stage(const AeStage& stage) {
  const Eigen::Index n = stage.encoder.weights.size() + stage.encoder.biases.size() +
                         stage.decoder.weights.size() + stage.decoder.biases.size();
  Vector v(n);
  Eigen::Index at = 0;
  auto put = [&](const auto& m) {
    v.segment(at, m.size()) = Eigen::Map<const Vector>(m.data(), m.size());
    at += m.size();
  };
  put(stage.encoder.weights);
  put(stage.encoder.biases);
  put(stage.decoder.weights);
  put(stage.decoder.biases);
  return v;
}

AeStage unpack_stage(const Vector& params, int input_dim, int hidden_dim) {
  const Eigen::Index expect =
      2 * static_cast<Eigen::Index>(input_dim) * hidden_dim + input_dim + hidden_dim;
  if (params.size() != expect)
    throw DataError("parameter vector size does not match stage shape");
  AeStage st;
  Eigen::Index at = 0;
  auto take = [&](Eigen::Index rows, Eigen::Index cols) {
    Matrix m = Eigen::Map<const Matrix>(params.data() + at, rows, cols);
    at += rows * cols;
    return m;
  };
  st.encoder.weights = take(hidden_dim, input_dim);
  st.encoder.biases = take(hidden_dim, 1);
  st.decoder.weights = take(input_dim, hidden_dim);
  st.decoder.biases = take(input_dim, 1);
  return st;
}

CostBreakdown cost_and_gradient(const Vector& params, const Matrix& x, int hidden_dim,
                                const SparseAeHyper& hyper, Vector& grad) {
  const int in_dim = static_cast<int>(x.cols());
  const Eigen::Index n = x.rows();
  const AeStage st = unpack_stage(params, in_dim, hidden_dim);
  const Matrix& w1 = st.encoder.weights;
  const Matrix& w2 = st.decoder.weights;

  // forward
  Matrix hidden = sigmoid(((x * w1.transpose()).rowwise() + st.encoder.biases.transpose()));
  Matrix recon = sigmoid(((hidden * w2.transpose()).rowwise() + st.decoder.biases.transpose()));
  Vector gamma_hat = hidden.colwise().mean();

  CostBreakdown cb;
  cb.mse = (x - recon).squaredNorm() / static_cast<double>(n);
  cb.l2 = l2_penalty(st);
  cb.sparsity = kl_sparsity(hyper.gamma, gamma_hat);
  cb.total = cb.mse + hyper.alpha * cb.l2 + hyper.beta * cb.sparsity;

  // backward
  Matrix delta_out =
      (2.0 / static_cast<double>(n)) * (recon - x).array() * recon.array() * (1.0 - recon.array());
  Matrix d_w2 = delta_out.transpose() * hidden + hyper.alpha * w2;
  Vector d_b2 = delta_out.colwise().sum();

  Vector kl_grad(hidden_dim);
  for (int j = 0; j < hidden_dim; ++j) {
    const double gh = std::clamp(gamma_hat[j], kKlClamp, 1.0 - kKlClamp);
    kl_grad[j] = -hyper.gamma / gh + (1.0 - hyper.gamma) / (1.0 - gh);
  }
  Matrix upstream = delta_out * w2;
  upstream.rowwise() += (hyper.beta / static_cast<double>(n)) * kl_grad.transpose();
  Matrix delta_hidden = upstream.array() * hidden.array() * (1.0 - hidden.array());
  Matrix d_w1 = delta_hidden.transpose() * x + hyper.alpha * w1;
  Vector d_b1 = delta_hidden.colwise().sum();

  AeStage g;
  g.encoder.weights = std::move(d_w1);
  g.encoder.biases = std::move(d_b1);
  g.decoder.weights = std::move(d_w2);
  g.decoder.biases = std::move(d_b2);
  grad = pack_stage(g);
  return cb;
}

void DsaModel::validate() const {
  if (stages.empty()) throw DataError("model has no stages");
  if (hypers.size() != stages.size())
    throw DataError("hyperparameter count does not match stage count");
  for (std::size_t i = 0; i + 1 < stages.size(); ++i)
    if (stages[i].hidden_dim() != stages[i + 1].input_dim())
      throw DataError("stage " + std::to_string(i) + " output size does not feed stage " +
                      std::to_string(i + 1));
  for (const auto& st : stages)
    if (!st.encoder.weights.allFinite() || !st.decoder.weights.allFinite() ||
        !st.encoder.biases.allFinite() || !st.decoder.biases.allFinite())
      throw DataError("model contains non-finite parameters");
}

namespace {

AeStage init_stage(int input_dim, int hidden_dim, std::mt19937_64& rng) {
  // Xavier-uniform: r = sqrt(6 / (fan_in + fan_out)), biases zero.
  auto init_weights = [&](int out, int in) {
    const double r = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> uni(-r, r);
    Matrix w(out, in);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = uni(rng);
    return w;
  };
  AeStage st;
  st.encoder.weights = init_weights(hidden_dim, input_dim);
  st.encoder.biases = Vector::Zero(hidden_dim);
  st.decoder.weights = init_weights(input_dim, hidden_dim);
  st.decoder.biases = Vector::Zero(input_dim);
  return st;
}

Matrix forward_layer(const LayerParams& layer, const Matrix& input) {
  return sigmoid(((input * layer.weights.transpose()).rowwise() + layer.biases.transpose()));
}

// Joint reconstruction pass over the whole stack: MSE + alpha * L2 only.
double stack_cost_and_gradient(const Vector& params, const Matrix& x,
                               const std::vector<int>& sizes, double alpha, Vector& grad);

}  // namespace

DsaModel train_stacked(const Matrix& x01, const std::vector<int>& hidden_sizes,
                       const std::vector<SparseAeHyper>& hypers, const TrainOptions& opts,
                       TrainLog* log) {
  if (x01.rows() < 2) throw DataError("need at least 2 training rows");
  if (hidden_sizes.empty()) throw DataError("no hidden layer sizes given");
  if (hypers.size() != hidden_sizes.size())
    throw DataError("need one hyperparameter set per layer");
  for (int s : hidden_sizes)
    if (s < 1) throw DataError("layer sizes must be positive");
  for (const auto& h : hypers) h.validate();
  if (x01.minCoeff() < 0.0 || x01.maxCoeff() > 1.0)
    throw DataError("training data must be normalized to [0,1]");

  std::mt19937_64 rng(opts.seed);
  DsaModel model;
  model.hypers = hypers;
  Matrix input = x01;
  for (std::size_t stage_idx = 0; stage_idx < hidden_sizes.size(); ++stage_idx) {
    const int in_dim = static_cast<int>(input.cols());
    const int hid = hidden_sizes[stage_idx];
    const SparseAeHyper& hyper = hypers[stage_idx];
    AeStage st = init_stage(in_dim, hid, rng);
    ScgOptions scg = opts.scg;
    scg.max_iters = hyper.max_epochs;
    const Matrix& batch = input;
    Objective obj = [&](const Vector& p, Vector& g) {
      return cost_and_gradient(p, batch, hid, hyper, g).total;
    };
    ScgResult res;
    try {
      res = scg_minimize(obj, pack_stage(st), scg);
    } catch (const NumericError& e) {
      throw NumericError("stage " + std::to_string(stage_idx + 1) +
                         " training diverged: " + e.what());
    }
    if (!std::isfinite(res.cost))
      throw NumericError("stage " + std::to_string(stage_idx + 1) + " diverged");
    if (log) log->stage_costs.push_back(res.cost_history);
    st = unpack_stage(res.params, in_dim, hid);
    input = forward_layer(st.encoder, input);
    model.stages.push_back(std::move(st));
  }

  if (opts.fine_tune) {
    std::vector<int> sizes{static_cast<int>(x01.cols())};
    for (int s : hidden_sizes) sizes.push_back(s);
    for (auto it = hidden_sizes.rbegin() + 1; it != hidden_sizes.rend(); ++it)
      sizes.push_back(*it);
    sizes.push_back(static_cast<int>(x01.cols()));

    Eigen::Index total = 0;
    for (const auto& st : model.stages) total += pack_stage(st).size();
    Vector params(total);
    Eigen::Index at = 0;
    for (const auto& st : model.stages) {
      Vector v = pack_stage(st);
      params.segment(at, v.size()) = v;
      at += v.size();
    }
    const double alpha = hypers.front().alpha;
    Objective obj = [&](const Vector& p, Vector& g) {
      return stack_cost_and_gradient(p, x01, sizes, alpha, g);
    };
    ScgOptions scg = opts.scg;
    scg.max_iters = hypers.front().max_epochs;
    ScgResult res = scg_minimize(obj, params, scg);
    if (log) log->fine_tune_costs = res.cost_history;
    at = 0;
    for (std::size_t i = 0; i < model.stages.size(); ++i) {
      const Eigen::Index len = pack_stage(model.stages[i]).size();
      model.stages[i] = unpack_stage(res.params.segment(at, len),
                                     model.stages[i].input_dim(),
                                     model.stages[i].hidden_dim());
      at += len;
    }
  }

  model.validate();
  return model;
}

namespace {

double stack_cost_and_gradient(const Vector& params, const Matrix& x,
                               const std::vector<int>& sizes, double alpha, Vector& grad) {
  // sizes: D, h1, .., hd, .., h1, D. Layer l maps sizes[l] -> sizes[l+1].
  const std::size_t n_layers = sizes.size() - 1;
  std::vector<LayerParams> layers(n_layers);
  Eigen::Index at = 0;
  // The packed layout is per-stage (enc W, enc b, dec W, dec b); map the
  // mirrored layer list onto stage slots.
  const std::size_t n_stages = n_layers / 2;
  std::vector<Eigen::Index> enc_w_at(n_stages), enc_b_at(n_stages), dec_w_at(n_stages),
      dec_b_at(n_stages);
  for (std::size_t s = 0; s < n_stages; ++s) {
    const Eigen::Index in = sizes[s], hid = sizes[s + 1];
    enc_w_at[s] = at;
    at += hid * in;
    enc_b_at[s] = at;
    at += hid;
    dec_w_at[s] = at;
    at += in * hid;
    dec_b_at[s] = at;
    at += in;
  }
  for (std::size_t l = 0; l < n_layers; ++l) {
    const Eigen::Index in = sizes[l], out = sizes[l + 1];
    const bool enc = l < n_stages;
    const std::size_t s = enc ? l : n_layers - 1 - l;
    const Eigen::Index w_at = enc ? enc_w_at[s] : dec_w_at[s];
    const Eigen::Index b_at = enc ? enc_b_at[s] : dec_b_at[s];
    layers[l].weights = Eigen::Map<const Matrix>(params.data() + w_at, out, in);
    layers[l].biases = params.segment(b_at, out);
  }

  std::vector<Matrix> acts(n_layers + 1);
  acts[0] = x;
  for (std::size_t l = 0; l < n_layers; ++l)
    acts[l + 1] = forward_layer(layers[l], acts[l]);

  const double n = static_cast<double>(x.rows());
  double cost = (x - acts.back()).squaredNorm() / n;
  for (const auto& layer : layers) cost += 0.5 * alpha * layer.weights.squaredNorm();

  grad.setZero(params.size());
  Matrix delta = (2.0 / n) * (acts.back() - x).array() * acts.back().array() *
                 (1.0 - acts.back().array());
  for (std::size_t l = n_layers; l-- > 0;) {
    Matrix d_w = delta.transpose() * acts[l] + alpha * layers[l].weights;
    Vector d_b = delta.colwise().sum();
    const bool enc = l < n_stages;
    const std::size_t s = enc ? l : n_layers - 1 - l;
    const Eigen::Index w_at = enc ? enc_w_at[s] : dec_w_at[s];
    const Eigen::Index b_at = enc ? enc_b_at[s] : dec_b_at[s];
    grad.segment(w_at, d_w.size()) += Eigen::Map<const Vector>(d_w.data(), d_w.size());
    grad.segment(b_at, d_b.size()) += d_b;
    if (l > 0)
      delta = (delta * layers[l].weights).array() * acts[l].array() * (1.0 - acts[l].array());
  }
  return cost;
}

}  // namespace

Matrix encode(const DsaModel& model, const Matrix& x01) {
  if (x01.cols() != model.input_dim())
    throw DataError("input has " + std::to_string(x01.cols()) + " channels, model expects " +
                    std::to_string(model.input_dim()));
  Matrix z = x01;
  for (const auto& st : model.stages) z = forward_layer(st.encoder, z);
  return z;
}

Matrix decode(const DsaModel& model, const Matrix& z) {
  if (z.cols() != model.latent_dim())
    throw DataError("latent input width does not match model bottleneck");
  Matrix x = z;
  for (auto it = model.stages.rbegin(); it != model.stages.rend(); ++it)
    x = forward_layer(it->decoder, x);
  return x;
}

double reconstruction_mse(const Matrix& x, const Matrix& x_prime) {
  if (x.rows() != x_prime.rows() || x.cols() != x_prime.cols())
    throw DataError("shape mismatch in reconstruction_mse");
  return (x - x_prime).squaredNorm() / static_cast<double>(x.rows());
}

void save_model(const DsaModel& model, const std::string& path) {
  model.validate();
  json header;
  header["version"] = 1;
  header["input_dim"] = model.input_dim();
  std::vector<int> hidden;
  for (const auto& st : model.stages) hidden.push_back(st.hidden_dim());
  header["hidden_sizes"] = hidden;
  json hj = json::array();
  for (const auto& h : model.hypers)
    hj.push_back({{"alpha", h.alpha},
                  {"beta", h.beta},
                  {"gamma", h.gamma},
                  {"max_epochs", h.max_epochs}});
  header["hypers"] = hj;
  header["norm"] = {{"min", std::vector<double>(model.norm.min.begin(), model.norm.min.end())},
                    {"max", std::vector<double>(model.norm.max.begin(), model.norm.max.end())},
                    {"constant", model.norm.constant}};
  Eigen::Index total = 0;
  for (const auto& st : model.stages) total += pack_stage(st).size();
  header["param_count"] = total;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file: " + path);
  out << kModelMagic << "\n" << header.dump() << "\n";
  for (const auto& st : model.stages) {
    Vector v = pack_stage(st);
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  if (!out) throw DataError("model write failed: " + path);
}

DsaModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file: " + path);
  std::string magic, header_line;
  if (!std::getline(in, magic) || magic != kModelMagic)
    throw DataError("not a model file (bad magic): " + path);
  if (!std::getline(in, header_line)) throw DataError("model file truncated: " + path);
  json header;
  try {
    header = json::parse(header_line);
  } catch (const json::exception& e) {
    throw DataError("malformed model header: " + std::string(e.what()));
  }
  if (header.at("version").get<int>() != 1)
    throw DataError("unsupported model version");

  DsaModel model;
  const int input_dim = header.at("input_dim").get<int>();
  const auto hidden = header.at("hidden_sizes").get<std::vector<int>>();
  for (const auto& hj : header.at("hypers")) {
    SparseAeHyper h;
    h.alpha = hj.at("alpha").get<double>();
    h.beta = hj.at("beta").get<double>();
    h.gamma = hj.at("gamma").get<double>();
    h.max_epochs = hj.at("max_epochs").get<int>();
    model.hypers.push_back(h);
  }
  const auto& nj = header.at("norm");
  const auto nmin = nj.at("min").get<std::vector<double>>();
  const auto nmax = nj.at("max").get<std::vector<double>>();
  model.norm.min = Eigen::Map<const Vector>(nmin.data(), nmin.size());
  model.norm.max = Eigen::Map<const Vector>(nmax.data(), nmax.size());
  model.norm.constant = nj.at("constant").get<std::vector<bool>>();

  const Eigen::Index declared = header.at("param_count").get<Eigen::Index>();
  Eigen::Index total = 0;
  int in_dim = input_dim;
  for (int hid : hidden) {
    total += 2 * static_cast<Eigen::Index>(in_dim) * hid + in_dim + hid;
    in_dim = hid;
  }
  if (total != declared) throw DataError("model header shape/param_count mismatch");

  Vector params(total);
  in.read(reinterpret_cast<char*>(params.data()),
          static_cast<std::streamsize>(total * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(total * sizeof(double)))
    throw DataError("model file truncated: " + path);

  Eigen::Index at = 0;
  in_dim = input_dim;
  for (int hid : hidden) {
    const Eigen::Index len = 2 * static_cast<Eigen::Index>(in_dim) * hid + in_dim + hid;
    model.stages.push_back(unpack_stage(params.segment(at, len), in_dim, hid));
    at += len;
    in_dim = hid;
  }
  model.validate();
  return model;
}

}  // namespace emdens
