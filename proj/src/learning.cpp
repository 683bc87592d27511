#include "metanas/learning.hpp"

#include <cmath>
#include <stdexcept>

#include "metanas/errors.hpp"

namespace metanas {

int Rng::uniform_int(int n) {
  if (n <= 0) throw std::invalid_argument("uniform_int needs n > 0");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t v;
  do {
    v = gen_();
  } while (v >= limit);
  return static_cast<int>(v % bound);
}

std::uint64_t Rng::mix(std::uint64_t seed, const std::string& tag) {
  std::uint64_t h = fnv1a64(tag + "#" + std::to_string(seed));
  // splitmix64 finalizer to spread low-entropy seeds
  h += 0x9e3779b97f4a7c15ULL;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
  return h ^ (h >> 31);
}

Param& ParameterStore::add(const std::string& name, int rows, int cols) {
  auto [it, fresh] = params_.emplace(name, Param{});
  if (!fresh) throw std::invalid_argument("duplicate parameter: " + name);
  Param& p = it->second;
  p.value = Matrix::Zero(rows, cols);
  p.grad = Matrix::Zero(rows, cols);
  p.m = Matrix::Zero(rows, cols);
  p.v = Matrix::Zero(rows, cols);
  return p;
}

Param& ParameterStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end())
    throw std::out_of_range("no parameter named " + name);
  return it->second;
}

const Param& ParameterStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end())
    throw std::out_of_range("no parameter named " + name);
  return it->second;
}

void ParameterStore::zero_grads() {
  for (auto& [name, p] : params_) p.grad.setZero();
}

double ParameterStore::grad_norm() const {
  double sq = 0.0;
  for (const auto& [name, p] : params_) sq += p.grad.squaredNorm();
  return std::sqrt(sq);
}

double ParameterStore::clip_grads(double max_norm) {
  const double norm = grad_norm();
  if (max_norm <= 0.0 || norm <= max_norm) return norm;
  const double scale = max_norm / norm;
  for (auto& [name, p] : params_) p.grad *= scale;
  return norm;
}

void ParameterStore::adam_step(double learning_rate, double beta1,
                               double beta2, double epsilon) {
  ++step_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
  for (auto& [name, p] : params_) {
    p.m = beta1 * p.m + (1.0 - beta1) * p.grad;
    p.v = beta2 * p.v + (1.0 - beta2) * p.grad.cwiseProduct(p.grad);
    const Matrix m_hat = p.m / bc1;
    const Matrix v_hat = p.v / bc2;
    p.value.array() -=
        learning_rate * m_hat.array() / (v_hat.array().sqrt() + epsilon);
    p.grad.setZero();
  }
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_)
    n += static_cast<std::size_t>(p.value.size());
  return n;
}

namespace {

nlohmann::ordered_json matrix_to_json(const Matrix& m) {
  std::vector<double> data(static_cast<size_t>(m.size()));
  // row-major dump
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      data[static_cast<size_t>(r * m.cols() + c)] = m(r, c);
  return data;
}

Matrix matrix_from_json(const nlohmann::ordered_json& j, int rows, int cols) {
  Matrix m(rows, cols);
  if (static_cast<Eigen::Index>(j.size()) != m.size())
    throw IncompatibleCheckpointError("array size does not match shape");
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = j[static_cast<size_t>(r * cols + c)].get<double>();
  return m;
}

}  // namespace

nlohmann::ordered_json ParameterStore::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "metanas-params-v1";
  j["step"] = step_;
  nlohmann::ordered_json params;
  for (const auto& [name, p] : params_) {
    nlohmann::ordered_json entry;
    entry["shape"] = {p.value.rows(), p.value.cols()};
    entry["value"] = matrix_to_json(p.value);
    entry["m"] = matrix_to_json(p.m);
    entry["v"] = matrix_to_json(p.v);
    params[name] = entry;
  }
  j["params"] = params;
  return j;
}

ParameterStore ParameterStore::from_json(const nlohmann::ordered_json& j) {
  if (!j.contains("format") || j["format"] != "metanas-params-v1")
    throw IncompatibleCheckpointError("not a parameter container");
  ParameterStore store;
  store.step_ = j.at("step").get<long>();
  for (const auto& [name, entry] : j.at("params").items()) {
    const int rows = entry.at("shape").at(0).get<int>();
    const int cols = entry.at("shape").at(1).get<int>();
    Param& p = store.add(name, rows, cols);
    p.value = matrix_from_json(entry.at("value"), rows, cols);
    p.m = matrix_from_json(entry.at("m"), rows, cols);
    p.v = matrix_from_json(entry.at("v"), rows, cols);
  }
  return store;
}

bool ParameterStore::same_values(const ParameterStore& other) const {
  if (step_ != other.step_ || params_.size() != other.params_.size())
    return false;
  auto it = other.params_.begin();
  for (const auto& [name, p] : params_) {
    if (name != it->first) return false;
    const Param& q = it->second;
    if (p.value != q.value || p.m != q.m || p.v != q.v) return false;
    ++it;
  }
  return true;
}

void glorot_init(Matrix& w, Rng& rng) {
  const double s =
      std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Eigen::Index r = 0; r < w.rows(); ++r)
    for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-s, s);
}

DenseLayer DenseLayer::create(ParameterStore& store, const std::string& prefix,
                              int in, int out, Rng& rng) {
  DenseLayer layer;
  layer.W = &store.add(prefix + ".W", out, in);
  layer.b = &store.add(prefix + ".b", out, 1);
  glorot_init(layer.W->value, rng);
  return layer;
}

DenseLayer DenseLayer::attach(ParameterStore& store,
                              const std::string& prefix) {
  DenseLayer layer;
  layer.W = &store.at(prefix + ".W");
  layer.b = &store.at(prefix + ".b");
  return layer;
}

Vector DenseLayer::forward(const Vector& x) const {
  if (x.size() != W->value.cols())
    throw ShapeMismatchError("dense input size " + std::to_string(x.size()) +
                             " != " + std::to_string(W->value.cols()));
  return W->value * x + b->value.col(0);
}

Vector DenseLayer::backward(const Vector& x, const Vector& dy) const {
  W->grad += dy * x.transpose();
  b->grad.col(0) += dy;
  return W->value.transpose() * dy;
}

LstmCell LstmCell::create(ParameterStore& store, const std::string& prefix,
                          int in, int hidden, Rng& rng) {
  LstmCell cell;
  cell.hidden = hidden;
  cell.W = &store.add(prefix + ".W", 4 * hidden, in);
  cell.U = &store.add(prefix + ".U", 4 * hidden, hidden);
  cell.b = &store.add(prefix + ".b", 4 * hidden, 1);
  glorot_init(cell.W->value, rng);
  glorot_init(cell.U->value, rng);
  // forget gate bias +1
  cell.b->value.block(hidden, 0, hidden, 1).setConstant(1.0);
  return cell;
}

LstmCell LstmCell::attach(ParameterStore& store, const std::string& prefix,
                          int hidden) {
  LstmCell cell;
  cell.hidden = hidden;
  cell.W = &store.at(prefix + ".W");
  cell.U = &store.at(prefix + ".U");
  cell.b = &store.at(prefix + ".b");
  return cell;
}

LstmCell::State LstmCell::zero_state() const {
  return State{Vector::Zero(hidden), Vector::Zero(hidden)};
}

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

LstmCell::State LstmCell::forward(const Vector& x, const State& prev,
                                  Cache* cache) const {
  if (x.size() != W->value.cols())
    throw ShapeMismatchError("lstm input size " + std::to_string(x.size()) +
                             " != " + std::to_string(W->value.cols()));
  if (prev.h.size() != hidden || prev.c.size() != hidden)
    throw ShapeMismatchError("lstm state size mismatch");

  const Vector z = W->value * x + U->value * prev.h + b->value.col(0);
  const int H = hidden;
  Vector i(H), f(H), g(H), o(H);
  for (int k = 0; k < H; ++k) {
    i(k) = sigmoid(z(k));
    f(k) = sigmoid(z(H + k));
    g(k) = std::tanh(z(2 * H + k));
    o(k) = sigmoid(z(3 * H + k));
  }
  Vector c = f.cwiseProduct(prev.c) + i.cwiseProduct(g);
  Vector tanh_c = c.array().tanh().matrix();
  Vector h = o.cwiseProduct(tanh_c);

  if (cache) {
    cache->x = x;
    cache->h_prev = prev.h;
    cache->c_prev = prev.c;
    cache->i = i;
    cache->f = f;
    cache->g = g;
    cache->o = o;
    cache->c = c;
    cache->tanh_c = tanh_c;
    cache->h = h;
  }
  return State{std::move(h), std::move(c)};
}

LstmCell::BackwardResult LstmCell::backward(const Cache& cache,
                                            const Vector& dh,
                                            const Vector& dc_in) const {
  const int H = hidden;
  const Vector do_gate = dh.cwiseProduct(cache.tanh_c);
  const Vector dtanh = (1.0 - cache.tanh_c.array().square()).matrix();
  Vector dc = dc_in + dh.cwiseProduct(cache.o).cwiseProduct(dtanh);

  const Vector di = dc.cwiseProduct(cache.g);
  const Vector dg = dc.cwiseProduct(cache.i);
  const Vector df = dc.cwiseProduct(cache.c_prev);
  const Vector dc_prev = dc.cwiseProduct(cache.f);

  Vector dz(4 * H);
  for (int k = 0; k < H; ++k) {
    dz(k) = di(k) * cache.i(k) * (1.0 - cache.i(k));
    dz(H + k) = df(k) * cache.f(k) * (1.0 - cache.f(k));
    dz(2 * H + k) = dg(k) * (1.0 - cache.g(k) * cache.g(k));
    dz(3 * H + k) = do_gate(k) * cache.o(k) * (1.0 - cache.o(k));
  }

  W->grad += dz * cache.x.transpose();
  U->grad += dz * cache.h_prev.transpose();
  b->grad.col(0) += dz;

  BackwardResult out;
  out.dh_prev = U->value.transpose() * dz;
  out.dc_prev = dc_prev;
  out.dx = W->value.transpose() * dz;
  return out;
}

Vector softmax(const Vector& logits) {
  if (logits.size() == 0) throw ShapeMismatchError("softmax of empty vector");
  if (!logits.allFinite())
    throw std::invalid_argument("softmax input is not finite");
  const double max = logits.maxCoeff();
  Vector e = (logits.array() - max).exp().matrix();
  return e / e.sum();
}

double entropy(const Vector& probs) {
  double h = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    const double p = probs(k);
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

Vector entropy_grad_logits(const Vector& probs) {
  const double h = entropy(probs);
  Vector grad(probs.size());
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    const double p = probs(k);
    grad(k) = p > 0.0 ? -p * (std::log(p) + h) : 0.0;
  }
  return grad;
}

int categorical_sample(const Vector& probs, Rng& rng) {
  const double u = rng.uniform01();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    acc += probs(k);
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(probs.size() - 1);
}

double relu_scalar(double x) { return x > 0.0 ? x : 0.0; }

Vector relu(const Vector& x) { return x.cwiseMax(0.0); }

Vector relu_backward(const Vector& pre, const Vector& dy) {
  Vector dx = dy;
  for (Eigen::Index k = 0; k < pre.size(); ++k)
    if (pre(k) <= 0.0) dx(k) = 0.0;
  return dx;
}

}  // namespace metanas
