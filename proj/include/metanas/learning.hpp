#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "metanas/nsc.hpp"

namespace metanas {

// Deterministic RNG. mt19937_64 output is pinned by the standard; the
// distributions here are written out so sequences are identical across
// platforms and compilers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  // Unbiased uniform integer in [0, n).
  int uniform_int(int n);

  // Derives an independent stream for a named purpose.
  static std::uint64_t mix(std::uint64_t seed, const std::string& tag);

 private:
  std::mt19937_64 gen_;
};

// A named parameter array with its gradient and Adam moment buffers.
struct Param {
  Matrix value;
  Matrix grad;
  Matrix m;
  Matrix v;
};

// Ordered collection of named parameters plus the shared Adam step counter.
// Serialization is bit-exact: load(save(x)) reproduces every array.
class ParameterStore {
 public:
  Param& add(const std::string& name, int rows, int cols);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) > 0; }

  void zero_grads();
  // Global-norm clipping; no-op when max_norm <= 0.
  double clip_grads(double max_norm);
  double grad_norm() const;

  // One Adam step over every parameter, with bias correction; gradients are
  // zeroed afterwards.
  void adam_step(double learning_rate, double beta1 = 0.9,
                 double beta2 = 0.999, double epsilon = 1e-8);

  long step_count() const { return step_; }
  std::size_t parameter_count() const;

  nlohmann::ordered_json to_json() const;
  static ParameterStore from_json(const nlohmann::ordered_json& j);

  bool same_values(const ParameterStore& other) const;

  std::map<std::string, Param>& params() { return params_; }
  const std::map<std::string, Param>& params() const { return params_; }

 private:
  std::map<std::string, Param> params_;
  long step_ = 0;
};

// Uniform init in [-s, s] with s = sqrt(6 / (fan_in + fan_out)).
void glorot_init(Matrix& w, Rng& rng);

// y = W x + b. W is out x in, b is out x 1.
struct DenseLayer {
  Param* W = nullptr;
  Param* b = nullptr;

  static DenseLayer create(ParameterStore& store, const std::string& prefix,
                           int in, int out, Rng& rng);
  static DenseLayer attach(ParameterStore& store, const std::string& prefix);

  int in_size() const { return static_cast<int>(W->value.cols()); }
  int out_size() const { return static_cast<int>(W->value.rows()); }

  Vector forward(const Vector& x) const;
  // Accumulates dW/db from upstream dy and returns dx.
  Vector backward(const Vector& x, const Vector& dy) const;
};

// Standard LSTM cell with packed gates [i; f; g; o]:
//   i,f,o = sigmoid(...), g = tanh(...),
//   c' = f*c + i*g, h' = o * tanh(c').
// Forget-gate bias starts at +1, the rest at 0.
struct LstmCell {
  Param* W = nullptr;  // 4H x in
  Param* U = nullptr;  // 4H x H
  Param* b = nullptr;  // 4H x 1
  int hidden = 0;

  static LstmCell create(ParameterStore& store, const std::string& prefix,
                         int in, int hidden, Rng& rng);
  static LstmCell attach(ParameterStore& store, const std::string& prefix,
                         int hidden);

  int in_size() const { return static_cast<int>(W->value.cols()); }

  struct State {
    Vector h;
    Vector c;
  };
  State zero_state() const;

  // Everything backward() needs for one step.
  struct Cache {
    Vector x, h_prev, c_prev;
    Vector i, f, g, o;   // post-activation gates
    Vector c, tanh_c, h;
  };

  State forward(const Vector& x, const State& prev, Cache* cache) const;

  struct BackwardResult {
    Vector dh_prev;
    Vector dc_prev;
    Vector dx;
  };
  // dh: gradient into h of this step (head + recurrent); dc: recurrent
  // gradient into c. Accumulates parameter gradients.
  BackwardResult backward(const Cache& cache, const Vector& dh,
                          const Vector& dc) const;
};

// Numerically stable softmax (max-shifted). Throws ShapeMismatchError on
// empty input and NonFinite on non-finite logits.
Vector softmax(const Vector& logits);

// -sum p_i ln p_i, in nats. Zero entries contribute zero.
double entropy(const Vector& probs);

// d entropy(softmax(z)) / dz.
Vector entropy_grad_logits(const Vector& probs);

// Inverse-CDF draw from a probability vector.
int categorical_sample(const Vector& probs, Rng& rng);

double relu_scalar(double x);
Vector relu(const Vector& x);
Vector relu_backward(const Vector& pre, const Vector& dy);

}  // namespace metanas
