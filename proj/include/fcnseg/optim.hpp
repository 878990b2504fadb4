#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fcnseg/autodiff.hpp"
#include "fcnseg/tensor.hpp"

namespace fcnseg::optim {

enum class Solver { sgd, adam, adagrad, nag, rmsprop, adadelta };

Solver parse_solver(const std::string& name);
std::string solver_name(Solver s);

struct Hyper {
  double lr = 1e-4;
  double momentum = 0.9;   // sgd, nag
  double beta1 = 0.9;      // adam
  double beta2 = 0.999;    // adam
  double rho = 0.95;       // adadelta
  double eps = 1e-8;       // adadelta defaults to 1e-6
  double rms_decay = 0.9;  // rmsprop
};

struct HyperOverrides {
  std::optional<double> lr, momentum, beta1, beta2, rho, eps, rms_decay;
};

/// Per-parameter auxiliary buffers plus hyperparameters. Buffers are sized
/// lazily on the first update and keyed by parameter position.
struct OptimizerState {
  Solver kind = Solver::sgd;
  Hyper hyper;
  uint64_t step = 0;            // strictly increases by 1 per apply_update
  std::vector<Tensor> buf_a;    // momentum v / Adam m / AdaGrad acc / RMSprop s / AdaDelta Eg
  std::vector<Tensor> buf_b;    // Adam u / AdaDelta Ex
};

OptimizerState make_state(Solver kind, const HyperOverrides& overrides = {});

using NamedParam = std::pair<std::string, ValuePtr>;

/// One solver step over all parameters, reading each parameter's .grad and
/// updating .value in place. NaN gradients abort with the parameter name.
/// Update rules:
///   sgd:      v = mu*v - lr*g;            w += v
///   nag:      v = mu*v - lr*g;            w += mu^2*v_old - (1+mu)*lr*g
///             (stored parameters are the lookahead point, so gradients are
///              evaluated where Nesterov's method needs them)
///   adagrad:  a += g^2;                   w -= lr*g/(sqrt(a)+eps)
///   rmsprop:  s = d*s + (1-d)*g^2;        w -= lr*g/(sqrt(s)+eps)
///   adam:     m,u moments, bias-corrected; w -= lr*mhat/(sqrt(uhat)+eps)
///   adadelta: Eg = rho*Eg + (1-rho)*g^2; dx = -sqrt(Ex+eps)/sqrt(Eg+eps)*g;
///             Ex = rho*Ex + (1-rho)*dx^2; w += dx
void apply_update(OptimizerState& state, const std::vector<NamedParam>& params);

void save_state(std::ostream& os, const OptimizerState& state);
OptimizerState load_state(std::istream& is);

}  // namespace fcnseg::optim
