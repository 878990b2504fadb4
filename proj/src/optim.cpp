#include "fcnseg/optim.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace fcnseg::optim {

Solver parse_solver(const std::string& name) {
  if (name == "sgd") return Solver::sgd;
  if (name == "adam") return Solver::adam;
  if (name == "adagrad") return Solver::adagrad;
  if (name == "nag") return Solver::nag;
  if (name == "rmsprop") return Solver::rmsprop;
  if (name == "adadelta") return Solver::adadelta;
  throw std::invalid_argument("unknown solver '" + name +
                              "' (expected sgd|adam|adagrad|nag|rmsprop|adadelta)");
}

std::string solver_name(Solver s) {
  switch (s) {
    case Solver::sgd: return "sgd";
    case Solver::adam: return "adam";
    case Solver::adagrad: return "adagrad";
    case Solver::nag: return "nag";
    case Solver::rmsprop: return "rmsprop";
    case Solver::adadelta: return "adadelta";
  }
  return "?";
}

OptimizerState make_state(Solver kind, const HyperOverrides& o) {
  OptimizerState s;
  s.kind = kind;
  s.hyper.eps = (kind == Solver::adadelta) ? 1e-6 : 1e-8;
  if (o.lr) s.hyper.lr = *o.lr;
  if (o.momentum) s.hyper.momentum = *o.momentum;
  if (o.beta1) s.hyper.beta1 = *o.beta1;
  if (o.beta2) s.hyper.beta2 = *o.beta2;
  if (o.rho) s.hyper.rho = *o.rho;
  if (o.eps) s.hyper.eps = *o.eps;
  if (o.rms_decay) s.hyper.rms_decay = *o.rms_decay;

  if (s.hyper.lr < 0) throw std::invalid_argument("optimizer: learning rate must be non-negative");
  auto unit = [](double v) { return v >= 0.0 && v < 1.0; };
  if (!unit(s.hyper.beta1) || !unit(s.hyper.beta2))
    throw std::invalid_argument("optimizer: beta must lie in [0,1)");
  if (!unit(s.hyper.rho)) throw std::invalid_argument("optimizer: rho must lie in [0,1)");
  if (!unit(s.hyper.rms_decay)) throw std::invalid_argument("optimizer: decay must lie in [0,1)");
  if (s.hyper.eps <= 0) throw std::invalid_argument("optimizer: eps must be positive");
  return s;
}

namespace {

void ensure_buffers(OptimizerState& s, const std::vector<NamedParam>& params) {
  if (s.buf_a.empty()) {
    for (const auto& [name, p] : params) s.buf_a.emplace_back(Tensor::zeros(p->value.shape));
    if (s.kind == Solver::adam || s.kind == Solver::adadelta)
      for (const auto& [name, p] : params) s.buf_b.emplace_back(Tensor::zeros(p->value.shape));
  }
  if (s.buf_a.size() != params.size())
    throw std::invalid_argument("optimizer: parameter count changed between updates");
  for (size_t i = 0; i < params.size(); ++i)
    if (!s.buf_a[i].same_shape(params[i].second->value.shape))
      throw std::invalid_argument("optimizer: buffer shape mismatch for " + params[i].first);
}

}  // namespace

void apply_update(OptimizerState& s, const std::vector<NamedParam>& params) {
  ensure_buffers(s, params);
  for (const auto& [name, p] : params) {
    if (!p->has_grad())
      throw std::invalid_argument("optimizer: parameter " + name + " has no gradient");
    for (double g : p->grad.data)
      if (std::isnan(g))
        throw std::runtime_error("optimizer: NaN gradient in parameter " + name);
  }

  s.step += 1;
  const Hyper& h = s.hyper;
  for (size_t i = 0; i < params.size(); ++i) {
    auto& w = params[i].second->value.data;
    const auto& g = params[i].second->grad.data;
    switch (s.kind) {
      case Solver::sgd: {
        auto& v = s.buf_a[i].data;
        for (size_t j = 0; j < w.size(); ++j) {
          v[j] = h.momentum * v[j] - h.lr * g[j];
          w[j] += v[j];
        }
        break;
      }
      case Solver::nag: {
        auto& v = s.buf_a[i].data;
        for (size_t j = 0; j < w.size(); ++j) {
          const double v_old = v[j];
          v[j] = h.momentum * v_old - h.lr * g[j];
          w[j] += h.momentum * h.momentum * v_old - (1.0 + h.momentum) * h.lr * g[j];
        }
        break;
      }
      case Solver::adagrad: {
        auto& a = s.buf_a[i].data;
        for (size_t j = 0; j < w.size(); ++j) {
          a[j] += g[j] * g[j];
          w[j] -= h.lr * g[j] / (std::sqrt(a[j]) + h.eps);
        }
        break;
      }
      case Solver::rmsprop: {
        auto& ms = s.buf_a[i].data;
        for (size_t j = 0; j < w.size(); ++j) {
          ms[j] = h.rms_decay * ms[j] + (1.0 - h.rms_decay) * g[j] * g[j];
          w[j] -= h.lr * g[j] / (std::sqrt(ms[j]) + h.eps);
        }
        break;
      }
      case Solver::adam: {
        auto& m = s.buf_a[i].data;
        auto& u = s.buf_b[i].data;
        const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(s.step));
        const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(s.step));
        for (size_t j = 0; j < w.size(); ++j) {
          m[j] = h.beta1 * m[j] + (1.0 - h.beta1) * g[j];
          u[j] = h.beta2 * u[j] + (1.0 - h.beta2) * g[j] * g[j];
          const double mhat = m[j] / bc1;
          const double uhat = u[j] / bc2;
          w[j] -= h.lr * mhat / (std::sqrt(uhat) + h.eps);
        }
        break;
      }
      case Solver::adadelta: {
        auto& eg = s.buf_a[i].data;
        auto& ex = s.buf_b[i].data;
        for (size_t j = 0; j < w.size(); ++j) {
          eg[j] = h.rho * eg[j] + (1.0 - h.rho) * g[j] * g[j];
          const double dx = -std::sqrt(ex[j] + h.eps) / std::sqrt(eg[j] + h.eps) * g[j];
          ex[j] = h.rho * ex[j] + (1.0 - h.rho) * dx * dx;
          w[j] += dx;
        }
        break;
      }
    }
  }
}

namespace {
constexpr char kMagic[4] = {'F', 'C', 'N', 'O'};

void put_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}
uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}
void put_f64(std::ostream& os, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}
double get_f64(std::istream& is) {
  uint64_t bits = get_u64(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}
}  // namespace

void save_state(std::ostream& os, const OptimizerState& s) {
  os.write(kMagic, 4);
  os.put(static_cast<char>(s.kind));
  put_f64(os, s.hyper.lr);
  put_f64(os, s.hyper.momentum);
  put_f64(os, s.hyper.beta1);
  put_f64(os, s.hyper.beta2);
  put_f64(os, s.hyper.rho);
  put_f64(os, s.hyper.eps);
  put_f64(os, s.hyper.rms_decay);
  put_u64(os, s.step);
  put_u64(os, s.buf_a.size());
  for (const auto& t : s.buf_a) write_tensor(os, t);
  put_u64(os, s.buf_b.size());
  for (const auto& t : s.buf_b) write_tensor(os, t);
}

OptimizerState load_state(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("optimizer state: bad magic");
  OptimizerState s;
  s.kind = static_cast<Solver>(is.get());
  s.hyper.lr = get_f64(is);
  s.hyper.momentum = get_f64(is);
  s.hyper.beta1 = get_f64(is);
  s.hyper.beta2 = get_f64(is);
  s.hyper.rho = get_f64(is);
  s.hyper.eps = get_f64(is);
  s.hyper.rms_decay = get_f64(is);
  s.step = get_u64(is);
  s.buf_a.resize(get_u64(is));
  for (auto& t : s.buf_a) t = read_tensor(is);
  s.buf_b.resize(get_u64(is));
  for (auto& t : s.buf_b) t = read_tensor(is);
  if (!is) throw std::runtime_error("optimizer state: truncated");
  return s;
}

}  // namespace fcnseg::optim
